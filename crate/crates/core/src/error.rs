use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{line}:{column}: syntax error: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("{line}:{column}: undeclared proposition `{name}`")]
    UndeclaredProposition {
        name: String,
        line: usize,
        column: usize,
    },

    #[error("{count} atomic propositions exceed the supported alphabet (at most {limit})")]
    AlphabetTooLarge { count: usize, limit: usize },

    #[error("automaton construction exceeded the cap of {limit} states")]
    AutomatonCapacity { limit: usize },

    #[error(
        "solver tables need {required_bytes} bytes for {augmented_states} augmented states \
         (full space (H+1)*|S|*|Q|*prod|Lambda_k| = {full_space}), cap is {cap_bytes} bytes"
    )]
    SolverCapacity {
        required_bytes: u128,
        augmented_states: u128,
        full_space: u128,
        cap_bytes: u128,
    },

    #[error("state {state} has {count} admissible actions, the solver supports at most 64")]
    TooManyActions { state: String, count: usize },

    #[error("automaton is not total; complete it with add_rejecting_sink first")]
    IncompleteAutomaton,

    #[error("unknown state index {0}")]
    UnknownState(usize),

    #[error("unknown action index {0}")]
    UnknownAction(usize),

    #[error("unknown state `{0}`")]
    UnknownStateName(String),

    #[error("trajectory never reached the target set, costs are undefined")]
    MissingHittingTime,

    #[error("policy has no probability mass at decision state {0}")]
    ZeroPolicyMass(String),

    #[error("invalid policy: {0}")]
    InvalidPolicy(String),

    #[error("objective {0} is not max-aggregated")]
    NotMaxObjective(usize),

    #[error("cell ({x}, {y}) has {neighbors} neighbor(s); only 2, 3 or 4 are supported")]
    UnsupportedTopology { x: usize, y: usize, neighbors: usize },

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("invalid solver configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid model:\n{0}")]
    InvalidModel(String),

    #[error("{}{pointer}: {message}", path.as_ref().map(|p| format!("{}: ", p.display())).unwrap_or_default())]
    Schema {
        path: Option<PathBuf>,
        pointer: String,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Capacity failures are reported separately from invalid input.
    pub fn is_capacity(&self) -> bool {
        matches!(
            self,
            Error::AutomatonCapacity { .. }
                | Error::SolverCapacity { .. }
                | Error::AlphabetTooLarge { .. }
                | Error::TooManyActions { .. }
        )
    }

    pub(crate) fn schema(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Schema {
            path: None,
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Attach a file path to a schema error.
    pub fn with_path(self, file: impl Into<PathBuf>) -> Self {
        match self {
            Error::Schema {
                pointer, message, ..
            } => Error::Schema {
                path: Some(file.into()),
                pointer,
                message,
            },
            other => other,
        }
    }
}
