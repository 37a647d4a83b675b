//! Scenario files: JSON schema, canonical serialization and compilation
//! into a solvable model.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::grid::{enter_cost_objective, Grid, GridLayout};
use crate::fltl::{minimize_dfa, parse_fltl, to_dfa, Dfa, Formula};
use crate::lex::{Epsilon, SolverConfig};
use crate::mdp::{validate_system, ActionId, Aggregation, CostSpec, StateId, System, SystemBuilder};
use crate::product::{build_product, ProductSystem, TargetRule};
use crate::{Error, Result};

pub const DEFAULT_C_FAIL: f64 = 1e6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionEntry {
    pub from: String,
    pub action: String,
    pub to: String,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CostEntry {
    pub from: String,
    pub action: String,
    pub to: String,
    pub c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectiveEntry {
    pub aggregation: Aggregation,
    pub default_cost: f64,
    /// Per-edge overrides; these win over `enter_costs`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub costs: Vec<CostEntry>,
    /// Cost of every edge entering the named state.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub enter_costs: BTreeMap<String, f64>,
}

/// On-disk scenario. The system comes either from `grid` or from the
/// explicit `states`/`actions`/`admissible`/`transitions` keys.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioFile {
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub states: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub actions: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub admissible: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub transitions: Vec<TransitionEntry>,
    #[serde(default)]
    pub targets: Vec<String>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub labels: BTreeMap<String, Vec<String>>,
    #[serde(default)]
    pub objectives: Vec<ObjectiveEntry>,
    /// Start state; the first state when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub initial: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<GridLayout>,
    /// Proposition alphabet; the sorted union of the labels when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ap: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub formula: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub horizon: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub c_fail: Option<f64>,
    /// Absolute slack; automatic when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
}

/// Escape one JSON-pointer reference token.
pub(crate) fn pointer_token(s: &str) -> String {
    s.replace('~', "~0").replace('/', "~1")
}

fn path_to_pointer(path: &serde_path_to_error::Path) -> String {
    use serde_path_to_error::Segment;
    let mut out = String::new();
    for seg in path.iter() {
        out.push('/');
        match seg {
            Segment::Seq { index } => out.push_str(&index.to_string()),
            Segment::Map { key } => out.push_str(&pointer_token(key)),
            Segment::Enum { variant } => out.push_str(&pointer_token(variant)),
            Segment::Unknown => out.push('?'),
        }
    }
    out
}

/// Deserialize JSON text, reporting failures with a JSON pointer.
pub(crate) fn from_json_text<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let pointer = path_to_pointer(e.path());
        Error::schema(pointer, e.into_inner().to_string())
    })
}

/// Pretty JSON with sorted keys and a trailing newline.
pub(crate) fn canonical_json<T: Serialize>(value: &T) -> Result<String> {
    // `serde_json::Value` keeps object keys in a sorted map.
    let v = serde_json::to_value(value)?;
    let mut s = serde_json::to_string_pretty(&v)?;
    s.push('\n');
    Ok(s)
}

impl ScenarioFile {
    pub fn from_json_str(text: &str) -> Result<Self> {
        from_json_text(text)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text).map_err(|e| e.with_path(path))
    }

    pub fn to_canonical_json(&self) -> Result<String> {
        canonical_json(self)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_canonical_json()?).map_err(|e| Error::io(path, e))
    }

    /// Explicit-form scenario describing `sys` and `spec`.
    pub fn from_system(sys: &System, spec: &CostSpec) -> Self {
        let sn = |s: StateId| sys.state_name(s).to_string();
        let an = |a: ActionId| sys.action_name(a).to_string();
        let mut file = ScenarioFile {
            states: sys.state_names().to_vec(),
            actions: sys.action_names().to_vec(),
            targets: sys.targets().map(sn).collect(),
            ..Default::default()
        };
        for s in sys.states() {
            if !sys.labels(s).is_empty() {
                file.labels.insert(sn(s), sys.labels(s).to_vec());
            }
            let acts: Vec<String> = sys.admissible(s).map(an).collect();
            if !acts.is_empty() {
                file.admissible.insert(sn(s), acts);
            }
            for c in sys.choices(s) {
                for succ in &c.successors {
                    file.transitions.push(TransitionEntry {
                        from: sn(s),
                        action: an(c.action),
                        to: sn(succ.state),
                        p: succ.prob,
                    });
                }
            }
        }
        file.objectives = spec
            .objectives
            .iter()
            .map(|o| {
                let mut costs: Vec<CostEntry> = o
                    .overrides
                    .iter()
                    .filter(|(_, &c)| c != o.default_cost)
                    .map(|(&(s, a, t), &c)| CostEntry {
                        from: sn(s),
                        action: an(a),
                        to: sn(t),
                        c,
                    })
                    .collect();
                costs.sort_by(|x, y| (&x.from, &x.action, &x.to).cmp(&(&y.from, &y.action, &y.to)));
                ObjectiveEntry {
                    aggregation: o.aggregation,
                    default_cost: o.default_cost,
                    costs,
                    enter_costs: BTreeMap::new(),
                }
            })
            .collect();
        file.initial = file.states.first().cloned();
        file
    }

    /// Resolve names, build the system and costs, and validate everything.
    pub fn compile(&self) -> Result<Model> {
        let explicit = !(self.states.is_empty()
            && self.actions.is_empty()
            && self.admissible.is_empty()
            && self.transitions.is_empty());
        let (mut builder, names, actions, grid) = match &self.grid {
            Some(layout) => {
                if explicit {
                    return Err(Error::schema(
                        "/grid",
                        "`grid` cannot be combined with states, actions, admissible or transitions",
                    ));
                }
                let grid = Grid::new(layout)?;
                let actions: Vec<String> = super::grid::MOVES.iter().map(|m| m.0.to_string()).collect();
                (grid.builder()?, grid.names().to_vec(), actions, Some(grid))
            }
            None => {
                let b = SystemBuilder::new(self.states.iter().cloned(), self.actions.iter().cloned());
                (b, self.states.clone(), self.actions.clone(), None)
            }
        };
        let state_ix: BTreeMap<&str, usize> = names.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let action_ix: BTreeMap<&str, usize> = actions.iter().enumerate().map(|(i, n)| (n.as_str(), i)).collect();
        let state = |name: &str, at: String| {
            state_ix
                .get(name)
                .copied()
                .ok_or_else(|| Error::schema(at, format!("unknown state `{name}`")))
        };
        let action = |name: &str, at: String| {
            action_ix
                .get(name)
                .copied()
                .ok_or_else(|| Error::schema(at, format!("unknown action `{name}`")))
        };

        for (s, acts) in &self.admissible {
            let si = state(s, format!("/admissible/{}", pointer_token(s)))?;
            for (i, a) in acts.iter().enumerate() {
                let ai = action(a, format!("/admissible/{}/{i}", pointer_token(s)))?;
                builder.admit(si, ai);
            }
        }
        for (i, t) in self.transitions.iter().enumerate() {
            let from = state(&t.from, format!("/transitions/{i}/from"))?;
            let a = action(&t.action, format!("/transitions/{i}/action"))?;
            let to = state(&t.to, format!("/transitions/{i}/to"))?;
            builder.transition(from, a, to, t.p);
        }
        for (i, t) in self.targets.iter().enumerate() {
            builder.target(state(t, format!("/targets/{i}"))?);
        }
        for (s, props) in &self.labels {
            let si = state(s, format!("/labels/{}", pointer_token(s)))?;
            for p in props {
                builder.label(si, p.clone());
            }
        }
        let initial = match &self.initial {
            Some(name) => StateId(state(name, "/initial".into())?),
            None => StateId(0),
        };
        let system = builder.build();

        if self.objectives.is_empty() {
            return Err(Error::schema("/objectives", "at least one objective is required"));
        }
        let mut objectives = Vec::new();
        for (k, o) in self.objectives.iter().enumerate() {
            let mut enter = BTreeMap::new();
            for (s, &c) in &o.enter_costs {
                let at = format!("/objectives/{k}/enter_costs/{}", pointer_token(s));
                enter.insert(StateId(state(s, at)?), c);
            }
            let mut obj = enter_cost_objective(&system, o.aggregation, o.default_cost, &enter);
            for (i, c) in o.costs.iter().enumerate() {
                let at = |f: &str| format!("/objectives/{k}/costs/{i}/{f}");
                let key = (
                    StateId(state(&c.from, at("from"))?),
                    ActionId(action(&c.action, at("action"))?),
                    StateId(state(&c.to, at("to"))?),
                );
                obj.overrides.insert(key, c.c);
            }
            objectives.push(obj);
        }
        let costs = CostSpec::new(objectives);

        let mut problems: Vec<String> = validate_system(&system).iter().map(|d| d.to_string()).collect();
        problems.extend(costs.validate(&system).iter().map(|d| d.to_string()));
        if initial.0 >= system.num_states() {
            problems.push("initial state out of range".into());
        }
        if let Some(c) = self.c_fail.filter(|c| !(c.is_finite() && *c > 0.0)) {
            problems.push(format!("c_fail must be positive, got {c}"));
        }
        if let Some(e) = self.epsilon.filter(|e| !(e.is_finite() && *e >= 0.0)) {
            problems.push(format!("epsilon must be nonnegative, got {e}"));
        }
        if !problems.is_empty() {
            return Err(Error::InvalidModel(problems.join("\n")));
        }

        let ap = match &self.ap {
            Some(ap) => ap.clone(),
            None => self
                .labels
                .values()
                .flatten()
                .cloned()
                .collect::<BTreeSet<_>>()
                .into_iter()
                .collect(),
        };
        let formula = match &self.formula {
            Some(text) => Some(parse_fltl(text, &ap).map_err(|e| match e {
                Error::Syntax { .. } | Error::UndeclaredProposition { .. } => {
                    Error::schema("/formula", e.to_string())
                }
                other => other,
            })?),
            None => None,
        };
        Ok(Model {
            system,
            costs,
            initial,
            ap,
            formula,
            grid,
            horizon: self.horizon,
            c_fail: self.c_fail.unwrap_or(DEFAULT_C_FAIL),
            epsilon: self.epsilon.map_or(Epsilon::Auto, Epsilon::Absolute),
        })
    }
}

/// A compiled scenario ready for the product construction and the solver.
#[derive(Debug, Clone)]
pub struct Model {
    pub system: System,
    pub costs: CostSpec,
    pub initial: StateId,
    pub ap: Vec<String>,
    pub formula: Option<Formula>,
    pub grid: Option<Grid>,
    pub horizon: Option<usize>,
    pub c_fail: f64,
    pub epsilon: Epsilon,
}

impl Model {
    /// Minimal automaton of the formula, or the one-state `true` automaton.
    pub fn automaton(&self) -> Result<Dfa> {
        match &self.formula {
            Some(f) => minimize_dfa(&to_dfa(f, &self.ap)?),
            None => Dfa::new(Vec::new(), 0, vec![vec![Some(0)]], vec![true], None),
        }
    }

    /// Without a formula the goal region is the base target set.
    pub fn target_rule(&self) -> TargetRule {
        match self.formula {
            Some(_) => TargetRule::Acceptance,
            None => TargetRule::AcceptanceAndBase,
        }
    }

    pub fn product(&self) -> Result<ProductSystem> {
        build_product(&self.system, &self.automaton()?, self.initial, self.target_rule())
    }

    /// Solver settings from the scenario; a horizon is required.
    pub fn solver_config(&self) -> Result<SolverConfig> {
        let h = self
            .horizon
            .ok_or_else(|| Error::schema("/horizon", "no planning horizon given"))?;
        Ok(SolverConfig::new(h, self.c_fail).with_epsilon(self.epsilon))
    }
}
