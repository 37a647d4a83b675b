use std::collections::HashMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{ActionId, Diagnostic, DiagnosticKind, StateId, System};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Aggregation {
    Sum,
    Max,
}

impl fmt::Display for Aggregation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Aggregation::Sum => "sum",
            Aggregation::Max => "max",
        })
    }
}

/// One cost objective: a default one-step cost plus per-edge overrides.
#[derive(Debug, Clone, PartialEq)]
pub struct Objective {
    pub aggregation: Aggregation,
    pub default_cost: f64,
    pub overrides: HashMap<(StateId, ActionId, StateId), f64>,
}

impl Objective {
    pub fn uniform(aggregation: Aggregation, cost: f64) -> Self {
        Objective {
            aggregation,
            default_cost: cost,
            overrides: HashMap::new(),
        }
    }

    pub fn with_cost(mut self, s: usize, a: usize, next: usize, cost: f64) -> Self {
        self.overrides
            .insert((StateId(s), ActionId(a), StateId(next)), cost);
        self
    }

    /// `c(s, a, s')`.
    pub fn cost(&self, s: StateId, a: ActionId, next: StateId) -> f64 {
        self.overrides
            .get(&(s, a, next))
            .copied()
            .unwrap_or(self.default_cost)
    }

    /// Costs laid out parallel to `sys`'s choices and successors.
    pub fn tabulate(&self, sys: &System) -> CostTable {
        CostTable {
            rows: sys
                .states()
                .map(|s| {
                    sys.choices(s)
                        .iter()
                        .map(|c| {
                            c.successors
                                .iter()
                                .map(|succ| self.cost(s, c.action, succ.state))
                                .collect()
                        })
                        .collect()
                })
                .collect(),
        }
    }
}

/// Edge costs indexed `[state][choice position][successor position]`.
#[derive(Debug, Clone)]
pub struct CostTable {
    rows: Vec<Vec<Vec<f64>>>,
}

impl CostTable {
    pub fn get(&self, s: StateId, choice: usize, succ: usize) -> f64 {
        self.rows[s.0][choice][succ]
    }

    pub fn choice(&self, s: StateId, choice: usize) -> &[f64] {
        &self.rows[s.0][choice]
    }

    /// Every cost value in the table, unsorted and with repeats.
    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        self.rows.iter().flatten().flatten().copied()
    }
}

/// Ordered objectives; index 0 has the highest priority.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CostSpec {
    pub objectives: Vec<Objective>,
}

impl CostSpec {
    pub fn new(objectives: Vec<Objective>) -> Self {
        CostSpec { objectives }
    }

    pub fn len(&self) -> usize {
        self.objectives.len()
    }

    pub fn is_empty(&self) -> bool {
        self.objectives.is_empty()
    }

    pub fn aggregations(&self) -> Vec<Aggregation> {
        self.objectives.iter().map(|o| o.aggregation).collect()
    }

    /// Indices of the max-aggregated objectives, in priority order.
    pub fn max_objectives(&self) -> Vec<usize> {
        self.objectives
            .iter()
            .enumerate()
            .filter(|(_, o)| o.aggregation == Aggregation::Max)
            .map(|(k, _)| k)
            .collect()
    }

    /// Every cost reachable through `sys`'s edges must be strictly positive.
    pub fn validate(&self, sys: &System) -> Vec<Diagnostic> {
        let mut out = Vec::new();
        for (k, obj) in self.objectives.iter().enumerate() {
            for s in sys.states() {
                for c in sys.choices(s) {
                    for succ in &c.successors {
                        let cost = obj.cost(s, c.action, succ.state);
                        if !(cost > 0.0 && cost.is_finite()) {
                            out.push(Diagnostic {
                                kind: DiagnosticKind::NonPositiveCost {
                                    objective: k,
                                    state: s,
                                    action: c.action,
                                    to: succ.state,
                                    cost,
                                },
                                message: format!(
                                    "objective {}: cost {} on ({}, {}) -> {} is not strictly positive",
                                    k + 1,
                                    cost,
                                    sys.state_name(s),
                                    sys.action_names().get(c.action.0).map_or("?", |n| n.as_str()),
                                    sys.state_names().get(succ.state.0).map_or("?", |n| n.as_str()),
                                ),
                            });
                        }
                    }
                }
            }
        }
        out
    }
}
