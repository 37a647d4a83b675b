//! The two bundled gridworld experiments.
//!
//! Both share a 7x7 layout whose middle column is a wall with two
//! openings: `s22` (expensive, cost 90) and `s23` (cost 30). Every other
//! state costs 20 to enter. The layout lives in `data/gridworld.json` so
//! that it can be edited without touching code.

use std::collections::BTreeMap;

use super::file::{ObjectiveEntry, ScenarioFile};
use super::grid::{EnterCosts, GridLayout, GridScenario};
use crate::mdp::Aggregation;

const LAYOUT: &str = include_str!("../../data/gridworld.json");

pub const EXPERIMENT_2_FORMULA: &str = "F(s27 | s34) & G((s27 | s34) -> F s37) & G(s37 -> F s42) & G !s32";

/// The bundled 7x7 layout.
pub fn bundled_layout() -> GridLayout {
    serde_json::from_str(LAYOUT).expect("bundled layout is valid JSON")
}

fn gateway_costs() -> EnterCosts {
    EnterCosts::uniform(Aggregation::Max, 20.0)
        .with("s22", 90.0)
        .with("s23", 30.0)
}

impl GridScenario {
    /// Scenario file with the grid kept in layout form.
    pub fn to_file(&self) -> ScenarioFile {
        ScenarioFile {
            grid: Some(self.layout.clone()),
            initial: Some(self.start.clone()),
            targets: vec![self.goal.clone()],
            labels: self.labels.clone(),
            objectives: self
                .objectives
                .iter()
                .map(|o| ObjectiveEntry {
                    aggregation: o.aggregation,
                    default_cost: o.default_cost,
                    costs: Vec::new(),
                    enter_costs: o.states.clone(),
                })
                .collect(),
            ..Default::default()
        }
    }
}

pub fn experiment_1_grid() -> GridScenario {
    GridScenario {
        layout: bundled_layout(),
        start: "s8".into(),
        goal: "s41".into(),
        objectives: vec![gateway_costs()],
        labels: BTreeMap::new(),
    }
}

/// Reach `s41` from `s8` minimizing the worst gateway cost; `H = 200`.
pub fn experiment_1() -> ScenarioFile {
    ScenarioFile {
        horizon: Some(200),
        c_fail: Some(1e6),
        ..experiment_1_grid().to_file()
    }
}

pub fn experiment_2_grid() -> GridScenario {
    let labels = ["s27", "s34", "s37", "s42", "s32"]
        .iter()
        .map(|s| (s.to_string(), vec![s.to_string()]))
        .collect();
    GridScenario {
        layout: bundled_layout(),
        start: "s10".into(),
        goal: "s42".into(),
        objectives: vec![gateway_costs(), EnterCosts::uniform(Aggregation::Sum, 1.0)],
        labels,
    }
}

/// Waypoint task under the temporal constraint, max cost first and path
/// length second; `H = 2000`.
pub fn experiment_2() -> ScenarioFile {
    ScenarioFile {
        formula: Some(EXPERIMENT_2_FORMULA.into()),
        horizon: Some(2000),
        c_fail: Some(1e6),
        ..experiment_2_grid().to_file()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::{validate_system, StateId};
    use crate::scenario::{build_grid_system, Grid};

    #[test]
    fn layout_matches_the_reconstruction() {
        let grid = Grid::new(&bundled_layout()).unwrap();
        assert_eq!(grid.num_states(), 44);
        let at = |x, y| grid.names()[grid.state_at(x, y).unwrap().0].clone();
        assert_eq!(at(0, 0), "s1");
        assert_eq!(at(1, 0), "s8");
        assert_eq!(at(3, 1), "s22");
        assert_eq!(at(3, 5), "s23");
        assert_eq!(at(6, 6), "s44");
        // Adjacencies seen in the published trajectories.
        for (a, b) in [("s8", "s1"), ("s3", "s10"), ("s13", "s20"), ("s20", "s23"), ("s23", "s29"), ("s29", "s28"), ("s27", "s26"), ("s30", "s37"), ("s37", "s44"), ("s43", "s42")] {
            let id = |n: &str| StateId(grid.names().iter().position(|x| x == n).unwrap());
            assert!(
                grid.neighbors(id(a)).iter().any(|(_, s)| *s == id(b)),
                "{a} and {b} should be adjacent"
            );
        }
    }

    #[test]
    fn bundled_scenarios_validate() {
        for file in [experiment_1(), experiment_2()] {
            let m = file.compile().unwrap();
            assert!(validate_system(&m.system).is_empty());
            assert!(m.costs.validate(&m.system).is_empty());
        }
        let (sys, spec, _) = build_grid_system(&experiment_2_grid()).unwrap();
        assert_eq!(spec.len(), 2);
        assert_eq!(sys.labels(sys.state_by_name("s32").unwrap()), ["s32"]);
    }

    #[test]
    fn experiment_files_round_trip() {
        for file in [experiment_1(), experiment_2()] {
            let text = file.to_canonical_json().unwrap();
            let back = ScenarioFile::from_json_str(&text).unwrap();
            assert_eq!(back, file);
            assert_eq!(back.to_canonical_json().unwrap(), text);
        }
    }

    #[test]
    fn experiment_2_automaton_shape() {
        let m = experiment_2().compile().unwrap();
        let dfa = m.automaton().unwrap();
        assert_eq!(dfa.num_states(), 5);
        assert!(dfa.sink().is_some());
        assert_eq!(m.ap, ["s27", "s32", "s34", "s37", "s42"]);
    }
}
