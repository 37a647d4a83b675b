//! Trajectory reports (JSON lines) and their ASCII rendering.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use super::file::from_json_text;
use super::grid::Grid;
use crate::lex::RunRecord;
use crate::mdp::{ActionId, CostSpec, StateId, System};
use crate::{Error, Result};

/// One simulated run by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrajectoryReport {
    pub seed: u64,
    pub states: Vec<String>,
    pub actions: Vec<String>,
    /// Automaton state after each visited state.
    pub automaton_states: Vec<usize>,
    /// Realized cost per objective.
    pub costs: Vec<f64>,
    /// Whether the run ended in the goal region.
    pub satisfied: bool,
}

impl TrajectoryReport {
    pub fn from_run(sys: &System, run: &RunRecord) -> Self {
        TrajectoryReport {
            seed: run.seed,
            states: run.states.iter().map(|&s| sys.state_name(s).to_string()).collect(),
            actions: run.actions.iter().map(|&a| sys.action_name(a).to_string()).collect(),
            automaton_states: run.automaton.clone(),
            costs: run.costs.clone(),
            satisfied: run.satisfied,
        }
    }

    fn check_lengths(&self) -> Result<()> {
        if self.states.is_empty()
            || self.actions.len() + 1 != self.states.len()
            || self.automaton_states.len() != self.states.len()
        {
            return Err(Error::InvalidModel(format!(
                "report with {} states, {} actions and {} automaton states is inconsistent",
                self.states.len(),
                self.actions.len(),
                self.automaton_states.len()
            )));
        }
        Ok(())
    }

    /// Resolve names against `sys`.
    pub fn resolve(&self, sys: &System) -> Result<(Vec<StateId>, Vec<ActionId>)> {
        self.check_lengths()?;
        let states = self
            .states
            .iter()
            .map(|n| sys.state_by_name(n).ok_or_else(|| Error::UnknownStateName(n.clone())))
            .collect::<Result<Vec<_>>>()?;
        let actions = self
            .actions
            .iter()
            .map(|n| {
                sys.action_by_name(n)
                    .ok_or_else(|| Error::InvalidModel(format!("unknown action `{n}`")))
            })
            .collect::<Result<Vec<_>>>()?;
        Ok((states, actions))
    }
}

pub fn write_jsonl(reports: &[TrajectoryReport], out: &mut impl std::io::Write) -> Result<()> {
    for r in reports {
        serde_json::to_writer(&mut *out, r)?;
        out.write_all(b"\n").map_err(serde_json::Error::io)?;
    }
    Ok(())
}

/// Parse JSON lines; blank lines are skipped. Errors point at `/<line>`.
pub fn read_jsonl(text: &str) -> Result<Vec<TrajectoryReport>> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            from_json_text(l).map_err(|e| match e {
                Error::Schema { pointer, message, .. } => Error::schema(format!("/{}{pointer}", i + 1), message),
                other => other,
            })
        })
        .collect()
}

/// ASCII grid with the visited cells in brackets, followed by one line per
/// step with the step costs and a final line with the realized totals.
pub fn render(grid: &Grid, sys: &System, spec: &CostSpec, report: &TrajectoryReport) -> Result<String> {
    let (states, actions) = report.resolve(sys)?;
    let mut visited = vec![false; grid.num_states()];
    for s in &states {
        if s.0 >= grid.num_states() {
            return Err(Error::UnknownState(s.0));
        }
        visited[s.0] = true;
    }
    let width = sys.max_state_name_len() + 2;
    let mut out = String::new();
    let rule = format!("+{}+\n", "-".repeat((width + 1) * grid.width() - 1));
    out.push_str(&rule);
    for y in 0..grid.height() {
        out.push('|');
        for x in 0..grid.width() {
            if x > 0 {
                out.push(' ');
            }
            let cell = match grid.state_at(x, y) {
                None => "#".repeat(width),
                Some(s) if visited[s.0] => format!("{:^width$}", format!("[{}]", sys.state_name(s))),
                Some(s) => format!("{:^width$}", sys.state_name(s)),
            };
            out.push_str(&cell);
        }
        out.push_str("|\n");
    }
    out.push_str(&rule);

    let tag = |k: usize| format!("{}{k}", spec.objectives[k].aggregation);
    for (t, &a) in actions.iter().enumerate() {
        let (s, next) = (states[t], states[t + 1]);
        let _ = write!(
            out,
            "{:>4}: {} -{}-> {}",
            t + 1,
            sys.state_name(s),
            sys.action_name(a),
            sys.state_name(next)
        );
        for (k, obj) in spec.objectives.iter().enumerate() {
            let _ = write!(out, "  {}={}", tag(k), obj.cost(s, a, next));
        }
        out.push('\n');
    }
    let _ = write!(out, "seed {}  steps {}", report.seed, actions.len());
    for (k, c) in report.costs.iter().enumerate().take(spec.len()) {
        let _ = write!(out, "  {}={c}", tag(k));
    }
    let _ = writeln!(out, "  satisfied={}", report.satisfied);
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mdp::Aggregation;
    use crate::scenario::grid::{EnterCosts, GridLayout, GridScenario};
    use crate::scenario::build_grid_system;
    use proptest::prelude::*;
    use std::collections::BTreeMap;

    fn three_by_three() -> (System, CostSpec, Grid) {
        build_grid_system(&GridScenario {
            layout: GridLayout::new(3, 3),
            start: "s0".into(),
            goal: "s8".into(),
            objectives: vec![
                EnterCosts::uniform(Aggregation::Max, 2.0).with("s4", 5.0),
                EnterCosts::uniform(Aggregation::Sum, 1.0),
            ],
            labels: BTreeMap::new(),
        })
        .unwrap()
    }

    fn report(states: &[&str], actions: &[&str]) -> TrajectoryReport {
        TrajectoryReport {
            seed: 7,
            states: states.iter().map(|s| s.to_string()).collect(),
            actions: actions.iter().map(|s| s.to_string()).collect(),
            automaton_states: vec![0; states.len()],
            costs: vec![5.0, 3.0],
            satisfied: true,
        }
    }

    #[test]
    fn three_steps_mark_four_cells() {
        let (sys, spec, grid) = three_by_three();
        let r = report(&["s0", "s1", "s4", "s5"], &["R", "D", "R"]);
        let text = render(&grid, &sys, &spec, &r).unwrap();
        assert_eq!(text.matches('[').count(), 4, "{text}");
        assert!(text.contains("   2: s1 -D-> s4  max0=5  sum1=1"), "{text}");
        assert!(text.ends_with("seed 7  steps 3  max0=5  sum1=3  satisfied=true\n"), "{text}");
    }

    #[test]
    fn inconsistent_reports_are_errors() {
        let (sys, spec, grid) = three_by_three();
        assert!(render(&grid, &sys, &spec, &report(&["s0", "s1"], &[])).is_err());
        assert!(render(&grid, &sys, &spec, &report(&["s0", "zz"], &["R"])).is_err());
        assert!(render(&grid, &sys, &spec, &report(&["s0", "s1"], &["X"])).is_err());
    }

    #[test]
    fn jsonl_round_trip() {
        let rs = vec![report(&["s0", "s1"], &["R"]), report(&["s0"], &[])];
        let mut buf = Vec::new();
        write_jsonl(&rs, &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 2);
        assert_eq!(read_jsonl(&text).unwrap(), rs);
        match read_jsonl(&format!("{text}{{\"seed\": \"x\"}}\n")) {
            Err(Error::Schema { pointer, .. }) => assert_eq!(pointer, "/3/seed"),
            other => panic!("{other:?}"),
        }
    }

    proptest! {
        #[test]
        fn render_never_panics(layout in crate::scenario::grid::tests::arb_layout(), walk in proptest::collection::vec(0usize..4, 0..40)) {
            let grid = Grid::new(&layout).unwrap();
            let names = grid.names().to_vec();
            let (sys, spec, grid) = build_grid_system(&GridScenario {
                start: names[0].clone(),
                goal: names[1].clone(),
                objectives: vec![EnterCosts::uniform(Aggregation::Max, 1.0)],
                labels: BTreeMap::new(),
                layout,
            }).unwrap();
            // Random walk along admissible moves.
            let mut s = StateId(0);
            let mut states = vec![sys.state_name(s).to_string()];
            let mut actions = Vec::new();
            for pick in walk {
                let nbrs = grid.neighbors(s);
                let (a, next) = nbrs[pick % nbrs.len()];
                actions.push(sys.action_name(ActionId(a)).to_string());
                states.push(sys.state_name(next).to_string());
                s = next;
            }
            let r = TrajectoryReport {
                seed: 0,
                automaton_states: vec![0; states.len()],
                states,
                actions,
                costs: vec![1.0],
                satisfied: false,
            };
            let text = render(&grid, &sys, &spec, &r).unwrap();
            prop_assert_eq!(text.lines().count(), grid.height() + 2 + r.actions.len() + 1);
        }
    }
}
