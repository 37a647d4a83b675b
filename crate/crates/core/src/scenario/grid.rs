//! Gridworld topology and the slip transition model.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::mdp::{Aggregation, CostSpec, Objective, StateId, System, SystemBuilder};
use crate::{Error, Result};

/// Moves in action-index order.
pub const MOVES: [(&str, isize, isize); 4] = [("U", 0, -1), ("D", 0, 1), ("L", -1, 0), ("R", 1, 0)];

/// Order in which free cells receive their state index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Numbering {
    #[default]
    RowMajor,
    ColumnMajor,
}

/// Grid dimensions, obstacles and state naming as stored in scenario files.
///
/// Cells are `[x, y]` with `x` the column and `y` the row; row 0 is drawn
/// at the top and `U` decreases `y`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridLayout {
    pub width: usize,
    pub height: usize,
    #[serde(default)]
    pub blocked: BTreeSet<[usize; 2]>,
    #[serde(default)]
    pub numbering: Numbering,
    #[serde(default = "default_prefix")]
    pub prefix: String,
    /// Index given to the first free cell.
    #[serde(default)]
    pub first_index: usize,
    /// Explicit names for individual cells, keyed `"x,y"`.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub names: BTreeMap<String, String>,
}

fn default_prefix() -> String {
    "s".into()
}

impl GridLayout {
    pub fn new(width: usize, height: usize) -> Self {
        GridLayout {
            width,
            height,
            blocked: BTreeSet::new(),
            numbering: Numbering::RowMajor,
            prefix: default_prefix(),
            first_index: 0,
            names: BTreeMap::new(),
        }
    }
}

/// Resolved geometry: which state sits in which cell.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid {
    width: usize,
    height: usize,
    cells: Vec<Option<StateId>>,
    coords: Vec<(usize, usize)>,
    names: Vec<String>,
}

impl Grid {
    pub fn new(layout: &GridLayout) -> Result<Grid> {
        let (w, h) = (layout.width, layout.height);
        if w == 0 || h == 0 {
            return Err(Error::InvalidGrid(format!("dimensions {w}x{h} are empty")));
        }
        if let Some([x, y]) = layout.blocked.iter().find(|[x, y]| *x >= w || *y >= h) {
            return Err(Error::InvalidGrid(format!("blocked cell ({x}, {y}) lies outside {w}x{h}")));
        }
        let order: Vec<(usize, usize)> = match layout.numbering {
            Numbering::RowMajor => (0..h).flat_map(|y| (0..w).map(move |x| (x, y))).collect(),
            Numbering::ColumnMajor => (0..w).flat_map(|x| (0..h).map(move |y| (x, y))).collect(),
        };
        let mut overrides = BTreeMap::new();
        for (key, name) in &layout.names {
            let cell = parse_cell_key(key)
                .filter(|&(x, y)| x < w && y < h && !layout.blocked.contains(&[x, y]))
                .ok_or_else(|| Error::InvalidGrid(format!("name override `{key}` is not a free cell")))?;
            overrides.insert(cell, name.clone());
        }
        let mut cells = vec![None; w * h];
        let mut coords = Vec::new();
        let mut names = Vec::new();
        for (x, y) in order {
            if layout.blocked.contains(&[x, y]) {
                continue;
            }
            let id = StateId(coords.len());
            cells[y * w + x] = Some(id);
            names.push(
                overrides
                    .get(&(x, y))
                    .cloned()
                    .unwrap_or_else(|| format!("{}{}", layout.prefix, layout.first_index + id.0)),
            );
            coords.push((x, y));
        }
        if coords.is_empty() {
            return Err(Error::InvalidGrid("every cell is blocked".into()));
        }
        let distinct: BTreeSet<&String> = names.iter().collect();
        if distinct.len() != names.len() {
            return Err(Error::InvalidGrid("cell names are not unique".into()));
        }
        Ok(Grid {
            width: w,
            height: h,
            cells,
            coords,
            names,
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn num_states(&self) -> usize {
        self.coords.len()
    }

    pub fn state_at(&self, x: usize, y: usize) -> Option<StateId> {
        if x < self.width && y < self.height {
            self.cells[y * self.width + x]
        } else {
            None
        }
    }

    pub fn coords(&self, s: StateId) -> (usize, usize) {
        self.coords[s.0]
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Free neighbours of `s` in action order, paired with the action index.
    pub fn neighbors(&self, s: StateId) -> Vec<(usize, StateId)> {
        let (x, y) = self.coords[s.0];
        MOVES
            .iter()
            .enumerate()
            .filter_map(|(a, &(_, dx, dy))| {
                let nx = x.checked_add_signed(dx)?;
                let ny = y.checked_add_signed(dy)?;
                Some((a, self.state_at(nx, ny)?))
            })
            .collect()
    }

    /// Actions and slip transitions; no targets, labels or costs yet.
    pub fn builder(&self) -> Result<SystemBuilder> {
        let mut b = SystemBuilder::new(self.names.iter().cloned(), MOVES.iter().map(|m| m.0));
        for s in (0..self.num_states()).map(StateId) {
            let nbrs = self.neighbors(s);
            let success = match nbrs.len() {
                4 => 0.7,
                3 => 0.8,
                2 => 0.9,
                n => {
                    let (x, y) = self.coords(s);
                    return Err(Error::UnsupportedTopology { x, y, neighbors: n });
                }
            };
            for &(a, intended) in &nbrs {
                b.transition(s.0, a, intended.0, success);
                for &(_, other) in nbrs.iter().filter(|(_, o)| *o != intended) {
                    b.transition(s.0, a, other.0, 0.1);
                }
            }
        }
        Ok(b)
    }
}

fn parse_cell_key(key: &str) -> Option<(usize, usize)> {
    let (x, y) = key.split_once(',')?;
    Some((x.trim().parse().ok()?, y.trim().parse().ok()?))
}

/// Costs of entering each state: a default plus per-state exceptions.
#[derive(Debug, Clone, PartialEq)]
pub struct EnterCosts {
    pub aggregation: Aggregation,
    pub default_cost: f64,
    pub states: BTreeMap<String, f64>,
}

impl EnterCosts {
    pub fn uniform(aggregation: Aggregation, cost: f64) -> Self {
        EnterCosts {
            aggregation,
            default_cost: cost,
            states: BTreeMap::new(),
        }
    }

    pub fn with(mut self, state: &str, cost: f64) -> Self {
        self.states.insert(state.to_string(), cost);
        self
    }
}

/// A gridworld task: layout, start and goal, objectives in priority order
/// and proposition labels.
#[derive(Debug, Clone, PartialEq)]
pub struct GridScenario {
    pub layout: GridLayout,
    pub start: String,
    pub goal: String,
    pub objectives: Vec<EnterCosts>,
    pub labels: BTreeMap<String, Vec<String>>,
}

/// `c(s, a, s')` set to the cost of entering `s'` on every edge.
pub(crate) fn enter_cost_objective(
    sys: &System,
    aggregation: Aggregation,
    default_cost: f64,
    costs: &BTreeMap<StateId, f64>,
) -> Objective {
    let mut obj = Objective::uniform(aggregation, default_cost);
    for s in sys.states() {
        for choice in sys.choices(s) {
            for succ in &choice.successors {
                if let Some(&c) = costs.get(&succ.state) {
                    obj.overrides.insert((s, choice.action, succ.state), c);
                }
            }
        }
    }
    obj
}

/// Transition system, costs and geometry of a gridworld task.
pub fn build_grid_system(g: &GridScenario) -> Result<(System, CostSpec, Grid)> {
    let grid = Grid::new(&g.layout)?;
    let lookup = |name: &str| {
        grid.names
            .iter()
            .position(|n| n == name)
            .map(StateId)
            .ok_or_else(|| Error::UnknownStateName(name.to_string()))
    };
    let start = lookup(&g.start)?;
    let goal = lookup(&g.goal)?;
    if start == goal {
        return Err(Error::InvalidGrid("start and goal coincide".into()));
    }
    let mut b = grid.builder()?;
    b.target(goal.0);
    for (name, props) in &g.labels {
        let s = lookup(name)?;
        for p in props {
            b.label(s.0, p.clone());
        }
    }
    let sys = b.build();
    let mut objectives = Vec::new();
    for o in &g.objectives {
        let mut costs = BTreeMap::new();
        for (name, &c) in &o.states {
            costs.insert(lookup(name)?, c);
        }
        objectives.push(enter_cost_objective(&sys, o.aggregation, o.default_cost, &costs));
    }
    Ok((sys, CostSpec::new(objectives), grid))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::mdp::{validate_system, ActionId};
    use proptest::prelude::*;

    fn open(w: usize, h: usize) -> GridScenario {
        GridScenario {
            layout: GridLayout::new(w, h),
            start: "s0".into(),
            goal: format!("s{}", w * h - 1),
            objectives: vec![EnterCosts::uniform(Aggregation::Max, 1.0)],
            labels: BTreeMap::new(),
        }
    }

    #[test]
    fn interior_cell_slips_to_three_neighbors() {
        let (sys, _, grid) = build_grid_system(&open(3, 3)).unwrap();
        let centre = grid.state_at(1, 1).unwrap();
        let up = sys.choice(centre, ActionId(0)).unwrap();
        assert_eq!(up.successors.len(), 4);
        assert_eq!(up.prob_to(grid.state_at(1, 0).unwrap()), 0.7);
        for (x, y) in [(1, 2), (0, 1), (2, 1)] {
            assert_eq!(up.prob_to(grid.state_at(x, y).unwrap()), 0.1);
        }
        assert!((up.total_mass() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn corner_and_edge_cells() {
        let (sys, _, grid) = build_grid_system(&open(3, 3)).unwrap();
        let corner = grid.state_at(0, 0).unwrap();
        assert_eq!(sys.choices(corner).len(), 2);
        let right = sys.choice(corner, ActionId(3)).unwrap();
        assert_eq!(right.prob_to(grid.state_at(1, 0).unwrap()), 0.9);
        assert_eq!(right.prob_to(grid.state_at(0, 1).unwrap()), 0.1);
        assert!(sys.choice(corner, ActionId(0)).is_none());
        let edge = grid.state_at(1, 0).unwrap();
        let down = sys.choice(edge, ActionId(1)).unwrap();
        assert_eq!(down.prob_to(grid.state_at(1, 1).unwrap()), 0.8);
        assert_eq!(down.successors.len(), 3);
    }

    #[test]
    fn one_by_two_is_unsupported() {
        let mut g = open(2, 1);
        g.goal = "s1".into();
        assert!(matches!(
            build_grid_system(&g),
            Err(Error::UnsupportedTopology { neighbors: 1, .. })
        ));
    }

    #[test]
    fn blocked_cells_are_skipped_in_numbering() {
        let mut layout = GridLayout::new(3, 2);
        layout.blocked.insert([1, 0]);
        layout.numbering = Numbering::ColumnMajor;
        layout.first_index = 1;
        let grid = Grid::new(&layout).unwrap();
        assert_eq!(grid.names(), ["s1", "s2", "s3", "s4", "s5"]);
        assert_eq!(grid.state_at(1, 1), Some(StateId(2)));
        assert_eq!(grid.state_at(1, 0), None);
        layout.names.insert("2,1".into(), "exit".into());
        assert_eq!(Grid::new(&layout).unwrap().names()[4], "exit");
        layout.names.insert("1,0".into(), "wall".into());
        assert!(Grid::new(&layout).is_err());
    }

    #[test]
    fn costs_attach_to_the_entered_state() {
        let mut g = open(3, 3);
        g.objectives = vec![
            EnterCosts::uniform(Aggregation::Max, 20.0).with("s4", 90.0),
            EnterCosts::uniform(Aggregation::Sum, 1.0),
        ];
        let (sys, spec, _) = build_grid_system(&g).unwrap();
        let s1 = StateId(1);
        let down = ActionId(1);
        assert_eq!(spec.objectives[0].cost(s1, down, StateId(4)), 90.0);
        assert_eq!(spec.objectives[0].cost(s1, down, StateId(0)), 20.0);
        assert_eq!(spec.objectives[1].cost(s1, down, StateId(4)), 1.0);
        assert!(sys.is_target(StateId(8)));
    }

    #[test]
    fn start_equal_goal_rejected() {
        let mut g = open(2, 2);
        g.goal = "s0".into();
        assert!(matches!(build_grid_system(&g), Err(Error::InvalidGrid(_))));
        g.goal = "nowhere".into();
        assert!(matches!(build_grid_system(&g), Err(Error::UnknownStateName(_))));
    }

    /// Random layouts where every free cell keeps at least two free neighbours.
    pub(crate) fn arb_layout() -> impl Strategy<Value = GridLayout> {
        (2usize..=10, 2usize..=10, proptest::collection::vec((0usize..10, 0usize..10), 0..30)).prop_map(
            |(w, h, picks)| {
                let mut layout = GridLayout::new(w, h);
                for (x, y) in picks {
                    let (x, y) = (x % w, y % h);
                    layout.blocked.insert([x, y]);
                    let ok = Grid::new(&layout).is_ok_and(|g| {
                        g.num_states() >= 2 && (0..g.num_states()).all(|s| g.neighbors(StateId(s)).len() >= 2)
                    });
                    if !ok {
                        layout.blocked.remove(&[x, y]);
                    }
                }
                layout
            },
        )
    }

    proptest! {
        #[test]
        fn grid_systems_always_validate(layout in arb_layout(), costs in proptest::collection::vec(0.5f64..100.0, 4)) {
            let grid = Grid::new(&layout).unwrap();
            let names = grid.names();
            let g = GridScenario {
                start: names[0].clone(),
                goal: names[names.len() - 1].clone(),
                objectives: vec![
                    EnterCosts::uniform(Aggregation::Max, costs[0]).with(&names[1], costs[1]),
                    EnterCosts::uniform(Aggregation::Sum, costs[2]).with(&names[0], costs[3]),
                ],
                labels: BTreeMap::new(),
                layout,
            };
            let (sys, spec, _) = build_grid_system(&g).unwrap();
            prop_assert!(validate_system(&sys).is_empty());
            prop_assert!(spec.validate(&sys).is_empty());
        }
    }
}
