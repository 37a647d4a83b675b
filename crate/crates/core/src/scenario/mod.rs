//! Gridworld builders, scenario and solution files, trajectory reports.

mod archive;
mod experiments;
mod file;
mod grid;
mod report;

pub use archive::{
    read_archive, write_archive, ArchiveConfig, ArchiveDimensions, ArchiveMeta, LoadedSolution, FORMAT_VERSION,
};
pub use experiments::{
    bundled_layout, experiment_1, experiment_1_grid, experiment_2, experiment_2_grid, EXPERIMENT_2_FORMULA,
};
pub use file::{CostEntry, Model, ObjectiveEntry, ScenarioFile, TransitionEntry, DEFAULT_C_FAIL};
pub use grid::{build_grid_system, EnterCosts, Grid, GridLayout, GridScenario, Numbering, MOVES};
pub use report::{read_jsonl, render, write_jsonl, TrajectoryReport};
