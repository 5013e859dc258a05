//! Belief-grid dynamic program for the zero-cost problem, including the
//! shorting-penalty ("adjusted") variant.

mod scenario;
pub mod search;
mod solver;

pub use scenario::{evaluate_action, GridValues, Homogeneity, Scenario, ScenarioSet, StageObjective};
pub use search::SearchOptions;
pub use solver::{default_penalty, myopic_policy, scenario_set, DpOptions, DpSolver, PolicyTable, StageSolution};
