//! Market dynamics, belief filtering, wealth accounting and utilities
//! shared by every solver.

mod allocation;
mod belief;
mod model;
mod utility;
mod wealth;

pub use allocation::{Allocation, Constraints, BOX_TOL, BUDGET_TOL};
pub use belief::{advance_belief, degenerate_update_count, predict_belief, update_belief, Belief};
pub use model::{RegimeModel, PSD_REPAIR_TOL};
pub use utility::{Utility, DEFAULT_STEEPNESS};
pub use wealth::{gross_return, grow, rebalance, rebalanced_wealth, Growth};

pub(crate) use model::categorical;

/// Fraction of initial wealth at which a bankrupt path is floored.
pub const BANKRUPTCY_FLOOR: f64 = 1e-6;

/// Full simulation state of one path. `regime` is the true regime and is
/// never shown to policies.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketState {
    pub t: usize,
    pub regime: usize,
    pub belief: Belief,
    pub wealth: f64,
    /// Post-drift weights at the end of the previous period.
    pub alloc: Allocation,
}
