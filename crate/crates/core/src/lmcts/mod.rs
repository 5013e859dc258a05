//! Lookup Monte Carlo Tree Search.
//!
//! Time steps are solved backward. Each `(t, belief)` node grows a
//! depth-one tree of continuous actions under kernel-regression UCT, with
//! rollouts that follow the already solved later stages of the lookup
//! table over pre-simulated path pools.

mod expand;
mod kernel;
mod lookup;
mod pool;
mod search;
mod smoothing;

pub use expand::{expand, generate_candidates, DEFAULT_DEVIATIONS};
pub use kernel::{
    kr_density, kr_uct_scores, kr_uct_select, kr_value, rbf_kernel, ActionNode, KernelConfig, KernelTree, RewardRange,
};
pub use lookup::LookupTable;
pub use pool::{build_path_pool, BeliefPool, PathPool, PathView};
pub use search::{
    build_lookup, build_lookup_with_pool, myopic_seed, rollout, rollout_wealth, solve_node, FinalSelection, LmctsConfig,
    LmctsRun, NodeReport,
};
pub use smoothing::{savitzky_golay, smooth_lookup};
