//! No-trade-zone policies: a small network widens a band around a base
//! allocation, and the portfolio is only traded back to the band edge when
//! it drifts outside.

mod network;
mod tape;
mod train;
mod unroll;
mod zone;

pub use network::{heads, width_bias, Heads, NtzLayout, NtzParams, INITIAL_WIDTH};
pub use tape::{Tape, Var};
pub use train::{train, train_on, training_paths, EpochLog, TrainConfig, TrainReport, MAX_RESTARTS};
pub use unroll::{
    gradient, simulate_paths, unroll_loss, unroll_path, BasePolicy, PathStats, UnrollSpec, WEALTH_FEATURE_CAP,
};
pub use zone::{project_to_zone, project_vars, zone, zone_vars, Projection, ProjectionVars, Zone, ZoneVars};
