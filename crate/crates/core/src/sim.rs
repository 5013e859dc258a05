//! Forward simulation of market paths with the investor's filtered beliefs.

use rand::Rng as _;

use crate::market::{advance_belief, categorical, Belief, RegimeModel};
use crate::rng::{self, Domain};

/// One simulated path. `beliefs[s]` is the belief held when deciding the
/// allocation for step `s`, before `returns(s)` is observed.
#[derive(Debug, Clone, PartialEq)]
pub struct SimPath {
    n_risky: usize,
    returns: Vec<f64>,
    pub regimes: Vec<usize>,
    pub rf: Vec<f64>,
    pub beliefs: Vec<Belief>,
}

impl SimPath {
    /// Path from explicit data. `returns` is step-major, `n_risky` per step.
    pub fn from_parts(n_risky: usize, returns: Vec<f64>, regimes: Vec<usize>, rf: Vec<f64>, beliefs: Vec<Belief>) -> Self {
        let t = regimes.len();
        assert!(returns.len() == t * n_risky && rf.len() == t && beliefs.len() == t, "inconsistent path lengths");
        SimPath { n_risky, returns, regimes, rf, beliefs }
    }

    pub fn horizon(&self) -> usize {
        self.regimes.len()
    }

    pub fn returns(&self, s: usize) -> &[f64] {
        &self.returns[s * self.n_risky..(s + 1) * self.n_risky]
    }
}

pub fn simulate_path(model: &RegimeModel, start: &Belief, horizon: usize, rng: &mut rng::Rng) -> SimPath {
    let n = model.n_risky();
    let mut path = SimPath {
        n_risky: n,
        returns: Vec::with_capacity(horizon * n),
        regimes: Vec::with_capacity(horizon),
        rf: Vec::with_capacity(horizon),
        beliefs: Vec::with_capacity(horizon),
    };
    let mut regime = categorical(start.probs(), rng.random::<f64>());
    let mut belief = start.clone();
    for _ in 0..horizon {
        let (r, next) = model.sample_step(regime, rng);
        path.beliefs.push(belief.clone());
        path.regimes.push(regime);
        path.rf.push(model.rf(regime));
        belief = advance_belief(model, &belief, &r);
        path.returns.extend_from_slice(&r);
        regime = next;
    }
    path
}

/// Path `index` of a domain: each path has its own stream, so any subset of
/// paths can be regenerated independently and in parallel.
pub fn path_from_stream(
    model: &RegimeModel,
    start: &Belief,
    horizon: usize,
    seed: u64,
    domain: Domain,
    index: u64,
) -> SimPath {
    let mut r = rng::stream(seed, domain, index);
    simulate_path(model, start, horizon, &mut r)
}
