use rand::Rng as _;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::grid::BeliefGrid;
use crate::market::{advance_belief, categorical, Belief, RegimeModel};
use crate::rng::{self, Domain};

/// Pre-simulated paths starting from one grid belief.
///
/// Per path and step the pool stores the realized returns, the true regime
/// that produced them, and the grid point nearest to the filtered belief
/// after observing them. Beliefs never depend on the actions taken, so the
/// filter runs once here instead of inside every rollout.
#[derive(Debug, Clone, PartialEq)]
pub struct BeliefPool {
    pub(crate) returns: Vec<f64>,
    pub(crate) regimes: Vec<u16>,
    pub(crate) next_belief: Vec<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PathPool {
    horizon: usize,
    n_risky: usize,
    paths: usize,
    rf: Vec<f64>,
    pools: Vec<BeliefPool>,
}

/// Borrowed view of one pool path.
#[derive(Debug, Clone, Copy)]
pub struct PathView<'a> {
    n_risky: usize,
    returns: &'a [f64],
    regimes: &'a [u16],
    next_belief: &'a [u32],
    rf: &'a [f64],
}

impl<'a> PathView<'a> {
    pub fn len(&self) -> usize {
        self.regimes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regimes.is_empty()
    }

    pub fn returns(&self, step: usize) -> &'a [f64] {
        &self.returns[step * self.n_risky..(step + 1) * self.n_risky]
    }

    pub fn regime(&self, step: usize) -> usize {
        self.regimes[step] as usize
    }

    pub fn rf(&self, step: usize) -> f64 {
        self.rf[self.regimes[step] as usize]
    }

    /// Grid index of the belief held after observing step `step`.
    pub fn next_belief(&self, step: usize) -> usize {
        self.next_belief[step] as usize
    }
}

impl PathPool {
    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn n_risky(&self) -> usize {
        self.n_risky
    }

    pub fn paths_per_belief(&self) -> usize {
        self.paths
    }

    pub fn n_beliefs(&self) -> usize {
        self.pools.len()
    }

    pub fn rf(&self) -> &[f64] {
        &self.rf
    }

    pub fn path(&self, belief: usize, p: usize) -> PathView<'_> {
        let pool = &self.pools[belief];
        let (t, n) = (self.horizon, self.n_risky);
        PathView {
            n_risky: n,
            returns: &pool.returns[p * t * n..(p + 1) * t * n],
            regimes: &pool.regimes[p * t..(p + 1) * t],
            next_belief: &pool.next_belief[p * t..(p + 1) * t],
            rf: &self.rf,
        }
    }

    /// Assembles a pool from raw columns, as read back from disk.
    pub(crate) fn from_parts(horizon: usize, n_risky: usize, paths: usize, rf: Vec<f64>, pools: Vec<BeliefPool>) -> Self {
        PathPool { horizon, n_risky, paths, rf, pools }
    }
}

/// Simulates `paths_per_belief` paths of length `horizon` from every grid
/// belief. The initial regime is drawn from the belief, then the chain and
/// the returns run forward. With `antithetic`, consecutive paths share
/// their regime draws and use negated normals.
pub fn build_path_pool(
    model: &RegimeModel,
    grid: &BeliefGrid,
    paths_per_belief: usize,
    horizon: usize,
    antithetic: bool,
    seed: u64,
) -> PathPool {
    let pools = (0..grid.len())
        .into_par_iter()
        .map(|b| {
            let mut rng = rng::stream(seed, Domain::PathPool, b as u64);
            simulate_pool(model, grid, grid.point(b), paths_per_belief, horizon, antithetic, &mut rng)
        })
        .collect();
    PathPool {
        horizon,
        n_risky: model.n_risky(),
        paths: paths_per_belief,
        rf: (0..model.n_regimes()).map(|k| model.rf(k)).collect(),
        pools,
    }
}

fn simulate_pool(
    model: &RegimeModel,
    grid: &BeliefGrid,
    start: &Belief,
    paths: usize,
    horizon: usize,
    antithetic: bool,
    rng: &mut rng::Rng,
) -> BeliefPool {
    let n = model.n_risky();
    let mut pool = BeliefPool {
        returns: Vec::with_capacity(paths * horizon * n),
        regimes: Vec::with_capacity(paths * horizon),
        next_belief: Vec::with_capacity(paths * horizon),
    };
    let mut z = vec![0.0; horizon * n];
    let mut u = vec![0.0; horizon + 1];
    let mut r = vec![0.0; n];
    for p in 0..paths {
        if !antithetic || p % 2 == 0 {
            u[0] = rng.random::<f64>();
            for s in 0..horizon {
                for zi in &mut z[s * n..(s + 1) * n] {
                    *zi = rng.sample(StandardNormal);
                }
                u[s + 1] = rng.random::<f64>();
            }
        } else {
            z.iter_mut().for_each(|x| *x = -*x);
        }
        let mut regime = categorical(start.probs(), u[0]);
        let mut belief = start.clone();
        for s in 0..horizon {
            model.returns_from_normals(regime, &z[s * n..(s + 1) * n], &mut r);
            pool.returns.extend_from_slice(&r);
            pool.regimes.push(regime as u16);
            belief = advance_belief(model, &belief, &r);
            pool.next_belief.push(grid.nearest(belief.probs()) as u32);
            regime = model.next_regime_from_uniform(regime, u[s + 1]);
        }
    }
    pool
}

#[cfg(test)]
mod tests {
    use super::*;

    fn two_regime() -> RegimeModel {
        RegimeModel::new(
            vec![vec![0.01], vec![-0.02]],
            vec![vec![vec![0.002]], vec![vec![0.006]]],
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![0.001],
        )
        .unwrap()
    }

    #[test]
    fn empty_pool() {
        let grid = BeliefGrid::new(2, 0.5).unwrap();
        let pool = build_path_pool(&two_regime(), &grid, 0, 3, false, 1);
        assert_eq!(pool.paths_per_belief(), 0);
        assert!(pool.pools.iter().all(|p| p.regimes.is_empty()));
    }

    #[test]
    fn absorbing_point_belief_stays_put() {
        let model = RegimeModel::new(
            vec![vec![0.01], vec![-0.02]],
            vec![vec![vec![0.002]], vec![vec![0.006]]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0],
        )
        .unwrap();
        let grid = BeliefGrid::new(2, 0.5).unwrap();
        let b = grid.index_of(&[1.0, 0.0]).unwrap();
        let pool = build_path_pool(&model, &grid, 50, 5, false, 2);
        for p in 0..50 {
            let path = pool.path(b, p);
            assert!((0..5).all(|s| path.regime(s) == 0));
            assert!((0..5).all(|s| path.next_belief(s) == b));
        }
    }

    #[test]
    fn initial_regime_frequency_matches_belief() {
        let grid = BeliefGrid::new(2, 0.05).unwrap();
        let b = grid.index_of(&[0.3, 0.7]).unwrap();
        let paths = 20_000;
        let pool = build_path_pool(&two_regime(), &grid, paths, 1, false, 3);
        let hits = (0..paths).filter(|p| pool.path(b, *p).regime(0) == 0).count() as f64;
        let sd = (paths as f64 * 0.3 * 0.7).sqrt();
        assert!((hits - 0.3 * paths as f64).abs() < 3.0 * sd, "{hits}");
    }

    #[test]
    fn antithetic_pairs_mirror() {
        let model = two_regime();
        let grid = BeliefGrid::new(2, 0.5).unwrap();
        let pool = build_path_pool(&model, &grid, 4, 3, true, 4);
        for b in 0..grid.len() {
            let (a, c) = (pool.path(b, 0), pool.path(b, 1));
            for s in 0..3 {
                assert_eq!(a.regime(s), c.regime(s));
                let m = model.mu(a.regime(s))[0];
                assert!((a.returns(s)[0] - m + (c.returns(s)[0] - m)).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn reproducible() {
        let grid = BeliefGrid::new(2, 0.25).unwrap();
        let a = build_path_pool(&two_regime(), &grid, 10, 4, false, 9);
        let b = build_path_pool(&two_regime(), &grid, 10, 4, false, 9);
        assert_eq!(a, b);
    }
}
