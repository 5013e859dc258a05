use rayon::prelude::*;

use super::expand::{expand, DEFAULT_DEVIATIONS};
use super::kernel::{argmax_first, KernelConfig, KernelTree};
use super::lookup::LookupTable;
use super::pool::{build_path_pool, PathPool};
use crate::dp::search::{maximize, SearchOptions};
use crate::error::{Error, Result};
use crate::grid::BeliefGrid;
use crate::market::{gross_return, Allocation, Constraints, RegimeModel, Utility, BANKRUPTCY_FLOOR};

/// Rule for the action a finished search reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinalSelection {
    /// Child with the most visits.
    MostVisited,
    /// Child with the highest kernel-regression value.
    BestKernelValue,
    /// Child with the highest mean reward over every path the node used.
    PoolMean,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmctsConfig {
    pub kernel: KernelConfig,
    /// Search iterations per `(t, belief)` node.
    pub iterations: usize,
    /// Pool paths averaged in one rollout reward.
    pub batch: usize,
    pub deviations: Vec<f64>,
    pub final_selection: FinalSelection,
    /// Report each reward relative to the seed action on the same batch.
    pub control_variate: bool,
    pub pool_paths: usize,
    pub antithetic_pool: bool,
    pub initial_wealth: f64,
    /// Optimizer for the seed action of the last stage.
    pub seed_search: SearchOptions,
    pub seed: u64,
}

impl Default for LmctsConfig {
    fn default() -> Self {
        LmctsConfig {
            kernel: KernelConfig::default(),
            iterations: 10_000,
            batch: 5,
            deviations: DEFAULT_DEVIATIONS.to_vec(),
            final_selection: FinalSelection::PoolMean,
            control_variate: true,
            pool_paths: 50_000,
            antithetic_pool: true,
            initial_wealth: 1.0,
            seed_search: SearchOptions::default(),
            seed: 0,
        }
    }
}

impl LmctsConfig {
    pub fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if self.iterations == 0 {
            return Err(Error::invalid("lmcts.iterations", "must be positive"));
        }
        if self.batch == 0 {
            return Err(Error::invalid("lmcts.batch", "must be positive"));
        }
        if self.deviations.is_empty() || self.deviations.iter().any(|d| !(*d > 0.0)) {
            return Err(Error::invalid("lmcts.deviations", "must be a nonempty list of positive fractions"));
        }
        if self.pool_paths == 0 {
            return Err(Error::invalid("lmcts.pool_paths", "must be positive"));
        }
        if !(self.initial_wealth > 0.0) {
            return Err(Error::invalid("lmcts.initial_wealth", "must be positive"));
        }
        Ok(())
    }

    /// Pool paths consumed by one node search.
    pub fn paths_used(&self, pool_paths: usize) -> usize {
        pool_paths.min(self.iterations.saturating_mul(self.batch)).max(1)
    }
}

/// Terminal wealth of one pool path: `action` is held over the first step,
/// then the lookup allocation at the snapped belief over every later step.
/// Wealth starts at `wealth0`; a non-positive gross return floors wealth at
/// `BANKRUPTCY_FLOOR * wealth0` and ends the path.
pub fn rollout_wealth(
    t: usize,
    belief: usize,
    path: usize,
    action: &Allocation,
    lookup: &LookupTable,
    pool: &PathPool,
    wealth0: f64,
) -> Result<f64> {
    let horizon = lookup.horizon();
    let p = pool.path(belief, path);
    let floor = BANKRUPTCY_FLOOR * wealth0;
    let mut wealth = wealth0;
    let mut weights = action.weights();
    for s in 0..horizon - t {
        let g = gross_return(weights, p.returns(s), p.rf(s));
        if g <= 0.0 {
            return Ok(floor);
        }
        wealth *= g;
        if t + s + 1 < horizon {
            weights = lookup.get(t + s + 1, p.next_belief(s))?.weights();
        }
    }
    Ok(wealth)
}

/// Mean terminal utility over pool paths `first..first + count` (cycling
/// through the pool).
pub fn rollout(
    t: usize,
    belief: usize,
    action: &Allocation,
    lookup: &LookupTable,
    pool: &PathPool,
    utility: &Utility,
    wealth0: f64,
    first: usize,
    count: usize,
) -> Result<f64> {
    let mut total = 0.0;
    for k in 0..count {
        let path = (first + k) % pool.paths_per_belief();
        total += utility.value(rollout_wealth(t, belief, path, action, lookup, pool, wealth0)?);
    }
    Ok(total / count as f64)
}

/// Rollouts at one node share everything after the first step: beliefs do
/// not depend on actions, and without transaction costs the continuation
/// multiplies wealth by a path-specific factor. The context caches that
/// factor (zero marks a bankrupt continuation) and the first-step returns.
struct NodeContext<'a> {
    pool: &'a PathPool,
    belief: usize,
    utility: &'a Utility,
    wealth0: f64,
    continuation: Vec<f64>,
}

impl<'a> NodeContext<'a> {
    fn new(
        t: usize,
        belief: usize,
        lookup: &LookupTable,
        pool: &'a PathPool,
        utility: &'a Utility,
        wealth0: f64,
        paths: usize,
    ) -> Result<Self> {
        let horizon = lookup.horizon();
        let mut continuation = Vec::with_capacity(paths);
        for path in 0..paths {
            let p = pool.path(belief, path);
            let mut growth = 1.0;
            for s in 1..horizon - t {
                let w = lookup.get(t + s, p.next_belief(s - 1))?.weights();
                let g = gross_return(w, p.returns(s), p.rf(s));
                if g <= 0.0 {
                    growth = 0.0;
                    break;
                }
                growth *= g;
            }
            continuation.push(growth);
        }
        Ok(NodeContext { pool, belief, utility, wealth0, continuation })
    }

    fn paths(&self) -> usize {
        self.continuation.len()
    }

    fn utility_on(&self, weights: &[f64], path: usize) -> f64 {
        let p = self.pool.path(self.belief, path);
        let g = gross_return(weights, p.returns(0), p.rf(0));
        let c = self.continuation[path];
        let w = if g <= 0.0 || c == 0.0 {
            BANKRUPTCY_FLOOR * self.wealth0
        } else {
            self.wealth0 * g * c
        };
        self.utility.value(w)
    }

    fn batch_mean(&self, weights: &[f64], batch: usize, size: usize) -> f64 {
        let first = batch * size;
        (0..size)
            .map(|k| self.utility_on(weights, (first + k) % self.paths()))
            .sum::<f64>()
            / size as f64
    }

    fn mean(&self, weights: &[f64]) -> f64 {
        (0..self.paths()).map(|p| self.utility_on(weights, p)).sum::<f64>() / self.paths() as f64
    }
}

/// Diagnostics of one node search.
#[derive(Debug, Clone, PartialEq)]
pub struct NodeReport {
    pub action: Allocation,
    pub children: usize,
    pub visits: u64,
    /// Mean utility of the chosen action over the node's paths.
    pub value: f64,
}

/// Depth-one KR-UCT search at `(t, belief)`. `seed` is the first child.
pub fn solve_node(
    t: usize,
    belief: usize,
    seed: &Allocation,
    lookup: &LookupTable,
    pool: &PathPool,
    utility: &Utility,
    constraints: &Constraints,
    cfg: &LmctsConfig,
) -> Result<NodeReport> {
    if pool.paths_per_belief() == 0 {
        return Err(Error::Solver {
            method: "lmcts".into(),
            stage: format!("t={t}"),
            reason: "path pool is empty".into(),
        });
    }
    let paths = cfg.paths_used(pool.paths_per_belief());
    let ctx = NodeContext::new(t, belief, lookup, pool, utility, cfg.initial_wealth, paths)?;
    let batch = cfg.batch.min(paths);
    let n_batches = paths.div_ceil(batch);
    let mut baseline: Vec<Option<f64>> = vec![None; if cfg.control_variate { n_batches } else { 0 }];

    let mut tree = KernelTree::new(cfg.kernel.bandwidth);
    for it in 0..cfg.iterations {
        let mut chosen = None;
        if tree.len() < cfg.kernel.allowed_children(it as u64) {
            let action = if tree.is_empty() {
                Some(seed.clone())
            } else {
                expand(&tree, tree.best(), &cfg.deviations, &cfg.kernel, constraints)
            };
            if let Some(a) = action {
                chosen = Some(tree.push(a));
            }
        }
        let i = chosen.unwrap_or_else(|| tree.select(&cfg.kernel));
        let b = it % n_batches;
        let mut reward = ctx.batch_mean(tree.children()[i].action.weights(), b, batch);
        if cfg.control_variate {
            let base = *baseline[b].get_or_insert_with(|| ctx.batch_mean(seed.weights(), b, batch));
            reward -= base;
        }
        tree.record(i, reward);
    }

    let pick = match cfg.final_selection {
        FinalSelection::MostVisited => tree.most_visited(),
        FinalSelection::BestKernelValue => tree.best(),
        FinalSelection::PoolMean => {
            let means: Vec<f64> = tree.children().iter().map(|c| ctx.mean(c.action.weights())).collect();
            argmax_first(&means)
        }
    };
    let action = tree.children()[pick].action.clone();
    Ok(NodeReport {
        value: ctx.mean(action.weights()),
        children: tree.len(),
        visits: tree.total_visits(),
        action,
    })
}

/// One-period optimum over the first step of the node's pool paths.
pub fn myopic_seed(
    belief: usize,
    pool: &PathPool,
    utility: &Utility,
    constraints: &Constraints,
    cfg: &LmctsConfig,
) -> Result<Allocation> {
    let paths = cfg.paths_used(pool.paths_per_belief());
    let lookup = LookupTable::new(1, BeliefGrid::with_divisions(1, 1));
    let ctx = NodeContext::new(0, belief, &lookup, pool, utility, cfg.initial_wealth, paths)?;
    let r = maximize(pool.n_risky() + 1, constraints, &cfg.seed_search, &[], |w| ctx.mean(w));
    Ok(Allocation::from_vec_unchecked(r.weights))
}

#[derive(Debug, Clone, PartialEq)]
pub struct LmctsRun {
    pub lookup: LookupTable,
    /// `reports[t][b]`.
    pub reports: Vec<Vec<NodeReport>>,
}

/// Solves every node backward from the last stage, filling the lookup one
/// stage at a time. The last stage is seeded with the myopic optimum; every
/// earlier node with the next stage's answer at the same belief.
pub fn build_lookup_with_pool(
    pool: &PathPool,
    horizon: usize,
    grid: &BeliefGrid,
    utility: &Utility,
    constraints: &Constraints,
    cfg: &LmctsConfig,
) -> Result<LmctsRun> {
    cfg.validate()?;
    utility.validate()?;
    constraints.validate()?;
    if horizon == 0 {
        return Err(Error::invalid("horizon", "must be at least 1"));
    }
    if pool.horizon() < horizon || pool.n_beliefs() != grid.len() {
        return Err(Error::invalid(
            "pool",
            format!(
                "pool covers {} steps over {} beliefs, need {horizon} steps over {}",
                pool.horizon(),
                pool.n_beliefs(),
                grid.len()
            ),
        ));
    }
    let mut lookup = LookupTable::new(horizon, grid.clone());
    let mut reports = vec![Vec::new(); horizon];
    for t in (0..horizon).rev() {
        let stage: Vec<Result<NodeReport>> = (0..grid.len())
            .into_par_iter()
            .map(|b| {
                let seed = if t + 1 == horizon {
                    myopic_seed(b, pool, utility, constraints, cfg)?
                } else {
                    lookup.get(t + 1, b)?.clone()
                };
                solve_node(t, b, &seed, &lookup, pool, utility, constraints, cfg)
            })
            .collect();
        let stage = stage.into_iter().collect::<Result<Vec<_>>>()?;
        lookup.insert_stage(t, stage.iter().map(|r| r.action.clone()).collect())?;
        reports[t] = stage;
    }
    Ok(LmctsRun { lookup, reports })
}

/// Builds the path pool from `cfg` and solves the lookup table.
pub fn build_lookup(
    model: &RegimeModel,
    horizon: usize,
    grid: &BeliefGrid,
    utility: &Utility,
    constraints: &Constraints,
    cfg: &LmctsConfig,
) -> Result<LmctsRun> {
    cfg.validate()?;
    let pool = build_path_pool(model, grid, cfg.pool_paths, horizon, cfg.antithetic_pool, cfg.seed);
    build_lookup_with_pool(&pool, horizon, grid, utility, constraints, cfg)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(mu: f64, var: f64) -> RegimeModel {
        RegimeModel::new(vec![vec![mu]], vec![vec![vec![var]]], vec![vec![1.0]], vec![0.0]).unwrap()
    }

    fn two_regime() -> RegimeModel {
        RegimeModel::new(
            vec![vec![0.04, 0.01], vec![-0.03, 0.0]],
            vec![
                vec![vec![0.02, 0.002], vec![0.002, 0.01]],
                vec![vec![0.04, 0.0], vec![0.0, 0.02]],
            ],
            vec![vec![0.8, 0.2], vec![0.3, 0.7]],
            vec![0.001],
        )
        .unwrap()
    }

    #[test]
    fn cached_rewards_match_step_by_step_rollouts() {
        let m = two_regime();
        let grid = BeliefGrid::new(2, 0.25).unwrap();
        let pool = build_path_pool(&m, &grid, 40, 4, true, 5);
        let mut lookup = LookupTable::new(4, grid.clone());
        for t in 1..4 {
            let stage = (0..grid.len())
                .map(|b| Allocation::new(vec![0.1 * b as f64, 0.2, 0.8 - 0.1 * b as f64]).unwrap())
                .collect();
            lookup.insert_stage(t, stage).unwrap();
        }
        let u = Utility::Crra { gamma: -1.0 };
        let a = Allocation::new(vec![0.3, 0.3, 0.4]).unwrap();
        for b in 0..grid.len() {
            let ctx = NodeContext::new(0, b, &lookup, &pool, &u, 1.0, 40).unwrap();
            for p in 0..40 {
                let direct = u.value(rollout_wealth(0, b, p, &a, &lookup, &pool, 1.0).unwrap());
                let cached = ctx.utility_on(a.weights(), p);
                assert!((direct - cached).abs() <= 1e-12 * direct.abs());
            }
        }
    }

    #[test]
    fn last_step_reward_is_one_period_growth() {
        let m = model(0.01, 0.0);
        let grid = BeliefGrid::new(1, 1.0).unwrap();
        let pool = build_path_pool(&m, &grid, 3, 2, false, 1);
        let lookup = LookupTable::new(2, grid);
        let u = Utility::Crra { gamma: -1.0 };
        let a = Allocation::new(vec![0.5, 0.5]).unwrap();
        let r = rollout(1, 0, &a, &lookup, &pool, &u, 1.0, 0, 3).unwrap();
        assert!((r - u.value(1.005)).abs() < 1e-15);
    }

    #[test]
    fn missing_lookup_is_an_error() {
        let m = model(0.01, 0.001);
        let grid = BeliefGrid::new(1, 1.0).unwrap();
        let pool = build_path_pool(&m, &grid, 3, 3, false, 1);
        let lookup = LookupTable::new(3, grid);
        let a = Allocation::all_cash(1);
        let err = rollout(0, 0, &a, &lookup, &pool, &Utility::Crra { gamma: -1.0 }, 1.0, 0, 1).unwrap_err();
        assert!(matches!(err, Error::MissingEntry { t: 1, .. }));
    }

    #[test]
    fn budget_one_returns_seed() {
        let m = model(0.01, 0.01);
        let grid = BeliefGrid::new(1, 1.0).unwrap();
        let pool = build_path_pool(&m, &grid, 10, 1, false, 1);
        let lookup = LookupTable::new(1, grid);
        let seed = Allocation::new(vec![0.35, 0.65]).unwrap();
        let cfg = LmctsConfig { iterations: 1, ..Default::default() };
        let u = Utility::Crra { gamma: -1.0 };
        let r = solve_node(0, 0, &seed, &lookup, &pool, &u, &Constraints::NoShort, &cfg).unwrap();
        assert_eq!(r.action, seed);
        assert_eq!(r.visits, 1);
    }

    #[test]
    fn visits_equal_budget() {
        let m = model(0.01, 0.01);
        let grid = BeliefGrid::new(1, 1.0).unwrap();
        let pool = build_path_pool(&m, &grid, 500, 1, true, 1);
        let lookup = LookupTable::new(1, grid);
        let u = Utility::Crra { gamma: -1.0 };
        let cfg = LmctsConfig { iterations: 777, ..Default::default() };
        let r = solve_node(0, 0, &Allocation::all_cash(1), &lookup, &pool, &u, &Constraints::NoShort, &cfg).unwrap();
        assert_eq!(r.visits, 777);
    }

    #[test]
    fn lookup_size_is_horizon_times_grid() {
        let m = two_regime();
        let grid = BeliefGrid::new(2, 0.25).unwrap();
        let cfg = LmctsConfig { iterations: 60, pool_paths: 200, ..Default::default() };
        let run = build_lookup(&m, 3, &grid, &Utility::Crra { gamma: -1.0 }, &Constraints::NoShort, &cfg).unwrap();
        assert_eq!(run.lookup.len(), 3 * grid.len());
        for t in 0..3 {
            for b in 0..grid.len() {
                assert!(Constraints::NoShort.admits(run.lookup.get(t, b).unwrap()));
            }
        }
    }
}
