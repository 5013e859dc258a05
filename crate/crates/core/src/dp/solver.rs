use rayon::prelude::*;

use super::scenario::{GridValues, Homogeneity, ScenarioSet, StageObjective};
use super::search::{maximize, SearchOptions};
use crate::error::{Error, Result};
use crate::grid::BeliefGrid;
use crate::market::{Allocation, Constraints, RegimeModel, Utility};
use crate::rng::{self, Domain};

#[derive(Debug, Clone, PartialEq)]
pub struct DpOptions {
    /// Scenarios per grid point, shared by every action and every stage.
    pub mc_paths: usize,
    pub antithetic: bool,
    pub search: SearchOptions,
    /// Weight on total short magnitude (cash included) subtracted from the
    /// stage objective. Zero disables the adjusted variant.
    pub penalty: f64,
    pub seed: u64,
}

impl Default for DpOptions {
    fn default() -> Self {
        DpOptions {
            mc_paths: 2000,
            antithetic: true,
            search: SearchOptions::default(),
            penalty: 0.0,
            seed: 0,
        }
    }
}

/// Default shorting penalty: ten times the magnitude of the utility of unit
/// wealth (ten for log utility).
pub fn default_penalty(utility: &Utility) -> f64 {
    match Homogeneity::from_utility(utility) {
        Ok(Homogeneity::Power(g)) => 10.0 / g.abs(),
        _ => 10.0,
    }
}

/// Policy and unit-wealth value per time step and belief grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyTable {
    pub horizon: usize,
    pub grid: BeliefGrid,
    /// `alloc[t][b]` for `t < horizon`.
    pub alloc: Vec<Vec<Allocation>>,
    /// `value[t][b]` for `t <= horizon`; `value[horizon]` is the utility of
    /// unit wealth.
    pub value: Vec<Vec<f64>>,
    /// Stages whose local search hit its move cap and kept the best point
    /// seen.
    pub unconverged: Vec<(usize, usize)>,
}

impl PolicyTable {
    pub fn allocation(&self, t: usize, b: usize) -> &Allocation {
        &self.alloc[t][b]
    }
}

impl PartialEq for BeliefGrid {
    fn eq(&self, other: &Self) -> bool {
        self.n_regimes() == other.n_regimes() && self.divisions() == other.divisions()
    }
}

#[derive(Debug, Clone)]
pub struct StageSolution {
    pub alloc: Vec<Allocation>,
    /// Expected unit-wealth value of the chosen action, without penalty.
    pub value: Vec<f64>,
    /// Penalized objective at the chosen action.
    pub objective: Vec<f64>,
    pub capped: Vec<usize>,
}

/// Backward induction over the belief grid with CRRA utility and no
/// transaction costs. Wealth never enters the state: every value is at
/// unit wealth and homogeneity scales it back.
#[derive(Debug, Clone)]
pub struct DpSolver<'a> {
    model: &'a RegimeModel,
    grid: &'a BeliefGrid,
    constraints: Constraints,
    homogeneity: Homogeneity,
    opts: DpOptions,
    scenarios: Vec<ScenarioSet>,
}

/// Scenario set used at grid point `b`; a function of `(seed, b)` only.
pub fn scenario_set(model: &RegimeModel, grid: &BeliefGrid, b: usize, opts: &DpOptions) -> ScenarioSet {
    let mut r = rng::stream(opts.seed, Domain::DpScenarios, b as u64);
    ScenarioSet::draw(model, grid.point(b), opts.mc_paths, opts.antithetic, &mut r)
}

impl<'a> DpSolver<'a> {
    pub fn new(
        model: &'a RegimeModel,
        grid: &'a BeliefGrid,
        constraints: Constraints,
        utility: &Utility,
        opts: DpOptions,
    ) -> Result<Self> {
        if grid.n_regimes() != model.n_regimes() {
            return Err(Error::invalid(
                "grid",
                format!("grid has {} regimes, model has {}", grid.n_regimes(), model.n_regimes()),
            ));
        }
        constraints.validate()?;
        if !(opts.penalty >= 0.0) {
            return Err(Error::invalid("dp.penalty", "must be nonnegative"));
        }
        if opts.mc_paths == 0 {
            return Err(Error::invalid("dp.mc_paths", "must be positive"));
        }
        let homogeneity = Homogeneity::from_utility(utility)?;
        let scenarios = (0..grid.len())
            .into_par_iter()
            .map(|b| scenario_set(model, grid, b, &opts))
            .collect();
        Ok(DpSolver {
            model,
            grid,
            constraints,
            homogeneity,
            opts,
            scenarios,
        })
    }

    pub fn scenarios(&self, b: usize) -> &ScenarioSet {
        &self.scenarios[b]
    }

    pub fn homogeneity(&self) -> Homogeneity {
        self.homogeneity
    }

    pub fn terminal_values(&self) -> Vec<f64> {
        vec![self.homogeneity.terminal(); self.grid.len()]
    }

    /// Maximizes the penalized stage objective at every grid point.
    /// `warm` supplies starting points for the local search on large
    /// lattices.
    pub fn solve_stage(&self, value_next: &[f64], warm: Option<&[Allocation]>) -> StageSolution {
        let entries = self.model.n_risky() + 1;
        let penalty = self.opts.penalty;
        let results: Vec<_> = (0..self.grid.len())
            .into_par_iter()
            .map(|b| {
                let objective = StageObjective::new(
                    &self.scenarios[b],
                    GridValues { grid: self.grid, values: value_next },
                    self.homogeneity,
                );
                let f = |w: &[f64]| {
                    let v = objective.value(w);
                    if penalty > 0.0 {
                        v - penalty * w.iter().map(|x| (-x).max(0.0)).sum::<f64>()
                    } else {
                        v
                    }
                };
                let starts: Vec<Vec<f64>> = warm
                    .map(|w| vec![w[b].weights().to_vec()])
                    .unwrap_or_default();
                let r = maximize(entries, &self.constraints, &self.opts.search, &starts, f);
                let value = objective.value(&r.weights);
                (Allocation::from_vec_unchecked(r.weights), value, r.objective, r.capped)
            })
            .collect();
        let mut sol = StageSolution {
            alloc: Vec::with_capacity(results.len()),
            value: Vec::with_capacity(results.len()),
            objective: Vec::with_capacity(results.len()),
            capped: Vec::new(),
        };
        for (b, (a, v, o, capped)) in results.into_iter().enumerate() {
            sol.alloc.push(a);
            sol.value.push(v);
            sol.objective.push(o);
            if capped {
                sol.capped.push(b);
            }
        }
        sol
    }

    pub fn solve(&self, horizon: usize) -> Result<PolicyTable> {
        if horizon == 0 {
            return Err(Error::invalid("horizon", "must be at least 1"));
        }
        let mut value = vec![Vec::new(); horizon + 1];
        let mut alloc = vec![Vec::new(); horizon];
        let mut unconverged = Vec::new();
        value[horizon] = self.terminal_values();
        for t in (0..horizon).rev() {
            let warm = if t + 1 < horizon { Some(alloc[t + 1].as_slice()) } else { None };
            let stage = self.solve_stage(&value[t + 1], warm);
            unconverged.extend(stage.capped.iter().map(|b| (t, *b)));
            alloc[t] = stage.alloc;
            value[t] = stage.value;
        }
        Ok(PolicyTable {
            horizon,
            grid: self.grid.clone(),
            alloc,
            value,
            unconverged,
        })
    }
}

/// One-period optimum at every grid point: the last stage of the dynamic
/// program.
pub fn myopic_policy(
    model: &RegimeModel,
    grid: &BeliefGrid,
    constraints: Constraints,
    utility: &Utility,
    opts: DpOptions,
) -> Result<Vec<Allocation>> {
    let solver = DpSolver::new(model, grid, constraints, utility, opts)?;
    Ok(solver.solve_stage(&solver.terminal_values(), None).alloc)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn single_regime(mu: f64, var: f64) -> RegimeModel {
        RegimeModel::new(vec![vec![mu]], vec![vec![vec![var]]], vec![vec![1.0]], vec![0.0]).unwrap()
    }

    #[test]
    fn no_risky_assets_means_cash() {
        let model = RegimeModel::new(vec![vec![]], vec![vec![]], vec![vec![1.0]], vec![0.01]).unwrap();
        let grid = BeliefGrid::new(1, 1.0).unwrap();
        let u = Utility::Crra { gamma: -1.0 };
        let solver = DpSolver::new(&model, &grid, Constraints::NoShort, &u, DpOptions::default()).unwrap();
        let table = solver.solve(3).unwrap();
        for t in 0..3 {
            assert_eq!(table.alloc[t][0].weights(), &[1.0]);
        }
        let expect = u.value(1.01f64.powi(3));
        assert!((table.value[0][0] - expect).abs() < 1e-12);
    }

    #[test]
    fn one_period_table_is_one_stage() {
        let model = single_regime(0.05, 0.04);
        let grid = BeliefGrid::new(1, 1.0).unwrap();
        let u = Utility::Crra { gamma: -1.0 };
        let solver = DpSolver::new(&model, &grid, Constraints::NoShort, &u, DpOptions::default()).unwrap();
        let table = solver.solve(1).unwrap();
        let stage = solver.solve_stage(&solver.terminal_values(), None);
        assert_eq!(table.alloc[0], stage.alloc);
        assert_eq!(table.value[0], stage.value);
    }

    #[test]
    fn stage_argmax_matches_brute_force() {
        let model = single_regime(0.06, 0.04);
        let grid = BeliefGrid::new(1, 1.0).unwrap();
        let u = Utility::Crra { gamma: -1.0 };
        let opts = DpOptions {
            search: SearchOptions { refine_step: None, ..Default::default() },
            ..Default::default()
        };
        let solver = DpSolver::new(&model, &grid, Constraints::NoShort, &u, opts).unwrap();
        let stage = solver.solve_stage(&solver.terminal_values(), None);
        // brute force over the 21 lattice points with the same scenarios
        let set = solver.scenarios(0);
        let mut best = (0.0, f64::NEG_INFINITY);
        for k in 0..=20 {
            let w = k as f64 * 0.05;
            let v: f64 = (0..set.len())
                .map(|s| {
                    let g = 1.0 + w * set.returns(s)[0];
                    set.weights()[s] * (-1.0 / g)
                })
                .sum();
            if v > best.1 {
                best = (w, v);
            }
        }
        assert!((stage.alloc[0].weights()[0] - best.0).abs() < 1e-12);
        assert!((stage.value[0] - best.1).abs() < 1e-12);
    }

    #[test]
    fn huge_penalty_recovers_long_only() {
        let model = RegimeModel::new(
            vec![vec![0.02, -0.04]],
            vec![vec![vec![0.04, 0.01], vec![0.01, 0.03]]],
            vec![vec![1.0]],
            vec![0.0],
        )
        .unwrap();
        let grid = BeliefGrid::new(1, 1.0).unwrap();
        let u = Utility::Crra { gamma: -1.0 };
        let base = DpOptions {
            search: SearchOptions { refine_step: None, ..Default::default() },
            ..Default::default()
        };
        let long = DpSolver::new(&model, &grid, Constraints::NoShort, &u, base.clone()).unwrap();
        let long_stage = long.solve_stage(&long.terminal_values(), None);
        let penalized = DpSolver::new(
            &model,
            &grid,
            Constraints::Short { bound: 1.0 },
            &u,
            DpOptions { penalty: 1e9, ..base.clone() },
        )
        .unwrap();
        let pen_stage = penalized.solve_stage(&penalized.terminal_values(), None);
        let free = DpSolver::new(&model, &grid, Constraints::Short { bound: 1.0 }, &u, base).unwrap();
        let free_stage = free.solve_stage(&free.terminal_values(), None);
        assert!(free_stage.alloc[0].short_magnitude() > 0.0, "instance should want to short");
        for (a, b) in pen_stage.alloc[0].weights().iter().zip(long_stage.alloc[0].weights()) {
            assert!((a - b).abs() < 1e-12);
        }
    }
}
