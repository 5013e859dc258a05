use std::borrow::Borrow;

use rayon::prelude::*;

use super::network::{NtzLayout, NtzParams};
use super::tape::{Tape, Var};
use super::zone::{project_vars, zone_vars};
use crate::dp::PolicyTable;
use crate::error::{Error, Result};
use crate::grid::BeliefGrid;
use crate::lmcts::LookupTable;
use crate::market::{Allocation, Belief, Constraints, Utility, BANKRUPTCY_FLOOR};
use crate::sim::SimPath;

/// Zero-cost allocation the zone is centered on, looked up at the grid
/// point nearest the current belief.
#[derive(Debug, Clone, PartialEq)]
pub enum BasePolicy {
    Table {
        grid: BeliefGrid,
        /// `allocs[t][b]`.
        allocs: Vec<Vec<Allocation>>,
    },
    Constant(Allocation),
}

impl BasePolicy {
    pub fn from_policy(table: &PolicyTable) -> Self {
        BasePolicy::Table {
            grid: table.grid.clone(),
            allocs: table.alloc.clone(),
        }
    }

    pub fn from_lookup(lookup: &LookupTable) -> Result<Self> {
        let allocs = (0..lookup.horizon())
            .map(|t| {
                lookup
                    .stage(t)
                    .map(|s| s.to_vec())
                    .ok_or(Error::MissingEntry { t, belief: 0 })
            })
            .collect::<Result<_>>()?;
        Ok(BasePolicy::Table {
            grid: lookup.grid().clone(),
            allocs,
        })
    }

    pub fn horizon(&self) -> Option<usize> {
        match self {
            BasePolicy::Table { allocs, .. } => Some(allocs.len()),
            BasePolicy::Constant(_) => None,
        }
    }

    pub fn n_risky(&self) -> usize {
        match self {
            BasePolicy::Table { allocs, .. } => allocs[0][0].n_risky(),
            BasePolicy::Constant(a) => a.n_risky(),
        }
    }

    pub fn at(&self, t: usize, belief: &Belief) -> Result<&Allocation> {
        match self {
            BasePolicy::Table { grid, allocs } => {
                let b = grid.nearest(belief.probs());
                allocs.get(t).and_then(|s| s.get(b)).ok_or(Error::MissingEntry { t, belief: b })
            }
            BasePolicy::Constant(a) => Ok(a),
        }
    }
}

/// Everything about an unroll other than the parameters and the paths.
#[derive(Debug, Clone, PartialEq)]
pub struct UnrollSpec {
    pub cost_rate: f64,
    /// Training utility. Goal indicators should be smoothed first.
    pub utility: Utility,
    /// Starting wealth in currency. CRRA losses use wealth relative to it.
    pub initial_wealth: f64,
    pub constraints: Constraints,
    /// Holdings before the first trade; `None` means all cash.
    pub initial_holdings: Option<Allocation>,
}

/// Wealth feature: wealth relative to its starting value, clipped.
pub const WEALTH_FEATURE_CAP: f64 = 5.0;

#[derive(Debug, Clone, Default, PartialEq)]
pub struct PathStats {
    pub terminal_wealth: f64,
    pub utility: f64,
    pub turnover: f64,
    pub cost: f64,
    pub flagged: usize,
    pub bankrupt: bool,
    /// Wealth at each decision time before trading, then terminal wealth.
    pub wealth: Vec<f64>,
}

/// Unrolls one path on `tape`, returning the terminal utility node. The
/// first `layout.n_params()` tape entries must be the parameters.
pub fn unroll_path(
    tape: &mut Tape,
    layout: &NtzLayout,
    params: &[Var],
    base: &BasePolicy,
    path: &SimPath,
    spec: &UnrollSpec,
) -> Result<(Var, PathStats)> {
    let n = layout.n_risky;
    let horizon = path.horizon();
    let crra = matches!(spec.utility, Utility::Crra { .. });
    let w0 = if crra { 1.0 } else { spec.initial_wealth };
    let mut stats = PathStats::default();

    let features = |tape: &mut Tape, belief: &Belief, wealth: Var| -> Vec<Var> {
        let mut f: Vec<Var> = belief.probs().iter().map(|p| tape.constant(*p)).collect();
        if layout.wealth_feature {
            let rel = tape.affine(wealth, 1.0 / w0, 0.0);
            f.push(tape.clamp_const(rel, 0.0, WEALTH_FEATURE_CAP));
        }
        f
    };

    let mut wealth = tape.constant(w0);
    stats.wealth.push(w0);
    let start = match &spec.initial_holdings {
        Some(h) => h.clone(),
        None => Allocation::all_cash(n),
    };
    let holdings: Vec<Var> = start.weights().iter().map(|v| tape.constant(*v)).collect();

    // entry trade to the (center-adjusted) base
    let f0 = features(tape, &path.beliefs[0], wealth);
    let z0 = zone_vars(tape, layout, params, base.at(0, &path.beliefs[0])?, &f0, &spec.constraints);
    let entry = project_vars(tape, &holdings, &z0.center, &z0.center, &spec.constraints);
    let mut weights = entry.weights;
    wealth = pay_cost(tape, wealth, entry.turnover, spec.cost_rate, &mut stats);
    stats.flagged += usize::from(entry.flagged);

    let mut bankrupt = false;
    for s in 0..horizon {
        let r = path.returns(s);
        let rf = path.rf[s];
        let mut growth_terms = Vec::with_capacity(n + 1);
        for i in 0..n {
            growth_terms.push(tape.affine(weights[i], 1.0 + r[i], 0.0));
        }
        growth_terms.push(tape.affine(weights[n], 1.0 + rf, 0.0));
        let g = tape.sum(&growth_terms);
        if tape.value(g) <= 0.0 {
            bankrupt = true;
            break;
        }
        wealth = tape.mul(wealth, g);
        stats.wealth.push(tape.value(wealth));
        if s + 1 == horizon {
            break;
        }
        let drifted: Vec<Var> = growth_terms.iter().map(|x| tape.div(*x, g)).collect();
        let f = features(tape, &path.beliefs[s + 1], wealth);
        let z = zone_vars(tape, layout, params, base.at(s + 1, &path.beliefs[s + 1])?, &f, &spec.constraints);
        let p = project_vars(tape, &drifted, &z.lower, &z.upper, &spec.constraints);
        weights = p.weights;
        stats.flagged += usize::from(p.flagged);
        wealth = pay_cost(tape, wealth, p.turnover, spec.cost_rate, &mut stats);
    }
    if bankrupt {
        wealth = tape.constant(BANKRUPTCY_FLOOR * w0);
        stats.bankrupt = true;
        stats.wealth.resize(horizon + 1, BANKRUPTCY_FLOOR * w0);
    }
    let u = utility_var(tape, &spec.utility, wealth);
    stats.terminal_wealth = tape.value(wealth) * spec.initial_wealth / w0;
    stats.utility = tape.value(u);
    stats.wealth.iter_mut().for_each(|w| *w *= spec.initial_wealth / w0);
    Ok((u, stats))
}

fn pay_cost(tape: &mut Tape, wealth: Var, turnover: Var, c: f64, stats: &mut PathStats) -> Var {
    let before = tape.value(wealth);
    let denom = tape.affine(turnover, c, 1.0);
    let after = tape.div(wealth, denom);
    stats.turnover += tape.value(turnover);
    stats.cost += before - tape.value(after);
    after
}

fn utility_var(tape: &mut Tape, u: &Utility, wealth: Var) -> Var {
    match *u {
        Utility::Crra { gamma } if gamma == 0.0 => tape.ln(wealth),
        Utility::Crra { gamma } => {
            let p = tape.powf(wealth, gamma);
            tape.affine(p, 1.0 / gamma, 0.0)
        }
        Utility::SmoothedGoal { goal, steepness } => {
            let z = tape.affine(wealth, steepness, -steepness * goal);
            tape.sigmoid(z)
        }
        Utility::Goal { goal } => {
            let v = if tape.value(wealth) >= goal { 1.0 } else { 0.0 };
            tape.constant(v)
        }
    }
}

fn load_params(tape: &mut Tape, params: &NtzParams) -> Vec<Var> {
    params.values.iter().map(|v| tape.leaf(*v)).collect()
}

/// Terminal utility and statistics of every path, without gradients.
pub fn simulate_paths<P: Borrow<SimPath> + Sync>(
    params: &NtzParams,
    base: &BasePolicy,
    paths: &[P],
    spec: &UnrollSpec,
) -> Result<Vec<PathStats>> {
    paths
        .par_iter()
        .map(|p| {
            let mut tape = Tape::forward_only();
            let vars = load_params(&mut tape, params);
            unroll_path(&mut tape, &params.layout, &vars, base, p.borrow(), spec).map(|r| r.1)
        })
        .collect()
}

/// Mean of `-U(W_T)` over the paths.
pub fn unroll_loss<P: Borrow<SimPath> + Sync>(params: &NtzParams, base: &BasePolicy, paths: &[P], spec: &UnrollSpec) -> Result<f64> {
    let stats = simulate_paths(params, base, paths, spec)?;
    Ok(-stats.iter().map(|s| s.utility).sum::<f64>() / paths.len() as f64)
}

/// Loss and its gradient with respect to every parameter. Per-path
/// gradients are summed in path order.
pub fn gradient<P: Borrow<SimPath> + Sync>(
    params: &NtzParams,
    base: &BasePolicy,
    paths: &[P],
    spec: &UnrollSpec,
) -> Result<(f64, Vec<f64>)> {
    let np = params.values.len();
    let per_path: Vec<(f64, Vec<f64>)> = paths
        .par_iter()
        .map(|p| {
            let mut tape = Tape::new();
            let vars = load_params(&mut tape, params);
            let (u, _) = unroll_path(&mut tape, &params.layout, &vars, base, p.borrow(), spec)?;
            let adj = tape.gradient(u);
            Ok((tape.value(u), adj[..np].to_vec()))
        })
        .collect::<Result<_>>()?;
    let scale = -1.0 / paths.len() as f64;
    let mut grad = vec![0.0; np];
    let mut loss = 0.0;
    for (u, g) in &per_path {
        loss += u;
        for (a, b) in grad.iter_mut().zip(g) {
            *a += b;
        }
    }
    grad.iter_mut().for_each(|g| *g *= scale);
    Ok((loss * scale, grad))
}
