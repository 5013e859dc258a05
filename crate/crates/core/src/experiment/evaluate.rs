use rayon::prelude::*;

use crate::error::Result;
use crate::market::{grow, Allocation, Belief, Constraints, Utility, BANKRUPTCY_FLOOR};
use crate::ntz::{project_to_zone, zone, BasePolicy, NtzParams, Zone, WEALTH_FEATURE_CAP};
use crate::rng::Domain;
use crate::sim::{path_from_stream, SimPath};

/// Policy applied during evaluation.
#[derive(Debug, Clone, Copy)]
pub enum Policy<'a> {
    /// Trade back to the base allocation at every step.
    Rebalance(&'a BasePolicy),
    /// Trade only to the edge of a no-trade zone around the base.
    Zone { base: &'a BasePolicy, params: &'a NtzParams },
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSpec {
    pub horizon: usize,
    pub cost_rate: f64,
    /// Reported objective. CRRA is applied to wealth relative to its start.
    pub utility: Utility,
    /// Target whose reach probability is reported, if any.
    pub goal: Option<f64>,
    pub initial_wealth: f64,
    pub start: Belief,
    pub constraints: Constraints,
    pub paths: usize,
    pub seed: u64,
}

/// Outcome of one evaluation path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathOutcome {
    /// Wealth at each decision time before trading, then terminal wealth.
    pub wealth: Vec<f64>,
    pub turnover: f64,
    pub cost: f64,
    pub flagged: usize,
    pub bankrupt: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalReport {
    pub method: String,
    pub cost_rate: f64,
    pub seed: u64,
    pub paths: usize,
    pub mean_utility: Vec<f64>,
    pub mean_wealth: Vec<f64>,
    pub q05: Vec<f64>,
    pub q50: Vec<f64>,
    pub q95: Vec<f64>,
    /// Fraction of paths at or above the goal at each time.
    pub goal_path: Option<Vec<f64>>,
    pub expected_utility: f64,
    pub utility_se: f64,
    pub goal: Option<f64>,
    pub goal_probability: Option<f64>,
    pub goal_se: Option<f64>,
    pub mean_turnover: f64,
    pub mean_cost: f64,
    pub flagged: usize,
    pub bankrupt: usize,
    pub terminal_wealth: Vec<f64>,
    pub terminal_utility: Vec<f64>,
}

/// Utility of currency wealth `w` for reporting.
pub fn reported_utility(u: &Utility, w: f64, initial_wealth: f64) -> f64 {
    match u {
        Utility::Crra { .. } => u.value(w / initial_wealth),
        _ => u.value(w),
    }
}

/// Evaluation paths: stream `i` of the evaluation domain.
pub fn evaluation_paths(model: &crate::market::RegimeModel, spec: &EvalSpec) -> Vec<SimPath> {
    (0..spec.paths as u64)
        .into_par_iter()
        .map(|i| path_from_stream(model, &spec.start, spec.horizon, spec.seed, Domain::Evaluation, i))
        .collect()
}

fn features(params: &NtzParams, belief: &Belief, wealth: f64, w0: f64) -> Vec<f64> {
    let mut f = belief.probs().to_vec();
    if params.layout.wealth_feature {
        f.push((wealth / w0).clamp(0.0, WEALTH_FEATURE_CAP));
    }
    f
}

/// Applies `policy` along one path with costs charged on post-trade wealth.
pub fn run_path(policy: Policy, path: &SimPath, spec: &EvalSpec) -> Result<PathOutcome> {
    let n = path.returns(0).len();
    let w0 = spec.initial_wealth;
    let floor = BANKRUPTCY_FLOOR * w0;
    let mut out = PathOutcome { wealth: vec![w0], turnover: 0.0, cost: 0.0, flagged: 0, bankrupt: false };
    let mut wealth = w0;
    let mut held = Allocation::all_cash(n);
    for s in 0..spec.horizon {
        let belief = &path.beliefs[s];
        let (target, turnover) = match policy {
            Policy::Rebalance(base) => {
                let a = base.at(s, belief)?.clone();
                let turn = a.l1_distance(&held);
                (a, turn)
            }
            Policy::Zone { base, params } => {
                let z = zone(&params.layout, &params.values, base.at(s, belief)?, &features(params, belief, wealth, w0), &spec.constraints);
                let z = if s == 0 {
                    Zone { lower: z.center.clone(), upper: z.center.clone(), center: z.center }
                } else {
                    z
                };
                let p = project_to_zone(&held, &z, &spec.constraints);
                out.flagged += usize::from(p.flagged);
                (p.alloc, p.turnover)
            }
        };
        let after = wealth / (1.0 + spec.cost_rate * turnover);
        out.cost += wealth - after;
        out.turnover += turnover;
        let g = grow(after, &target, path.returns(s), path.rf[s], floor);
        if g.bankrupt {
            out.bankrupt = true;
            out.wealth.resize(spec.horizon + 1, floor);
            return Ok(out);
        }
        wealth = g.wealth;
        held = g.drifted;
        out.wealth.push(wealth);
    }
    Ok(out)
}

/// Mean and standard error of the mean.
pub fn mean_se(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    if x.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = x.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Mean and standard error of `a - b` over paired samples.
pub fn paired_difference(a: &[f64], b: &[f64]) -> (f64, f64) {
    assert_eq!(a.len(), b.len(), "paired samples differ in length");
    let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    mean_se(&d)
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], q: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * q;
    let (lo, frac) = (h.floor() as usize, h - h.floor());
    if lo + 1 >= sorted.len() {
        sorted[lo]
    } else {
        sorted[lo] + frac * (sorted[lo + 1] - sorted[lo])
    }
}

/// Aggregates path outcomes into a report.
pub fn summarize(method: &str, outcomes: &[PathOutcome], spec: &EvalSpec) -> EvalReport {
    let steps = spec.horizon + 1;
    let m = outcomes.len() as f64;
    let mut report = EvalReport {
        method: method.to_string(),
        cost_rate: spec.cost_rate,
        seed: spec.seed,
        paths: outcomes.len(),
        mean_utility: Vec::with_capacity(steps),
        mean_wealth: Vec::with_capacity(steps),
        q05: Vec::with_capacity(steps),
        q50: Vec::with_capacity(steps),
        q95: Vec::with_capacity(steps),
        goal_path: spec.goal.map(|_| Vec::with_capacity(steps)),
        expected_utility: 0.0,
        utility_se: 0.0,
        goal: spec.goal,
        goal_probability: None,
        goal_se: None,
        mean_turnover: outcomes.iter().map(|o| o.turnover).sum::<f64>() / m,
        mean_cost: outcomes.iter().map(|o| o.cost).sum::<f64>() / m,
        flagged: outcomes.iter().map(|o| o.flagged).sum(),
        bankrupt: outcomes.iter().filter(|o| o.bankrupt).count(),
        terminal_wealth: outcomes.iter().map(|o| o.wealth[spec.horizon]).collect(),
        terminal_utility: Vec::new(),
    };
    let mut column = Vec::with_capacity(outcomes.len());
    for t in 0..steps {
        column.clear();
        column.extend(outcomes.iter().map(|o| o.wealth[t]));
        let u: f64 = column.iter().map(|w| reported_utility(&spec.utility, *w, spec.initial_wealth)).sum();
        report.mean_utility.push(u / m);
        report.mean_wealth.push(column.iter().sum::<f64>() / m);
        if let (Some(g), Some(path)) = (spec.goal, report.goal_path.as_mut()) {
            path.push(column.iter().filter(|w| **w >= g).count() as f64 / m);
        }
        column.sort_by(f64::total_cmp);
        report.q05.push(quantile_sorted(&column, 0.05));
        report.q50.push(quantile_sorted(&column, 0.5));
        report.q95.push(quantile_sorted(&column, 0.95));
    }
    report.terminal_utility =
        report.terminal_wealth.iter().map(|w| reported_utility(&spec.utility, *w, spec.initial_wealth)).collect();
    (report.expected_utility, report.utility_se) = mean_se(&report.terminal_utility);
    if let Some(g) = spec.goal {
        let hits: Vec<f64> = report.terminal_wealth.iter().map(|w| f64::from(u8::from(*w >= g))).collect();
        let (p, se) = mean_se(&hits);
        report.goal_probability = Some(p);
        report.goal_se = Some(se);
    }
    report
}

/// Simulates fresh evaluation paths and reports on `policy`.
pub fn evaluate(method: &str, policy: Policy, model: &crate::market::RegimeModel, spec: &EvalSpec) -> Result<EvalReport> {
    let paths = evaluation_paths(model, spec);
    evaluate_on(method, policy, &paths, spec)
}

/// Reports on `policy` over given paths.
pub fn evaluate_on(method: &str, policy: Policy, paths: &[SimPath], spec: &EvalSpec) -> Result<EvalReport> {
    let outcomes = paths.par_iter().map(|p| run_path(policy, p, spec)).collect::<Result<Vec<_>>>()?;
    Ok(summarize(method, &outcomes, spec))
}
