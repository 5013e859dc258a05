use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use super::chart::{line_chart, Series};
use super::evaluate::{evaluate_on, evaluation_paths, EvalReport, EvalSpec, Policy};
use super::Method;
use crate::dp::{DpOptions, DpSolver, PolicyTable};
use crate::error::{Error, Result};
use crate::grid::BeliefGrid;
use crate::io::{write_atomic, RunConfig};
use crate::lmcts::{build_lookup, smooth_lookup, LookupTable};
use crate::market::Constraints;
use crate::ntz::{train, BasePolicy, TrainReport};

pub fn belief_grid(cfg: &RunConfig) -> Result<BeliefGrid> {
    BeliefGrid::new(cfg.model.n_regimes(), cfg.grid_step)
}

/// Wraps a non-configuration failure with the method and stage it came from.
pub fn in_stage(method: &str, stage: &str, e: Error) -> Error {
    match e {
        Error::Invalid { .. } | Error::Parse { .. } | Error::Io { .. } | Error::Solver { .. } => e,
        other => Error::Solver { method: method.into(), stage: stage.into(), reason: other.to_string() },
    }
}

pub fn solve_dp(cfg: &RunConfig) -> Result<PolicyTable> {
    let grid = belief_grid(cfg)?;
    DpSolver::new(&cfg.model, &grid, cfg.constraints, &cfg.base_utility, cfg.dp.clone())?.solve(cfg.horizon)
}

/// DP with shorting allowed up to one unit per asset and short positions
/// penalized. Without a no-short constraint this is the plain DP.
pub fn solve_adjusted_dp(cfg: &RunConfig) -> Result<PolicyTable> {
    let (constraints, penalty) = match cfg.constraints {
        Constraints::NoShort => (Constraints::Short { bound: 1.0 }, cfg.adjusted_penalty),
        c => (c, 0.0),
    };
    let grid = belief_grid(cfg)?;
    let opts = DpOptions { penalty, ..cfg.dp.clone() };
    DpSolver::new(&cfg.model, &grid, constraints, &cfg.base_utility, opts)?.solve(cfg.horizon)
}

/// Lookup table, smoothed when configured.
pub fn solve_lmcts(cfg: &RunConfig) -> Result<LookupTable> {
    let grid = belief_grid(cfg)?;
    let run = build_lookup(&cfg.model, cfg.horizon, &grid, &cfg.base_utility, &cfg.constraints, &cfg.lmcts)?;
    match cfg.smoothing {
        Some((w, o)) => smooth_lookup(&run.lookup, w, o, &cfg.constraints),
        None => Ok(run.lookup),
    }
}

pub fn train_nn(cfg: &RunConfig, base: &BasePolicy, cost_rate: f64) -> Result<TrainReport> {
    train(base, &cfg.model, &cfg.initial_belief, cfg.horizon, cfg.constraints, &cfg.nn_at(cost_rate))
}

pub fn eval_spec(cfg: &RunConfig, cost_rate: f64) -> EvalSpec {
    EvalSpec {
        horizon: cfg.horizon,
        cost_rate,
        utility: cfg.utility,
        goal: cfg.goal,
        initial_wealth: cfg.initial_wealth,
        start: cfg.initial_belief.clone(),
        constraints: cfg.constraints,
        paths: cfg.eval_paths,
        seed: cfg.seed,
    }
}

/// Per-time-step statistics of one report, columns prefixed by its label.
pub fn report_csv(r: &EvalReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    let m = &r.method;
    let mut head = vec![
        "t".to_string(),
        format!("{m}_mean_utility"),
        format!("{m}_mean_wealth"),
        format!("{m}_q05"),
        format!("{m}_q50"),
        format!("{m}_q95"),
    ];
    if r.goal_path.is_some() {
        head.push(format!("{m}_goal_probability"));
    }
    w.write_record(&head).expect("in-memory write");
    for t in 0..r.mean_utility.len() {
        let mut row = vec![
            t.to_string(),
            r.mean_utility[t].to_string(),
            r.mean_wealth[t].to_string(),
            r.q05[t].to_string(),
            r.q50[t].to_string(),
            r.q95[t].to_string(),
        ];
        if let Some(g) = &r.goal_path {
            row.push(g[t].to_string());
        }
        w.write_record(&row).expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

/// One row of terminal statistics per report.
pub fn summary_csv(reports: &[EvalReport]) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record([
        "method",
        "cost_rate",
        "paths",
        "seed",
        "expected_utility",
        "utility_se",
        "goal",
        "goal_probability",
        "goal_se",
        "mean_turnover",
        "mean_cost",
        "flagged",
        "bankrupt",
    ])
    .expect("in-memory write");
    let opt = |x: Option<f64>| x.map_or(String::new(), |v| v.to_string());
    for r in reports {
        w.write_record([
            r.method.clone(),
            r.cost_rate.to_string(),
            r.paths.to_string(),
            r.seed.to_string(),
            r.expected_utility.to_string(),
            r.utility_se.to_string(),
            opt(r.goal),
            opt(r.goal_probability),
            opt(r.goal_se),
            r.mean_turnover.to_string(),
            r.mean_cost.to_string(),
            r.flagged.to_string(),
            r.bankrupt.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii output")
}

#[derive(Debug, Clone)]
pub struct Comparison {
    pub reports: Vec<EvalReport>,
    pub files: Vec<PathBuf>,
}

/// Solved bases, kept across methods and cost rates.
#[derive(Default)]
struct Bases {
    dp: Option<BasePolicy>,
    adjusted: Option<BasePolicy>,
    lmcts: Option<BasePolicy>,
}

impl Bases {
    fn get(&mut self, cfg: &RunConfig, which: Method) -> Result<&BasePolicy> {
        let (slot, name) = match which {
            Method::Dp | Method::DpNn => (&mut self.dp, "dp"),
            Method::Lmcts | Method::LmctsNn => (&mut self.lmcts, "lmcts"),
            Method::AdjustedDp => (&mut self.adjusted, "adjusted_dp"),
        };
        if slot.is_none() {
            *slot = Some(solve_base(cfg, which).map_err(|e| in_stage(name, "solve", e))?);
        }
        Ok(slot.as_ref().unwrap())
    }
}

/// The table a method trades around, solved from the configuration.
pub fn solve_base(cfg: &RunConfig, method: Method) -> Result<BasePolicy> {
    match method {
        Method::Dp | Method::DpNn => solve_dp(cfg).map(|t| BasePolicy::from_policy(&t)),
        Method::AdjustedDp => solve_adjusted_dp(cfg).map(|t| BasePolicy::from_policy(&t)),
        Method::Lmcts | Method::LmctsNn => solve_lmcts(cfg).and_then(|t| BasePolicy::from_lookup(&t)),
    }
}

/// Runs every configured method at every configured cost rate on shared
/// evaluation paths. With `out`, writes one CSV per report, a summary and
/// the charts.
pub fn run_comparison(cfg: &RunConfig, out: Option<&Path>) -> Result<Comparison> {
    let mut bases = Bases::default();
    let sweep = cfg.cost_rates.len() > 1;
    let paths = evaluation_paths(&cfg.model, &eval_spec(cfg, cfg.cost_rates[0]));
    let mut reports = Vec::new();
    for &method in &cfg.methods {
        for &c in &cfg.cost_rates {
            let label = if sweep { format!("{}_c{c}", method.name()) } else { method.name().to_string() };
            let base = bases.get(cfg, method)?.clone();
            let spec = eval_spec(cfg, c);
            let report = if method.uses_network() {
                let trained = train_nn(cfg, &base, c).map_err(|e| in_stage(&label, "train", e))?;
                evaluate_on(&label, Policy::Zone { base: &base, params: &trained.params }, &paths, &spec)
            } else {
                evaluate_on(&label, Policy::Rebalance(&base), &paths, &spec)
            }
            .map_err(|e| in_stage(&label, "evaluate", e))?;
            reports.push(report);
        }
    }
    let files = match out {
        Some(dir) => write_outputs(cfg, &reports, dir)?,
        None => Vec::new(),
    };
    Ok(Comparison { reports, files })
}

/// Writes report CSVs, the summary and the charts into `dir`.
pub fn write_outputs(cfg: &RunConfig, reports: &[EvalReport], dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files = Vec::new();
    let mut put = |name: String, body: String| -> Result<()> {
        let p = dir.join(name);
        write_atomic(&p, body.as_bytes())?;
        files.push(p);
        Ok(())
    };
    for r in reports {
        put(format!("{}.csv", r.method), report_csv(r))?;
    }
    put("summary.csv".into(), summary_csv(reports))?;

    let over_time = |f: &dyn Fn(&EvalReport) -> Option<Vec<f64>>| -> Vec<Series> {
        reports
            .iter()
            .filter_map(|r| {
                f(r).map(|v| Series { label: r.method.clone(), points: v.iter().enumerate().map(|(t, y)| (t as f64, *y)).collect() })
            })
            .collect()
    };
    put("utility.svg".into(), line_chart("Expected utility over time", "time step", "mean utility", &over_time(&|r| Some(r.mean_utility.clone()))))?;
    if cfg.goal.is_some() {
        put(
            "goal_probability.svg".into(),
            line_chart("Probability of reaching the goal", "time step", "fraction at or above goal", &over_time(&|r| r.goal_path.clone())),
        )?;
    }
    if cfg.cost_rates.len() > 1 {
        let mut by_method: BTreeMap<usize, Series> = BTreeMap::new();
        for r in reports {
            let name = r.method.rsplit_once("_c").map_or(r.method.as_str(), |(m, _)| m);
            let key = cfg.methods.iter().position(|m| m.name() == name).unwrap_or(usize::MAX);
            by_method
                .entry(key)
                .or_insert_with(|| Series { label: name.to_string(), points: Vec::new() })
                .points
                .push((r.cost_rate, r.expected_utility));
        }
        let series: Vec<Series> = by_method.into_values().collect();
        put("cost_sweep.svg".into(), line_chart("Terminal utility against cost rate", "cost rate", "expected utility", &series))?;
    }
    Ok(files)
}
