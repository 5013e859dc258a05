//! Command-line front end.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};

use crate::dp::PolicyTable;
use crate::error::{Error, Result};
use crate::experiment::{
    eval_spec, evaluate, in_stage, report_csv, run_comparison, solve_adjusted_dp, solve_base, solve_dp, solve_lmcts,
    summary_csv, train_nn, Method, Policy,
};
use crate::io::{
    estimate_labeled, load_model, load_table, read_header, read_labeled_returns, save_table, write_atomic, MarketSection,
    ModelFile, RateSpec, RunConfig,
};
use crate::lmcts::LookupTable;
use crate::ntz::{BasePolicy, NtzParams};

#[derive(Debug, Parser)]
#[command(name = "regime-alloc", version, about = "Portfolio allocation under regime switching")]
pub struct Cli {
    /// Model and run configuration (TOML).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Overrides every seed in the configuration.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    pub out: PathBuf,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Estimate a model from labeled returns and write model.toml.
    Calibrate(CalibrateArgs),
    /// Solve the belief-grid dynamic program.
    SolveDp(SolveDpArgs),
    /// Build the LMCTS lookup table.
    SolveLmcts(SolveLmctsArgs),
    /// Train a no-trade-zone network around a base table.
    TrainNn(TrainArgs),
    /// Evaluate one policy on held-out paths.
    Evaluate(EvaluateArgs),
    /// Run the configured method comparison.
    Compare,
}

#[derive(Debug, Args)]
pub struct CalibrateArgs {
    /// CSV with one column per asset and a `regime` label column.
    #[arg(long)]
    pub returns: PathBuf,
    /// Number of regimes; defaults to the largest label plus one.
    #[arg(long)]
    pub regimes: Option<usize>,
    /// Risk-free rate per period.
    #[arg(long, default_value_t = 0.0)]
    pub rf: f64,
}

#[derive(Debug, Args)]
pub struct SolveDpArgs {
    /// Solve the penalized-shorting variant.
    #[arg(long)]
    pub adjusted: bool,
}

#[derive(Debug, Args)]
pub struct SolveLmctsArgs {
    /// Skip Savitzky-Golay smoothing.
    #[arg(long)]
    pub no_smooth: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Base policy: dp or lmcts.
    #[arg(long, default_value = "dp")]
    pub base: String,
    /// Base table file; solved from the configuration when absent.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Cost rate; defaults to the configured one.
    #[arg(long)]
    pub cost_rate: Option<f64>,
}

#[derive(Debug, Args)]
pub struct EvaluateArgs {
    /// dp, lmcts, dp_nn, lmcts_nn or adjusted_dp.
    #[arg(long)]
    pub method: Method,
    /// Base table file; solved from the configuration when absent.
    #[arg(long)]
    pub table: Option<PathBuf>,
    /// Network parameters for the *_nn methods; trained when absent.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub cost_rate: Option<f64>,
    /// Evaluation path count; defaults to the configured one.
    #[arg(long)]
    pub paths: Option<usize>,
}

fn config(cli: &Cli) -> Result<RunConfig> {
    let path = cli.config.as_ref().ok_or_else(|| Error::invalid("--config", "this command needs a model file"))?;
    let mut cfg = load_model(path)?;
    if let Some(seed) = cli.seed {
        cfg.set_seed(seed);
    }
    Ok(cfg)
}

fn provenance(cfg: &RunConfig, cli: &Cli) -> Vec<(&'static str, String)> {
    let mut v = vec![("seed", cfg.seed.to_string())];
    if let Some(p) = &cli.config {
        v.push(("config", p.display().to_string()));
    }
    v
}

/// Base policy from a policy or lookup table file.
pub fn load_base(path: &Path) -> Result<BasePolicy> {
    match read_header(path)?.get("kind") {
        Some("policy") => Ok(BasePolicy::from_policy(&load_table::<PolicyTable>(path)?)),
        Some("lookup") => BasePolicy::from_lookup(&load_table::<LookupTable>(path)?),
        other => Err(Error::Table { path: path.to_path_buf(), line: 1, reason: format!("kind {other:?} is not a base table") }),
    }
}

fn base_for(cfg: &RunConfig, method: Method, table: Option<&Path>) -> Result<BasePolicy> {
    if let Some(p) = table {
        return load_base(p);
    }
    solve_base(cfg, method).map_err(|e| in_stage(method.name(), "solve", e))
}

fn say(line: String) {
    use std::io::Write;
    // a closed pipe downstream is not an error for us
    let _ = writeln!(std::io::stdout(), "{line}");
}

pub fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.threads {
        // a second initialization only fails if a pool already exists
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n.max(1)).build_global();
    }
    let out = &cli.out;
    match &cli.command {
        Command::Calibrate(a) => {
            let data = read_labeled_returns(&a.returns)?;
            let regimes = a.regimes.unwrap_or_else(|| data.labels.iter().max().map_or(1, |k| k + 1));
            let model = estimate_labeled(&data.returns, &data.labels, regimes, vec![a.rf])?;
            let market = MarketSection {
                assets: data.assets,
                regimes,
                mu: (0..regimes).map(|k| model.mu(k).to_vec()).collect(),
                cov: (0..regimes).map(|k| model.cov(k).to_vec()).collect(),
                trans: model.trans().to_vec(),
                rf: RateSpec::Shared(a.rf),
            };
            // other sections come from --config when given
            let file = match &cli.config {
                Some(p) => {
                    let text = std::fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                    ModelFile { market, ..ModelFile::parse(&text, p)? }
                }
                None => ModelFile {
                    market,
                    run: Default::default(),
                    utility: Default::default(),
                    dp: Default::default(),
                    lmcts: Default::default(),
                    nn: Default::default(),
                    evaluation: Default::default(),
                },
            };
            file.clone().into_config()?;
            let p = out.join("model.toml");
            write_atomic(&p, file.to_toml().as_bytes())?;
            say(format!("wrote {}", p.display()));
        }
        Command::SolveDp(a) => {
            let cfg = config(cli)?;
            let (name, table) = if a.adjusted {
                ("adjusted_dp", solve_adjusted_dp(&cfg))
            } else {
                ("dp", solve_dp(&cfg))
            };
            let table = table.map_err(|e| in_stage(name, "solve", e))?;
            let p = out.join(format!("{name}_policy.table"));
            save_table(&p, &table, &provenance(&cfg, cli))?;
            say(format!("{name}: value at t=0 spans [{:.6}, {:.6}]", min(&table.value[0]), max(&table.value[0])));
            if !table.unconverged.is_empty() {
                say(format!("{name}: {} stage searches hit the move cap", table.unconverged.len()));
            }
            say(format!("wrote {}", p.display()));
        }
        Command::SolveLmcts(a) => {
            let mut cfg = config(cli)?;
            if a.no_smooth {
                cfg.smoothing = None;
            }
            let table = solve_lmcts(&cfg).map_err(|e| in_stage("lmcts", "solve", e))?;
            let p = out.join("lmcts_lookup.table");
            save_table(&p, &table, &provenance(&cfg, cli))?;
            say(format!("lmcts: {} entries", table.len()));
            say(format!("wrote {}", p.display()));
        }
        Command::TrainNn(a) => {
            let cfg = config(cli)?;
            let method = match a.base.as_str() {
                "dp" => Method::DpNn,
                "lmcts" => Method::LmctsNn,
                other => return Err(Error::invalid("--base", format!("`{other}` is not dp or lmcts"))),
            };
            let c = a.cost_rate.unwrap_or(cfg.cost_rate);
            let base = base_for(&cfg, method, a.table.as_deref())?;
            let report = train_nn(&cfg, &base, c).map_err(|e| in_stage(method.name(), "train", e))?;
            let mut extra = provenance(&cfg, cli);
            extra.push(("cost_rate", c.to_string()));
            extra.push(("best_epoch", report.best_epoch.to_string()));
            let p = out.join(format!("{}.table", method.name()));
            save_table(&p, &report.params, &extra)?;
            let mut log = String::from("epoch,train_loss,validation_loss,learning_rate\n");
            for e in &report.history {
                log.push_str(&format!("{},{},{},{}\n", e.epoch, e.train_loss, e.validation_loss, e.learning_rate));
            }
            write_atomic(&out.join(format!("{}_training.csv", method.name())), log.as_bytes())?;
            say(format!(
                "{}: validation loss {:.6} -> {:.6} (epoch {}, {} restarts)",
                method.name(),
                report.initial_validation_loss,
                report.best_validation_loss,
                report.best_epoch,
                report.restarts
            ));
            say(format!("wrote {}", p.display()));
        }
        Command::Evaluate(a) => {
            let mut cfg = config(cli)?;
            if let Some(n) = a.paths {
                cfg.eval_paths = n;
            }
            let c = a.cost_rate.unwrap_or(cfg.cost_rate);
            let base = base_for(&cfg, a.method, a.table.as_deref())?;
            let name = a.method.name();
            let spec = eval_spec(&cfg, c);
            let report = if a.method.uses_network() {
                let params = match &a.params {
                    Some(p) => load_table::<NtzParams>(p)?,
                    None => train_nn(&cfg, &base, c).map_err(|e| in_stage(name, "train", e))?.params,
                };
                evaluate(name, Policy::Zone { base: &base, params: &params }, &cfg.model, &spec)
            } else {
                evaluate(name, Policy::Rebalance(&base), &cfg.model, &spec)
            }
            .map_err(|e| in_stage(name, "evaluate", e))?;
            write_atomic(&out.join(format!("{name}.csv")), report_csv(&report).as_bytes())?;
            write_atomic(&out.join(format!("{name}_summary.csv")), summary_csv(std::slice::from_ref(&report)).as_bytes())?;
            say(format!("{name}: E[U] = {:.6} +/- {:.6}", report.expected_utility, report.utility_se));
        }
        Command::Compare => {
            let cfg = config(cli)?;
            let cmp = run_comparison(&cfg, Some(out))?;
            for r in &cmp.reports {
                let goal = r.goal_probability.map_or(String::new(), |p| format!(", P(goal) = {p:.4}"));
                say(format!("{}: E[U] = {:.6} +/- {:.6}{goal}", r.method, r.expected_utility, r.utility_se));
            }
            say(format!("wrote {} files to {}", cmp.files.len(), out.display()));
        }
    }
    Ok(())
}

fn min(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::INFINITY, f64::min)
}

fn max(x: &[f64]) -> f64 {
    x.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}
