use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dp::{default_penalty, DpOptions, SearchOptions};
use crate::error::{Error, Result};
use crate::experiment::Method;
use crate::lmcts::{FinalSelection, KernelConfig, LmctsConfig, DEFAULT_DEVIATIONS};
use crate::market::{Belief, Constraints, RegimeModel, Utility, DEFAULT_STEEPNESS};
use crate::ntz::TrainConfig;

/// On-disk model and run description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelFile {
    pub market: MarketSection,
    #[serde(default)]
    pub run: RunSection,
    #[serde(default)]
    pub utility: UtilitySection,
    #[serde(default)]
    pub dp: DpSection,
    #[serde(default)]
    pub lmcts: LmctsSection,
    #[serde(default)]
    pub nn: NnSection,
    #[serde(default)]
    pub evaluation: EvaluationSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum RateSpec {
    Shared(f64),
    PerRegime(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MarketSection {
    pub assets: Vec<String>,
    pub regimes: usize,
    pub mu: Vec<Vec<f64>>,
    pub cov: Vec<Vec<Vec<f64>>>,
    pub trans: Vec<Vec<f64>>,
    pub rf: RateSpec,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintKind {
    NoShort,
    Short,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub horizon: usize,
    pub constraints: ConstraintKind,
    pub short_bound: f64,
    pub cost_rate: f64,
    pub initial_wealth: f64,
    /// Defaults to the stationary distribution of the chain.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_belief: Option<Vec<f64>>,
    pub grid_step: f64,
    pub seed: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        RunSection {
            horizon: 10,
            constraints: ConstraintKind::NoShort,
            short_bound: 1.0,
            cost_rate: 0.01,
            initial_wealth: 1000.0,
            initial_belief: None,
            grid_step: 0.05,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UtilityKind {
    Crra,
    Goal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct UtilitySection {
    pub kind: UtilityKind,
    pub gamma: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub goal: Option<f64>,
    /// Logistic steepness per unit of currency used when training on a goal.
    pub steepness: f64,
}

impl Default for UtilitySection {
    fn default() -> Self {
        UtilitySection {
            kind: UtilityKind::Crra,
            gamma: -1.0,
            goal: None,
            steepness: DEFAULT_STEEPNESS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DpSection {
    pub mc_paths: usize,
    pub antithetic: bool,
    pub coarse_step: f64,
    /// Zero keeps the coarse lattice argmax.
    pub refine_step: f64,
    pub max_scan: usize,
    pub max_moves: usize,
    /// Shorting penalty of the adjusted variant; defaults to ten utility units.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub penalty: Option<f64>,
}

impl Default for DpSection {
    fn default() -> Self {
        let s = SearchOptions::default();
        DpSection {
            mc_paths: 2000,
            antithetic: true,
            coarse_step: s.coarse_step,
            refine_step: s.refine_step.unwrap_or(0.0),
            max_scan: s.max_scan,
            max_moves: s.max_moves,
            penalty: None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SelectionKind {
    MostVisited,
    BestKernelValue,
    PoolMean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LmctsSection {
    pub iterations: usize,
    pub batch: usize,
    pub pool_paths: usize,
    pub antithetic_pool: bool,
    pub bandwidth: f64,
    pub tau: f64,
    pub explore_c: f64,
    pub widen_slope: f64,
    pub widen_intercept: f64,
    pub deviations: Vec<f64>,
    pub final_selection: SelectionKind,
    pub control_variate: bool,
    /// Zero disables smoothing.
    pub smoothing_window: usize,
    pub smoothing_order: usize,
}

impl Default for LmctsSection {
    fn default() -> Self {
        let c = LmctsConfig::default();
        LmctsSection {
            iterations: c.iterations,
            batch: c.batch,
            pool_paths: c.pool_paths,
            antithetic_pool: c.antithetic_pool,
            bandwidth: c.kernel.bandwidth,
            tau: c.kernel.tau,
            explore_c: c.kernel.explore_c,
            widen_slope: c.kernel.widen_slope,
            widen_intercept: c.kernel.widen_intercept,
            deviations: DEFAULT_DEVIATIONS.to_vec(),
            final_selection: SelectionKind::PoolMean,
            control_variate: c.control_variate,
            smoothing_window: 11,
            smoothing_order: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NnSection {
    pub hidden: usize,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub train_paths: usize,
    pub validation_paths: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub wealth_feature: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub center_head: Option<bool>,
}

impl Default for NnSection {
    fn default() -> Self {
        let c = TrainConfig::default();
        NnSection {
            hidden: c.hidden,
            epochs: c.epochs,
            batch: c.batch,
            learning_rate: c.learning_rate,
            momentum: c.momentum,
            train_paths: c.train_paths,
            validation_paths: c.validation_paths,
            wealth_feature: None,
            center_head: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EvaluationSection {
    pub paths: usize,
    pub methods: Vec<Method>,
    /// Defaults to `[run.cost_rate]`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cost_rates: Option<Vec<f64>>,
}

impl Default for EvaluationSection {
    fn default() -> Self {
        EvaluationSection {
            paths: 100_000,
            methods: vec![Method::Dp, Method::Lmcts, Method::DpNn, Method::LmctsNn, Method::AdjustedDp],
            cost_rates: None,
        }
    }
}

/// Validated run description.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub assets: Vec<String>,
    pub model: RegimeModel,
    pub horizon: usize,
    pub constraints: Constraints,
    pub cost_rate: f64,
    pub initial_wealth: f64,
    pub initial_belief: Belief,
    /// Objective used for evaluation (goal indicator or CRRA).
    pub utility: Utility,
    /// Target wealth whose reach probability is reported, for either objective.
    pub goal: Option<f64>,
    /// CRRA utility the DP and LMCTS bases are solved for.
    pub base_utility: Utility,
    pub grid_step: f64,
    pub seed: u64,
    pub dp: DpOptions,
    pub adjusted_penalty: f64,
    pub lmcts: LmctsConfig,
    /// Savitzky-Golay `(window, order)` applied to LMCTS tables.
    pub smoothing: Option<(usize, usize)>,
    pub nn: TrainConfig,
    pub eval_paths: usize,
    pub methods: Vec<Method>,
    pub cost_rates: Vec<f64>,
}

impl RunConfig {
    /// Overrides every seed.
    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.dp.seed = seed;
        self.lmcts.seed = seed;
        self.nn.seed = seed;
    }

    /// Training configuration for a given cost rate.
    pub fn nn_at(&self, cost_rate: f64) -> TrainConfig {
        TrainConfig { cost_rate, ..self.nn.clone() }
    }
}

fn check(ok: bool, field: &str, reason: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::invalid(field, reason))
    }
}

fn prefixed(prefix: &str, e: Error) -> Error {
    match e {
        Error::Invalid { field, reason } => Error::Invalid { field: format!("{prefix}.{field}"), reason },
        other => other,
    }
}

impl ModelFile {
    pub fn parse(text: &str, path: &Path) -> Result<Self> {
        let parse_err = |message: String| Error::Parse { path: path.to_path_buf(), message };
        let de = toml::Deserializer::parse(text).map_err(|e| parse_err(e.to_string()))?;
        serde_path_to_error::deserialize(de).map_err(|e| {
            let at = e.path().to_string();
            parse_err(format!("at `{at}`: {}", e.into_inner()))
        })
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model files always serialize")
    }

    pub fn into_config(self) -> Result<RunConfig> {
        let m = &self.market;
        check(m.regimes >= 1, "market.regimes", "must be at least 1")?;
        check(
            m.mu.len() == m.regimes,
            "market.mu",
            format!("has {} rows, regimes = {}", m.mu.len(), m.regimes),
        )?;
        let n = m.assets.len();
        check(n >= 1, "market.assets", "at least one risky asset is required")?;
        if let Some(k) = m.mu.iter().position(|row| row.len() != n) {
            return Err(Error::invalid(
                format!("market.mu[{k}]"),
                format!("has {} entries for {n} assets", m.mu[k].len()),
            ));
        }
        let rf = match &m.rf {
            RateSpec::Shared(r) => vec![*r],
            RateSpec::PerRegime(v) => v.clone(),
        };
        let model = RegimeModel::new(m.mu.clone(), m.cov.clone(), m.trans.clone(), rf).map_err(|e| prefixed("market", e))?;

        let r = &self.run;
        check(r.horizon >= 1, "run.horizon", "must be at least 1")?;
        let constraints = match r.constraints {
            ConstraintKind::NoShort => Constraints::NoShort,
            ConstraintKind::Short => Constraints::Short { bound: r.short_bound },
        };
        constraints.validate().map_err(|e| prefixed("run", e))?;
        check(r.cost_rate >= 0.0 && r.cost_rate.is_finite(), "run.cost_rate", "must be non-negative")?;
        check(r.initial_wealth > 0.0 && r.initial_wealth.is_finite(), "run.initial_wealth", "must be positive")?;
        let divisions = (1.0 / r.grid_step).round();
        check(
            r.grid_step > 0.0 && (divisions * r.grid_step - 1.0).abs() < 1e-9,
            "run.grid_step",
            format!("must divide 1 evenly, got {}", r.grid_step),
        )?;
        let initial_belief = match &r.initial_belief {
            Some(p) => {
                check(p.len() == m.regimes, "run.initial_belief", format!("has {} entries for {} regimes", p.len(), m.regimes))?;
                Belief::new(p.clone()).map_err(|e| prefixed("run.initial_belief", e))?
            }
            None => Belief::new(model.stationary()).map_err(|e| prefixed("run.initial_belief", e))?,
        };

        let u = &self.utility;
        let (utility, training_utility) = match u.kind {
            UtilityKind::Crra => (Utility::Crra { gamma: u.gamma }, Utility::Crra { gamma: u.gamma }),
            UtilityKind::Goal => {
                let goal = u.goal.ok_or_else(|| Error::invalid("utility.goal", "required when kind = \"goal\""))?;
                (Utility::Goal { goal }, Utility::SmoothedGoal { goal, steepness: u.steepness })
            }
        };
        utility.validate().map_err(|e| prefixed("utility", e))?;
        if let Some(g) = u.goal {
            check(g > 0.0 && g.is_finite(), "utility.goal", "must be positive")?;
        }
        training_utility.validate()?;

        let d = &self.dp;
        let search = SearchOptions {
            coarse_step: d.coarse_step,
            refine_step: (d.refine_step > 0.0).then_some(d.refine_step),
            max_scan: d.max_scan,
            max_moves: d.max_moves,
        };
        check(d.mc_paths >= 1, "dp.mc_paths", "must be at least 1")?;
        check(d.coarse_step > 0.0 && d.coarse_step <= 1.0, "dp.coarse_step", "must lie in (0, 1]")?;
        let dp = DpOptions { mc_paths: d.mc_paths, antithetic: d.antithetic, search: search.clone(), penalty: 0.0, seed: r.seed };
        // penalty is in units of unit-wealth utility
        let adjusted_penalty = d.penalty.unwrap_or_else(|| default_penalty(&utility));
        check(adjusted_penalty >= 0.0, "dp.penalty", "must be non-negative")?;

        let l = &self.lmcts;
        let lmcts = LmctsConfig {
            kernel: KernelConfig {
                bandwidth: l.bandwidth,
                tau: l.tau,
                explore_c: l.explore_c,
                widen_slope: l.widen_slope,
                widen_intercept: l.widen_intercept,
            },
            iterations: l.iterations,
            batch: l.batch,
            deviations: l.deviations.clone(),
            final_selection: match l.final_selection {
                SelectionKind::MostVisited => FinalSelection::MostVisited,
                SelectionKind::BestKernelValue => FinalSelection::BestKernelValue,
                SelectionKind::PoolMean => FinalSelection::PoolMean,
            },
            control_variate: l.control_variate,
            pool_paths: l.pool_paths,
            antithetic_pool: l.antithetic_pool,
            initial_wealth: 1.0,
            seed_search: search,
            seed: r.seed,
        };
        lmcts.validate()?;
        let smoothing = (l.smoothing_window > 0).then_some((l.smoothing_window, l.smoothing_order));
        if let Some((w, o)) = smoothing {
            check(w % 2 == 1 && o < w, "lmcts.smoothing_window", format!("window {w} must be odd and exceed order {o}"))?;
        }

        let nn = &self.nn;
        let nn = TrainConfig {
            hidden: nn.hidden,
            epochs: nn.epochs,
            batch: nn.batch,
            learning_rate: nn.learning_rate,
            momentum: nn.momentum,
            cost_rate: r.cost_rate,
            utility: training_utility,
            initial_wealth: r.initial_wealth,
            train_paths: nn.train_paths,
            validation_paths: nn.validation_paths,
            wealth_feature: nn.wealth_feature,
            center_head: nn.center_head,
            seed: r.seed,
        };
        nn.validate()?;

        let e = &self.evaluation;
        check(e.paths >= 2, "evaluation.paths", "must be at least 2")?;
        check(!e.methods.is_empty(), "evaluation.methods", "must name at least one method")?;
        let cost_rates = e.cost_rates.clone().unwrap_or_else(|| vec![r.cost_rate]);
        check(!cost_rates.is_empty(), "evaluation.cost_rates", "must not be empty")?;
        if let Some(i) = cost_rates.iter().position(|c| !(*c >= 0.0 && c.is_finite())) {
            return Err(Error::invalid(format!("evaluation.cost_rates[{i}]"), "must be non-negative"));
        }

        Ok(RunConfig {
            assets: m.assets.clone(),
            model,
            horizon: r.horizon,
            constraints,
            cost_rate: r.cost_rate,
            initial_wealth: r.initial_wealth,
            initial_belief,
            utility,
            goal: u.goal,
            base_utility: Utility::Crra { gamma: u.gamma },
            grid_step: r.grid_step,
            seed: r.seed,
            dp,
            adjusted_penalty,
            lmcts,
            smoothing,
            nn,
            eval_paths: e.paths,
            methods: e.methods.clone(),
            cost_rates,
        })
    }
}

/// Reads and validates a model file.
pub fn load_model(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    ModelFile::parse(&text, path)?.into_config()
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"
        [market]
        assets = ["A"]
        regimes = 1
        mu = [[0.05]]
        cov = [[[0.04]]]
        trans = [[1.0]]
        rf = 0.01
    "#;

    fn load(text: &str) -> Result<RunConfig> {
        ModelFile::parse(text, Path::new("test.toml"))?.into_config()
    }

    fn field_of(e: Error) -> String {
        match e {
            Error::Invalid { field, .. } => field,
            Error::Parse { message, .. } => message,
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn minimal_file_is_valid() {
        let c = load(MINIMAL).unwrap();
        assert_eq!(c.model.n_risky(), 1);
        assert_eq!(c.initial_belief.probs(), &[1.0]);
        assert_eq!(c.initial_wealth, 1000.0);
        assert_eq!(c.cost_rates, vec![0.01]);
    }

    #[test]
    fn bad_transition_row_names_the_row() {
        let text = r#"
            [market]
            assets = ["A"]
            regimes = 2
            mu = [[0.05], [0.0]]
            cov = [[[0.04]], [[0.09]]]
            trans = [[0.9, 0.1], [0.5, 0.4]]
            rf = 0.01
        "#;
        assert_eq!(field_of(load(text).unwrap_err()), "market.trans[1]");
    }

    #[test]
    fn covariance_repair_threshold() {
        let with = |eig: f64| {
            // eigenvalues 0.04 and eig with eigenvectors (1, 1) and (1, -1)
            let (a, b) = ((0.04 + eig) / 2.0, (0.04 - eig) / 2.0);
            format!(
                "[market]\nassets = [\"A\", \"B\"]\nregimes = 1\nmu = [[0.05, 0.03]]\ncov = [[[{a:e}, {b:e}], [{b:e}, {a:e}]]]\ntrans = [[1.0]]\nrf = 0.0\n"
            )
        };
        assert!(load(&with(-1e-3)).is_err());
        assert!(load(&with(-1e-13)).is_ok());
    }

    #[test]
    fn unknown_keys_are_rejected_with_a_path() {
        let text = format!("{MINIMAL}\n[dp]\nmc_path = 10\n");
        let msg = field_of(load(&text).unwrap_err());
        assert!(msg.contains("dp") && msg.contains("mc_path"), "{msg}");
    }

    #[test]
    fn goal_needs_a_target() {
        let text = format!("{MINIMAL}\n[utility]\nkind = \"goal\"\n");
        assert_eq!(field_of(load(&text).unwrap_err()), "utility.goal");
        let text = format!("{MINIMAL}\n[utility]\nkind = \"goal\"\ngoal = 1580.0\n");
        let c = load(&text).unwrap();
        assert_eq!(c.utility, Utility::Goal { goal: 1580.0 });
        assert!(matches!(c.nn.utility, Utility::SmoothedGoal { .. }));
    }

    #[test]
    fn round_trips_through_text() {
        let f = ModelFile::parse(MINIMAL, Path::new("m.toml")).unwrap();
        let again = ModelFile::parse(&f.to_toml(), Path::new("m.toml")).unwrap();
        assert_eq!(f, again);
    }

    #[test]
    fn mismatched_assets_are_rejected() {
        let text = MINIMAL.replace("assets = [\"A\"]", "assets = [\"A\", \"B\"]");
        assert_eq!(field_of(load(&text).unwrap_err()), "market.mu[0]");
    }
}
