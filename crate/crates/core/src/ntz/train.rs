use rand::seq::SliceRandom;

use super::network::{NtzLayout, NtzParams};
use super::unroll::{gradient, unroll_loss, BasePolicy, UnrollSpec};
use crate::error::{Error, Result};
use crate::market::{Belief, Constraints, RegimeModel, Utility};
use crate::rng::{self, Domain};
use crate::sim::{path_from_stream, SimPath};

/// Learning-rate halvings allowed after a non-finite loss.
pub const MAX_RESTARTS: usize = 3;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub hidden: usize,
    pub epochs: usize,
    /// Paths per gradient step.
    pub batch: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    pub cost_rate: f64,
    /// Objective. Goal indicators are trained through their smoothed form.
    pub utility: Utility,
    pub initial_wealth: f64,
    pub train_paths: usize,
    pub validation_paths: usize,
    /// `None` enables wealth input and center head for goal objectives only.
    pub wealth_feature: Option<bool>,
    pub center_head: Option<bool>,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            hidden: 32,
            epochs: 20,
            batch: 256,
            learning_rate: 1e-3,
            momentum: 0.9,
            cost_rate: 0.01,
            utility: Utility::Crra { gamma: -1.0 },
            initial_wealth: 1.0,
            train_paths: 4096,
            validation_paths: 2048,
            wealth_feature: None,
            center_head: None,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let check = |ok: bool, field: &str, reason: String| {
            if ok {
                Ok(())
            } else {
                Err(Error::invalid(format!("nn.{field}"), reason))
            }
        };
        check(self.learning_rate > 0.0 && self.learning_rate.is_finite(), "learning_rate", format!("must be positive, got {}", self.learning_rate))?;
        check(self.batch >= 1, "batch", "must be at least 1".into())?;
        check(self.hidden >= 1, "hidden", "must be at least 1".into())?;
        check((0.0..1.0).contains(&self.momentum), "momentum", format!("must lie in [0, 1), got {}", self.momentum))?;
        check(self.cost_rate >= 0.0 && self.cost_rate.is_finite(), "cost_rate", format!("must be non-negative, got {}", self.cost_rate))?;
        check(self.initial_wealth > 0.0, "initial_wealth", format!("must be positive, got {}", self.initial_wealth))?;
        check(self.train_paths >= 1, "train_paths", "must be at least 1".into())?;
        check(self.validation_paths >= 1, "validation_paths", "must be at least 1".into())?;
        self.utility.validate()
    }

    fn goal_objective(&self) -> bool {
        self.utility.goal().is_some()
    }

    pub fn layout(&self, n_regimes: usize, n_risky: usize) -> NtzLayout {
        NtzLayout {
            n_regimes,
            n_risky,
            hidden: self.hidden,
            wealth_feature: self.wealth_feature.unwrap_or(self.goal_objective()),
            center_head: self.center_head.unwrap_or(self.goal_objective()),
        }
    }

    pub fn unroll_spec(&self, constraints: Constraints) -> UnrollSpec {
        UnrollSpec {
            cost_rate: self.cost_rate,
            utility: self.utility.smoothed(),
            initial_wealth: self.initial_wealth,
            constraints,
            initial_holdings: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
    pub learning_rate: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Parameters with the lowest validation loss seen, initial ones included.
    pub params: NtzParams,
    pub best_epoch: usize,
    pub initial_validation_loss: f64,
    pub best_validation_loss: f64,
    pub history: Vec<EpochLog>,
    pub restarts: usize,
}

/// Training and validation paths for `cfg`, drawn from their own domains.
pub fn training_paths(
    model: &RegimeModel,
    start: &Belief,
    horizon: usize,
    cfg: &TrainConfig,
) -> (Vec<SimPath>, Vec<SimPath>) {
    use rayon::prelude::*;
    let draw = |n: usize, domain: Domain| -> Vec<SimPath> {
        (0..n as u64)
            .into_par_iter()
            .map(|i| path_from_stream(model, start, horizon, cfg.seed, domain, i))
            .collect()
    };
    (draw(cfg.train_paths, Domain::NnTrain), draw(cfg.validation_paths, Domain::NnValidation))
}

/// Fits zone widths around `base` by momentum SGD on simulated paths.
pub fn train(
    base: &BasePolicy,
    model: &RegimeModel,
    start: &Belief,
    horizon: usize,
    constraints: Constraints,
    cfg: &TrainConfig,
) -> Result<TrainReport> {
    cfg.validate()?;
    if let Some(h) = base.horizon() {
        if h < horizon {
            return Err(Error::invalid("nn.base", format!("base covers {h} steps, horizon is {horizon}")));
        }
    }
    if base.n_risky() != model.n_risky() {
        return Err(Error::invalid("nn.base", "asset count differs from the model"));
    }
    let (train_set, val_set) = training_paths(model, start, horizon, cfg);
    train_on(base, &train_set, &val_set, constraints, cfg, NtzParams::init(cfg.layout(model.n_regimes(), model.n_risky()), cfg.seed))
}

/// Training loop on given path sets, starting from `init`.
pub fn train_on(
    base: &BasePolicy,
    train_set: &[SimPath],
    val_set: &[SimPath],
    constraints: Constraints,
    cfg: &TrainConfig,
    init: NtzParams,
) -> Result<TrainReport> {
    cfg.validate()?;
    init.validate()?;
    let spec = cfg.unroll_spec(constraints);
    let solver_err = |stage: String, reason: String| Error::Solver { method: "nn".into(), stage, reason };

    let initial_val = unroll_loss(&init, base, val_set, &spec)?;
    if !initial_val.is_finite() {
        return Err(solver_err("initial validation".into(), "validation loss of the initial parameters is not finite".into()));
    }
    let mut report = TrainReport {
        params: init.clone(),
        best_epoch: 0,
        initial_validation_loss: initial_val,
        best_validation_loss: initial_val,
        history: Vec::with_capacity(cfg.epochs),
        restarts: 0,
    };
    let mut params = init;
    let mut checkpoint = params.clone();
    let mut velocity = vec![0.0; params.values.len()];
    let mut lr = cfg.learning_rate;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut shuffle = rng::stream(cfg.seed, Domain::Misc, u64::from(Domain::NnTrain as u8));
    let mut batch: Vec<&SimPath> = Vec::with_capacity(cfg.batch);

    let mut epoch = 0;
    while epoch < cfg.epochs {
        order.shuffle(&mut shuffle);
        let mut loss_sum = 0.0;
        let mut steps = 0usize;
        let mut diverged = false;
        for chunk in order.chunks(cfg.batch) {
            batch.clear();
            batch.extend(chunk.iter().map(|i| &train_set[*i]));
            let (loss, grad) = gradient(&params, base, &batch, &spec)?;
            if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                diverged = true;
                break;
            }
            for ((p, v), g) in params.values.iter_mut().zip(&mut velocity).zip(&grad) {
                *v = cfg.momentum * *v - lr * g;
                *p += *v;
            }
            loss_sum += loss;
            steps += 1;
        }
        let val = if diverged { f64::NAN } else { unroll_loss(&params, base, val_set, &spec)? };
        if diverged || !val.is_finite() || params.validate().is_err() {
            report.restarts += 1;
            if report.restarts > MAX_RESTARTS {
                return Err(solver_err(format!("epoch {}", epoch + 1), format!("loss diverged after {MAX_RESTARTS} learning-rate halvings")));
            }
            lr *= 0.5;
            params = checkpoint.clone();
            velocity.fill(0.0);
            continue;
        }
        checkpoint = params.clone();
        report.history.push(EpochLog {
            epoch: epoch + 1,
            train_loss: loss_sum / steps.max(1) as f64,
            validation_loss: val,
            learning_rate: lr,
        });
        if val < report.best_validation_loss {
            report.best_validation_loss = val;
            report.best_epoch = epoch + 1;
            report.params = params.clone();
        }
        epoch += 1;
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::market::Allocation;

    fn model() -> RegimeModel {
        RegimeModel::new(
            vec![vec![0.06, 0.03], vec![-0.04, 0.01]],
            vec![
                vec![vec![0.04, 0.006], vec![0.006, 0.02]],
                vec![vec![0.08, 0.01], vec![0.01, 0.03]],
            ],
            vec![vec![0.9, 0.1], vec![0.2, 0.8]],
            vec![0.01],
        )
        .unwrap()
    }

    fn small_cfg() -> TrainConfig {
        TrainConfig { hidden: 4, epochs: 2, batch: 32, train_paths: 64, validation_paths: 64, seed: 9, ..TrainConfig::default() }
    }

    #[test]
    fn zero_epochs_returns_init() {
        let m = model();
        let cfg = TrainConfig { epochs: 0, ..small_cfg() };
        let base = BasePolicy::Constant(Allocation::new(vec![0.3, 0.3, 0.4]).unwrap());
        let r = train(&base, &m, &Belief::uniform(2), 3, Constraints::NoShort, &cfg).unwrap();
        assert_eq!(r.params, NtzParams::init(cfg.layout(2, 2), cfg.seed));
        assert!(r.history.is_empty());
    }

    #[test]
    fn training_is_reproducible_and_never_worse_on_validation() {
        let m = model();
        let cfg = small_cfg();
        let base = BasePolicy::Constant(Allocation::new(vec![0.3, 0.3, 0.4]).unwrap());
        let a = train(&base, &m, &Belief::uniform(2), 3, Constraints::NoShort, &cfg).unwrap();
        let b = train(&base, &m, &Belief::uniform(2), 3, Constraints::NoShort, &cfg).unwrap();
        assert_eq!(a, b);
        assert!(a.best_validation_loss <= a.initial_validation_loss);
        assert_eq!(a.history.len(), 2);
    }

    #[test]
    fn goal_objective_enables_wealth_and_center() {
        let cfg = TrainConfig { utility: Utility::Goal { goal: 1.2 }, ..TrainConfig::default() };
        let l = cfg.layout(2, 2);
        assert!(l.wealth_feature && l.center_head);
        assert!(!TrainConfig::default().layout(2, 2).center_head);
    }

    #[test]
    fn rejects_bad_config() {
        let cfg = TrainConfig { learning_rate: 0.0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = TrainConfig { batch: 0, ..TrainConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn divergence_exhausts_restarts() {
        let m = model();
        let cfg = small_cfg();
        let base = BasePolicy::Constant(Allocation::new(vec![0.3, 0.3, 0.4]).unwrap());
        let (mut tr, va) = training_paths(&m, &Belief::uniform(2), 3, &cfg);
        let bad = SimPath::from_parts(2, vec![f64::NAN; 6], vec![0; 3], vec![0.01; 3], tr[0].beliefs.clone());
        tr.iter_mut().for_each(|p| *p = bad.clone());
        let init = NtzParams::init(cfg.layout(2, 2), 1);
        let r = train_on(&base, &tr, &va, Constraints::NoShort, &cfg, init);
        match r {
            Err(Error::Solver { method, .. }) => assert_eq!(method, "nn"),
            other => panic!("expected divergence, got {other:?}"),
        }
    }
}
