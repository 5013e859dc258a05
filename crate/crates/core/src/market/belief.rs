use std::sync::atomic::{AtomicU64, Ordering};

use super::model::RegimeModel;
use crate::error::{Error, Result};

static DEGENERATE_UPDATES: AtomicU64 = AtomicU64::new(0);

/// Number of Bayes updates, process-wide, in which every prior-weighted
/// likelihood vanished and the prior was kept.
pub fn degenerate_update_count() -> u64 {
    DEGENERATE_UPDATES.load(Ordering::Relaxed)
}

/// Posterior probability vector over regimes.
#[derive(Debug, Clone, PartialEq)]
pub struct Belief(Vec<f64>);

impl Belief {
    /// Accepts any nonnegative vector whose entries sum to one within 1e-9
    /// and renormalizes it.
    pub fn new(p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::invalid("belief", "empty probability vector"));
        }
        if let Some(i) = p.iter().position(|x| !x.is_finite() || *x < 0.0) {
            return Err(Error::invalid(format!("belief[{i}]"), "must be finite and nonnegative"));
        }
        let s: f64 = p.iter().sum();
        if (s - 1.0).abs() > 1e-9 {
            return Err(Error::invalid("belief", format!("sums to {s}, expected 1")));
        }
        Ok(Belief(p.into_iter().map(|x| x / s).collect()))
    }

    pub fn point(n_regimes: usize, regime: usize) -> Self {
        let mut p = vec![0.0; n_regimes];
        p[regime] = 1.0;
        Belief(p)
    }

    pub fn uniform(n_regimes: usize) -> Self {
        Belief(vec![1.0 / n_regimes as f64; n_regimes])
    }

    pub(crate) fn from_vec_unchecked(p: Vec<f64>) -> Self {
        Belief(p)
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Bayes rule with per-regime log-likelihoods. The maximum
    /// log-likelihood among regimes with prior mass is subtracted before
    /// exponentiating; if nothing survives, the prior is returned and the
    /// degenerate-update counter is bumped.
    pub fn posterior_from_log_likelihoods(&self, log_lik: &[f64]) -> Belief {
        let max = self
            .0
            .iter()
            .zip(log_lik)
            .filter(|(p, l)| **p > 0.0 && l.is_finite())
            .map(|(_, l)| *l)
            .fold(f64::NEG_INFINITY, f64::max);
        if !max.is_finite() {
            DEGENERATE_UPDATES.fetch_add(1, Ordering::Relaxed);
            return self.clone();
        }
        let w: Vec<f64> = self
            .0
            .iter()
            .zip(log_lik)
            .map(|(p, l)| if *p > 0.0 && l.is_finite() { p * (l - max).exp() } else { 0.0 })
            .collect();
        let s: f64 = w.iter().sum();
        if !(s > 0.0 && s.is_finite()) {
            DEGENERATE_UPDATES.fetch_add(1, Ordering::Relaxed);
            return self.clone();
        }
        Belief(w.into_iter().map(|x| x / s).collect())
    }

    /// Bayes rule with likelihood values rather than logs.
    pub fn posterior_from_likelihoods(&self, lik: &[f64]) -> Belief {
        let logs: Vec<f64> = lik.iter().map(|l| l.ln()).collect();
        self.posterior_from_log_likelihoods(&logs)
    }
}

/// Reweights the belief by the Gaussian likelihood of the observed returns
/// under each regime and renormalizes.
pub fn update_belief(model: &RegimeModel, belief: &Belief, returns: &[f64]) -> Belief {
    let log_lik: Vec<f64> = (0..model.n_regimes())
        .map(|k| model.log_pdf(k, returns))
        .collect();
    belief.posterior_from_log_likelihoods(&log_lik)
}

/// Pushes a filtered belief one period forward through the regime chain.
pub fn predict_belief(model: &RegimeModel, belief: &Belief) -> Belief {
    let n = model.n_regimes();
    let mut next = vec![0.0; n];
    for (k, pk) in belief.0.iter().enumerate() {
        if *pk == 0.0 {
            continue;
        }
        for (l, t) in model.trans()[k].iter().enumerate() {
            next[l] += pk * t;
        }
    }
    let s: f64 = next.iter().sum();
    Belief(next.into_iter().map(|x| x / s).collect())
}

/// One full filtering step: Bayes update on the observed returns, then the
/// regime transition. The result is the belief about the regime that
/// generates the next period's returns.
pub fn advance_belief(model: &RegimeModel, belief: &Belief, returns: &[f64]) -> Belief {
    predict_belief(model, &update_belief(model, belief, returns))
}
