use crate::error::{Error, Result};

/// Tolerance on the budget constraint for stored allocations.
pub const BUDGET_TOL: f64 = 1e-9;
/// Slack allowed on box bounds before an entry counts as infeasible.
pub const BOX_TOL: f64 = 1e-12;

/// Portfolio weights over `n` risky assets followed by cash.
///
/// The weights always sum to one. Cash is an explicit entry rather than an
/// implied residual, which keeps shorting bookkeeping and candidate
/// generation uniform across entries.
#[derive(Debug, Clone, PartialEq)]
pub struct Allocation(Vec<f64>);

impl Allocation {
    pub fn new(weights: Vec<f64>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::invalid("allocation", "needs at least the cash entry"));
        }
        if let Some(i) = weights.iter().position(|w| !w.is_finite()) {
            return Err(Error::invalid(format!("allocation[{i}]"), "not finite"));
        }
        let sum: f64 = weights.iter().sum();
        if (sum - 1.0).abs() > BUDGET_TOL {
            return Err(Error::invalid(
                "allocation",
                format!("weights sum to {sum}, expected 1"),
            ));
        }
        Ok(Allocation(weights))
    }

    /// Builds an allocation from risky weights, with cash absorbing the rest.
    pub fn from_risky(risky: &[f64]) -> Self {
        let mut w = risky.to_vec();
        w.push(1.0 - risky.iter().sum::<f64>());
        Allocation(w)
    }

    pub fn all_cash(n_risky: usize) -> Self {
        let mut w = vec![0.0; n_risky + 1];
        w[n_risky] = 1.0;
        Allocation(w)
    }

    /// Wraps weights whose budget has already been established by the caller.
    pub(crate) fn from_vec_unchecked(w: Vec<f64>) -> Self {
        debug_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-6);
        Allocation(w)
    }

    pub fn weights(&self) -> &[f64] {
        &self.0
    }

    pub fn into_weights(self) -> Vec<f64> {
        self.0
    }

    pub fn risky(&self) -> &[f64] {
        &self.0[..self.0.len() - 1]
    }

    pub fn cash(&self) -> f64 {
        self.0[self.0.len() - 1]
    }

    pub fn n_risky(&self) -> usize {
        self.0.len() - 1
    }

    pub fn budget_error(&self) -> f64 {
        (self.0.iter().sum::<f64>() - 1.0).abs()
    }

    pub fn l1_distance(&self, other: &Allocation) -> f64 {
        l1(&self.0, &other.0)
    }

    pub fn l2_distance_sq(&self, other: &Allocation) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum()
    }

    /// Total magnitude of negative entries, cash included.
    pub fn short_magnitude(&self) -> f64 {
        self.0.iter().map(|w| (-w).max(0.0)).sum()
    }
}

pub(crate) fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

/// Feasible set for allocations. Both variants apply their box to every
/// entry, cash included.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Constraints {
    /// Every weight in `[0, 1]`.
    NoShort,
    /// Every weight in `[-bound, bound]`; the desk configuration uses 1.
    Short { bound: f64 },
}

impl Default for Constraints {
    fn default() -> Self {
        Constraints::NoShort
    }
}

impl Constraints {
    pub fn lower(&self) -> f64 {
        match self {
            Constraints::NoShort => 0.0,
            Constraints::Short { bound } => -bound,
        }
    }

    pub fn upper(&self) -> f64 {
        match self {
            Constraints::NoShort => 1.0,
            Constraints::Short { bound } => *bound,
        }
    }

    pub fn admits_weights(&self, w: &[f64]) -> bool {
        let (lo, hi) = (self.lower(), self.upper());
        (w.iter().sum::<f64>() - 1.0).abs() <= BUDGET_TOL
            && w.iter().all(|x| *x >= lo - BOX_TOL && *x <= hi + BOX_TOL)
    }

    pub fn admits(&self, a: &Allocation) -> bool {
        self.admits_weights(a.weights())
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Constraints::NoShort => Ok(()),
            Constraints::Short { bound } if bound.is_finite() && *bound >= 1.0 => Ok(()),
            Constraints::Short { bound } => Err(Error::invalid(
                "constraints.bound",
                format!("short bound must be finite and at least 1, got {bound}"),
            )),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_broken_budget() {
        assert!(Allocation::new(vec![0.5, 0.4]).is_err());
        assert!(Allocation::new(vec![0.5, 0.5]).is_ok());
        assert!(Allocation::new(vec![f64::NAN, 1.0]).is_err());
    }

    #[test]
    fn cash_is_residual_in_from_risky() {
        let a = Allocation::from_risky(&[0.2, 0.3]);
        assert_eq!(a.weights(), &[0.2, 0.3, 0.5]);
        assert_eq!(a.n_risky(), 2);
        assert_eq!(a.cash(), 0.5);
    }

    #[test]
    fn box_feasibility() {
        let long = Allocation::from_risky(&[0.6, 0.4]);
        let short = Allocation::from_risky(&[1.0, -0.5]);
        assert!(Constraints::NoShort.admits(&long));
        assert!(!Constraints::NoShort.admits(&short));
        assert!(Constraints::Short { bound: 1.0 }.admits(&short));
        let over = Allocation::from_risky(&[-1.05, 1.0]);
        assert!(!Constraints::Short { bound: 1.0 }.admits(&over));
        assert!((short.short_magnitude() - 0.5).abs() < 1e-15);
    }
}
