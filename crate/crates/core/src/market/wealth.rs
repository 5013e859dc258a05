use super::allocation::{l1, Allocation};

/// Result of letting a portfolio drift for one period.
#[derive(Debug, Clone, PartialEq)]
pub struct Growth {
    pub wealth: f64,
    pub drifted: Allocation,
    /// The gross portfolio return was non-positive. Wealth has been floored
    /// and the drifted allocation replaced by all cash; the path should stop
    /// trading.
    pub bankrupt: bool,
}

/// Gross portfolio return `w^T (1 + r)` with cash earning `rf`.
#[inline]
pub fn gross_return(weights: &[f64], returns: &[f64], rf: f64) -> f64 {
    let n = returns.len();
    debug_assert_eq!(weights.len(), n + 1);
    let mut g = weights[n] * (1.0 + rf);
    for i in 0..n {
        g += weights[i] * (1.0 + returns[i]);
    }
    g
}

/// Grows wealth through one period of returns and reports the drifted
/// weights `w * (1 + r) / g`.
pub fn grow(wealth: f64, alloc: &Allocation, returns: &[f64], rf: f64, floor: f64) -> Growth {
    let w = alloc.weights();
    let g = gross_return(w, returns, rf);
    if g <= 0.0 || !g.is_finite() {
        return Growth {
            wealth: floor,
            drifted: Allocation::all_cash(returns.len()),
            bankrupt: true,
        };
    }
    let n = returns.len();
    let mut drifted: Vec<f64> = w[..n]
        .iter()
        .zip(returns)
        .map(|(wi, ri)| wi * (1.0 + ri) / g)
        .collect();
    // cash as the residual keeps the budget exact to rounding
    let risky: f64 = drifted.iter().sum();
    drifted.push(1.0 - risky);
    Growth {
        wealth: wealth * g,
        drifted: Allocation::from_vec_unchecked(drifted),
        bankrupt: false,
    }
}

/// Wealth after paying a linear cost on the turnover needed to move from
/// `drifted` to `target`. The cost is charged on post-trade wealth, so the
/// implicit equation `W+ = W- - c W+ |target - drifted|_1` is solved in
/// closed form.
pub fn rebalance(wealth_end: f64, drifted: &Allocation, target: &Allocation, cost_rate: f64) -> f64 {
    rebalanced_wealth(wealth_end, l1(target.weights(), drifted.weights()), cost_rate)
}

#[inline]
pub fn rebalanced_wealth(wealth_end: f64, turnover: f64, cost_rate: f64) -> f64 {
    wealth_end / (1.0 + cost_rate * turnover)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn zero_returns_are_identity() {
        let a = Allocation::from_risky(&[0.3, 0.2]);
        let g = grow(100.0, &a, &[0.0, 0.0], 0.0, 1e-4);
        assert_eq!(g.wealth, 100.0);
        for (x, y) in g.drifted.weights().iter().zip(a.weights()) {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn all_cash_earns_rf() {
        let a = Allocation::all_cash(2);
        let g = grow(100.0, &a, &[0.3, -0.2], 0.001, 1e-4);
        assert!((g.wealth - 100.1).abs() < 1e-12);
        assert_eq!(g.drifted, a);
    }

    #[test]
    fn half_risky_drift() {
        let a = Allocation::from_risky(&[0.5]);
        let g = grow(1.0, &a, &[0.10], 0.0, 1e-6);
        assert!((g.wealth - 1.05).abs() < 1e-15);
        assert!((g.drifted.weights()[0] - 0.55 / 1.05).abs() < 1e-15);
        assert!((g.drifted.weights()[1] - 0.5 / 1.05).abs() < 1e-15);
    }

    #[test]
    fn bankruptcy_floors_wealth() {
        let a = Allocation::new(vec![1.0, 1.0, -1.0]).unwrap();
        let g = grow(1000.0, &a, &[-0.9, -0.9], 0.5, 1e-3);
        assert!(g.bankrupt);
        assert_eq!(g.wealth, 1e-3);
    }

    #[test]
    fn rebalance_closed_form() {
        assert_eq!(rebalanced_wealth(1000.0, 0.5, 0.0), 1000.0);
        let w = rebalanced_wealth(1000.0, 0.5, 0.01);
        assert!((w - 1000.0 / 1.005).abs() < 1e-12);
        // substitute back into the implicit equation
        assert!((w - (1000.0 - 0.01 * w * 0.5)).abs() < 1e-9);
        let a = Allocation::from_risky(&[0.3]);
        assert_eq!(rebalance(10.0, &a, &a, 0.05), 10.0);
    }

    proptest! {
        #[test]
        fn drift_keeps_budget(w0 in 0.0f64..0.5, w1 in 0.0f64..0.5, r0 in -0.5f64..0.5, r1 in -0.5f64..0.5, rf in 0.0f64..0.01) {
            let a = Allocation::from_risky(&[w0, w1]);
            let g = grow(1.0, &a, &[r0, r1], rf, 1e-6);
            prop_assert!(g.drifted.budget_error() <= 1e-12);
        }

        #[test]
        fn rebalance_monotone(c1 in 0.0f64..0.05, c2 in 0.0f64..0.05, d1 in 0.0f64..2.0, d2 in 0.0f64..2.0) {
            let (clo, chi) = if c1 <= c2 { (c1, c2) } else { (c2, c1) };
            let (dlo, dhi) = if d1 <= d2 { (d1, d2) } else { (d2, d1) };
            prop_assert!(rebalanced_wealth(1.0, dlo, chi) >= rebalanced_wealth(1.0, dhi, chi));
            prop_assert!(rebalanced_wealth(1.0, dlo, clo) >= rebalanced_wealth(1.0, dlo, chi));
            prop_assert!(rebalanced_wealth(1.0, dhi, chi) <= 1.0);
        }
    }
}
