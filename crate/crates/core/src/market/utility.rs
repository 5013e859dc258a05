use crate::error::{Error, Result};

/// Default logistic steepness of the smoothed goal objective, per unit of
/// currency.
pub const DEFAULT_STEEPNESS: f64 = 0.01;

/// Terminal-wealth utility.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Utility {
    /// `W^gamma / gamma`, or `ln W` when `gamma == 0`.
    Crra { gamma: f64 },
    /// Indicator of reaching the goal: 1 when `W >= goal`.
    Goal { goal: f64 },
    /// Logistic surrogate `1 / (1 + exp(-steepness (W - goal)))` of the
    /// goal indicator. Strictly increasing, so gradient training sees a
    /// signal everywhere.
    SmoothedGoal { goal: f64, steepness: f64 },
}

impl Utility {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Utility::Crra { gamma } if !gamma.is_finite() => {
                Err(Error::invalid("utility.gamma", "must be finite"))
            }
            Utility::Goal { goal } | Utility::SmoothedGoal { goal, .. } if !(goal > 0.0) => {
                Err(Error::invalid("utility.goal", format!("must be positive, got {goal}")))
            }
            Utility::SmoothedGoal { steepness, .. } if !(steepness > 0.0) => Err(Error::invalid(
                "utility.steepness",
                format!("must be positive, got {steepness}"),
            )),
            _ => Ok(()),
        }
    }

    /// Utility with the CRRA domain checked.
    pub fn try_value(&self, wealth: f64) -> Result<f64> {
        if matches!(self, Utility::Crra { .. }) && !(wealth > 0.0) {
            return Err(Error::invalid(
                "wealth",
                format!("CRRA utility needs positive wealth, got {wealth}"),
            ));
        }
        Ok(self.value(wealth))
    }

    /// Utility without the domain check; callers floor wealth first.
    #[inline]
    pub fn value(&self, wealth: f64) -> f64 {
        match *self {
            Utility::Crra { gamma } if gamma == 0.0 => wealth.ln(),
            Utility::Crra { gamma } => wealth.powf(gamma) / gamma,
            Utility::Goal { goal } => {
                if wealth >= goal {
                    1.0
                } else {
                    0.0
                }
            }
            Utility::SmoothedGoal { goal, steepness } => logistic(steepness * (wealth - goal)),
        }
    }

    /// Utility and its derivative in wealth. The goal indicator reports a
    /// zero slope.
    #[inline]
    pub fn value_and_slope(&self, wealth: f64) -> (f64, f64) {
        match *self {
            Utility::Crra { gamma } if gamma == 0.0 => (wealth.ln(), 1.0 / wealth),
            Utility::Crra { gamma } => {
                let p = wealth.powf(gamma - 1.0);
                (p * wealth / gamma, p)
            }
            Utility::Goal { .. } => (self.value(wealth), 0.0),
            Utility::SmoothedGoal { goal, steepness } => {
                let s = logistic(steepness * (wealth - goal));
                (s, steepness * s * (1.0 - s))
            }
        }
    }

    pub fn goal(&self) -> Option<f64> {
        match *self {
            Utility::Crra { .. } => None,
            Utility::Goal { goal } | Utility::SmoothedGoal { goal, .. } => Some(goal),
        }
    }

    /// Differentiable stand-in used for training: the goal indicator is
    /// replaced by its logistic surrogate.
    pub fn smoothed(&self) -> Utility {
        match *self {
            Utility::Goal { goal } => Utility::SmoothedGoal {
                goal,
                steepness: DEFAULT_STEEPNESS,
            },
            other => other,
        }
    }
}

#[inline]
fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn crra_values() {
        let u = Utility::Crra { gamma: -1.0 };
        assert_eq!(u.value(2.0), -0.5);
        assert_eq!(Utility::Crra { gamma: 0.0 }.value(1.0), 0.0);
        assert!(u.try_value(0.0).is_err());
        assert!(u.try_value(-1.0).is_err());
    }

    #[test]
    fn goal_indicator_at_1580() {
        let u = Utility::Goal { goal: 1580.0 };
        assert_eq!(u.value(1580.0), 1.0);
        assert_eq!(u.value(1579.99), 0.0);
    }

    #[test]
    fn smoothed_goal_midpoint() {
        for k in [1e-4, 0.01, 1.0, 50.0] {
            let u = Utility::SmoothedGoal { goal: 1580.0, steepness: k };
            assert_eq!(u.value(1580.0), 0.5);
        }
    }

    #[test]
    fn smoothed_goal_approaches_indicator() {
        let hard = Utility::Goal { goal: 1.0 };
        let soft = Utility::SmoothedGoal { goal: 1.0, steepness: 1e3 };
        for i in 0..200 {
            let w = 0.5 + i as f64 * 0.005;
            if (w - 1.0).abs() < 0.02 {
                continue;
            }
            assert!((hard.value(w) - soft.value(w)).abs() < 1e-8, "w={w}");
        }
    }

    #[test]
    fn slopes_match_finite_differences() {
        for u in [
            Utility::Crra { gamma: -1.0 },
            Utility::Crra { gamma: 0.0 },
            Utility::Crra { gamma: 0.5 },
            Utility::SmoothedGoal { goal: 1.2, steepness: 3.0 },
        ] {
            let w = 1.1;
            let h = 1e-6;
            let fd = (u.value(w + h) - u.value(w - h)) / (2.0 * h);
            let (v, s) = u.value_and_slope(w);
            assert!((v - u.value(w)).abs() < 1e-15);
            assert!((s - fd).abs() < 1e-7, "{u:?}: {s} vs {fd}");
        }
    }

    #[test]
    fn validation() {
        assert!(Utility::Goal { goal: 0.0 }.validate().is_err());
        assert!(Utility::SmoothedGoal { goal: 1.0, steepness: 0.0 }.validate().is_err());
        assert!(Utility::Crra { gamma: -1.0 }.validate().is_ok());
    }

    proptest! {
        #[test]
        fn crra_homogeneity(w in 0.01f64..100.0, a in 0.01f64..100.0, gamma in prop_oneof![-3.0f64..-0.1, 0.1f64..0.9]) {
            let u = Utility::Crra { gamma };
            let lhs = u.value(a * w);
            let rhs = a.powf(gamma) * u.value(w);
            prop_assert!(((lhs - rhs) / rhs).abs() <= 1e-12);
        }
    }
}
