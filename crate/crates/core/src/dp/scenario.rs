use rand::Rng;
use rand_distr::StandardNormal;

use crate::grid::BeliefGrid;
use crate::market::{advance_belief, gross_return, Belief, RegimeModel, Utility, BANKRUPTCY_FLOOR};
use crate::error::{Error, Result};

/// One sampled period seen from a belief: the returns, the cash rate of the
/// regime that produced them, and the belief they lead to.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub weight: f64,
    pub returns: Vec<f64>,
    pub rf: f64,
    pub next_belief: Belief,
}

/// Weighted one-period sample used as common random numbers for every
/// candidate action at a grid point.
#[derive(Debug, Clone)]
pub struct ScenarioSet {
    n_risky: usize,
    weights: Vec<f64>,
    returns: Vec<f64>,
    rf: Vec<f64>,
    next_beliefs: Vec<Belief>,
}

impl ScenarioSet {
    /// Weights are normalized to sum to one.
    pub fn from_scenarios(scenarios: Vec<Scenario>) -> Self {
        let n_risky = scenarios.first().map(|s| s.returns.len()).unwrap_or(0);
        let total: f64 = scenarios.iter().map(|s| s.weight).sum();
        let mut set = ScenarioSet {
            n_risky,
            weights: Vec::with_capacity(scenarios.len()),
            returns: Vec::with_capacity(scenarios.len() * n_risky),
            rf: Vec::with_capacity(scenarios.len()),
            next_beliefs: Vec::with_capacity(scenarios.len()),
        };
        for s in scenarios {
            assert_eq!(s.returns.len(), n_risky, "ragged scenario returns");
            set.weights.push(s.weight / total);
            set.returns.extend_from_slice(&s.returns);
            set.rf.push(s.rf);
            set.next_beliefs.push(s.next_belief);
        }
        set
    }

    /// Samples `budget` scenarios from the belief mixture. Regimes are
    /// stratified: each regime with positive mass receives a deterministic
    /// share of the budget (largest remainder, at least one draw) and its
    /// samples carry weight `p_k / count_k`. With `antithetic`, draws come
    /// in `(z, -z)` pairs within a regime, so the sample mean of each
    /// regime's returns equals its mean exactly.
    pub fn draw<R: Rng + ?Sized>(
        model: &RegimeModel,
        belief: &Belief,
        budget: usize,
        antithetic: bool,
        rng: &mut R,
    ) -> Self {
        let n = model.n_risky();
        let per_unit = if antithetic { 2 } else { 1 };
        let units = budget.div_ceil(per_unit).max(1);
        let counts = stratify(belief.probs(), units);
        let mut scenarios = Vec::with_capacity(units * per_unit);
        let mut z = vec![0.0; n];
        let mut r = vec![0.0; n];
        for (k, &count) in counts.iter().enumerate() {
            if count == 0 {
                continue;
            }
            let w = belief.probs()[k] / (count * per_unit) as f64;
            for _ in 0..count {
                for zi in z.iter_mut() {
                    *zi = rng.sample(StandardNormal);
                }
                for sign in 0..per_unit {
                    if sign == 1 {
                        z.iter_mut().for_each(|x| *x = -*x);
                    }
                    model.returns_from_normals(k, &z, &mut r);
                    scenarios.push(Scenario {
                        weight: w,
                        returns: r.clone(),
                        rf: model.rf(k),
                        next_belief: advance_belief(model, belief, &r),
                    });
                }
            }
        }
        Self::from_scenarios(scenarios)
    }

    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn returns(&self, s: usize) -> &[f64] {
        &self.returns[s * self.n_risky..(s + 1) * self.n_risky]
    }

    pub fn rf(&self, s: usize) -> f64 {
        self.rf[s]
    }

    pub fn next_belief(&self, s: usize) -> &Belief {
        &self.next_beliefs[s]
    }

    pub fn next_beliefs(&self) -> &[Belief] {
        &self.next_beliefs
    }

    /// Gross portfolio return in scenario `s`.
    #[inline]
    pub fn gross(&self, weights: &[f64], s: usize) -> f64 {
        gross_return(weights, self.returns(s), self.rf[s])
    }
}

/// Largest-remainder allocation of `units` draws to regimes proportional
/// to `p`, giving every regime with positive mass at least one draw when
/// the budget allows.
fn stratify(p: &[f64], units: usize) -> Vec<usize> {
    let positive = p.iter().filter(|x| **x > 0.0).count();
    let mut counts: Vec<usize> = p.iter().map(|x| (x * units as f64).floor() as usize).collect();
    let mut assigned: usize = counts.iter().sum();
    let mut rema: Vec<(usize, f64)> = p
        .iter()
        .enumerate()
        .map(|(k, x)| (k, x * units as f64 - counts[k] as f64))
        .collect();
    rema.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
    let mut i = 0;
    while assigned < units && !rema.is_empty() {
        let k = rema[i % rema.len()].0;
        if p[k] > 0.0 {
            counts[k] += 1;
            assigned += 1;
        }
        i += 1;
    }
    if units >= positive {
        for k in 0..p.len() {
            if p[k] > 0.0 && counts[k] == 0 {
                // borrow a draw from the largest stratum
                let donor = (0..p.len()).max_by_key(|j| counts[*j]).unwrap();
                counts[donor] -= 1;
                counts[k] = 1;
            }
        }
    }
    counts
}

/// CRRA utility in the form the wealth-free recursion needs.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Homogeneity {
    /// `V(W, b) = W^gamma V(1, b)`.
    Power(f64),
    /// `V(W, b) = ln W + V(1, b)`.
    Log,
}

impl Homogeneity {
    pub fn from_utility(u: &Utility) -> Result<Self> {
        match *u {
            Utility::Crra { gamma } if gamma == 0.0 => Ok(Homogeneity::Log),
            Utility::Crra { gamma } => Ok(Homogeneity::Power(gamma)),
            _ => Err(Error::invalid(
                "utility",
                "the dynamic program needs CRRA utility; goal objectives are handled by the network stage",
            )),
        }
    }

    /// Utility of unit wealth, the terminal value.
    pub fn terminal(&self) -> f64 {
        match *self {
            Homogeneity::Power(g) => 1.0 / g,
            Homogeneity::Log => 0.0,
        }
    }

    /// Value of entering the next period with growth `g` and unit-wealth
    /// continuation value `v`.
    #[inline]
    pub fn combine(&self, g: f64, v: f64) -> f64 {
        let g = if g > 0.0 { g } else { BANKRUPTCY_FLOOR };
        match *self {
            Homogeneity::Power(gamma) if gamma == -1.0 => v / g,
            Homogeneity::Power(gamma) => g.powf(gamma) * v,
            Homogeneity::Log => g.ln() + v,
        }
    }
}

/// Unit-wealth value function on the belief grid, interpolated off grid.
#[derive(Debug, Clone, Copy)]
pub struct GridValues<'a> {
    pub grid: &'a BeliefGrid,
    pub values: &'a [f64],
}

impl GridValues<'_> {
    pub fn at(&self, belief: &Belief) -> f64 {
        self.grid.interpolate(self.values, belief.probs())
    }
}

/// Expected value of one action over a scenario set with the continuation
/// values already looked up per scenario.
#[derive(Debug, Clone)]
pub struct StageObjective<'a> {
    scenarios: &'a ScenarioSet,
    next_values: Vec<f64>,
    homogeneity: Homogeneity,
}

impl<'a> StageObjective<'a> {
    pub fn new(scenarios: &'a ScenarioSet, value_next: GridValues<'_>, homogeneity: Homogeneity) -> Self {
        let next_values = scenarios.next_beliefs().iter().map(|b| value_next.at(b)).collect();
        StageObjective {
            scenarios,
            next_values,
            homogeneity,
        }
    }

    /// Same continuation value in every scenario.
    pub fn terminal(scenarios: &'a ScenarioSet, homogeneity: Homogeneity) -> Self {
        StageObjective {
            scenarios,
            next_values: vec![homogeneity.terminal(); scenarios.len()],
            homogeneity,
        }
    }

    pub fn next_values(&self) -> &[f64] {
        &self.next_values
    }

    /// `E[ g(r)^gamma * V_next(b') ]` (or its log analogue).
    pub fn value(&self, weights: &[f64]) -> f64 {
        let sc = self.scenarios;
        let mut acc = 0.0;
        for s in 0..sc.len() {
            let g = sc.gross(weights, s);
            acc += sc.weights[s] * self.homogeneity.combine(g, self.next_values[s]);
        }
        acc
    }
}

/// Monte Carlo value of taking `alloc` at `belief` and continuing with the
/// unit-wealth value function `value_next`.
pub fn evaluate_action<R: Rng + ?Sized>(
    model: &RegimeModel,
    belief: &Belief,
    alloc: &crate::market::Allocation,
    value_next: GridValues<'_>,
    homogeneity: Homogeneity,
    budget: usize,
    antithetic: bool,
    rng: &mut R,
) -> f64 {
    let set = ScenarioSet::draw(model, belief, budget, antithetic, rng);
    StageObjective::new(&set, value_next, homogeneity).value(alloc.weights())
}
