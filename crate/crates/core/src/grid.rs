//! Discretized belief simplex.
//!
//! Grid points are beliefs whose entries are multiples of `step`. Points are
//! ordered lexicographically by their integer counts, so for two regimes
//! point `i` is `(i * step, 1 - i * step)`.
//!
//! Off-grid beliefs are valued by piecewise-linear interpolation on the
//! Kuhn (Freudenthal) triangulation of the grid, expressed in cumulative
//! coordinates. With two regimes this is ordinary linear interpolation
//! along the segment. Interpolation is exact at grid points and reproduces
//! affine functions of the belief.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::market::Belief;

#[derive(Debug, Clone)]
pub struct BeliefGrid {
    n_regimes: usize,
    divisions: u32,
    counts: Vec<Vec<u32>>,
    points: Vec<Belief>,
    index: HashMap<Vec<u32>, usize>,
}

impl BeliefGrid {
    /// `step` must divide one into an integer number of parts.
    pub fn new(n_regimes: usize, step: f64) -> Result<Self> {
        if n_regimes == 0 {
            return Err(Error::invalid("grid.regimes", "need at least one regime"));
        }
        if !(step > 0.0 && step <= 1.0) {
            return Err(Error::invalid("grid.step", format!("must lie in (0, 1], got {step}")));
        }
        let m = (1.0 / step).round();
        if (m * step - 1.0).abs() > 1e-9 {
            return Err(Error::invalid(
                "grid.step",
                format!("1/{step} is not an integer"),
            ));
        }
        Ok(Self::with_divisions(n_regimes, m as u32))
    }

    pub fn with_divisions(n_regimes: usize, divisions: u32) -> Self {
        let mut counts = Vec::new();
        let mut current = Vec::with_capacity(n_regimes);
        compositions(n_regimes, divisions, &mut current, &mut counts);
        let points = counts
            .iter()
            .map(|c| {
                Belief::from_vec_unchecked(
                    c.iter().map(|x| *x as f64 / divisions as f64).collect(),
                )
            })
            .collect();
        let index = counts
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i))
            .collect();
        BeliefGrid {
            n_regimes,
            divisions,
            counts,
            points,
            index,
        }
    }

    pub fn n_regimes(&self) -> usize {
        self.n_regimes
    }

    pub fn divisions(&self) -> u32 {
        self.divisions
    }

    pub fn step(&self) -> f64 {
        1.0 / self.divisions as f64
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &Belief {
        &self.points[i]
    }

    pub fn points(&self) -> &[Belief] {
        &self.points
    }

    pub fn counts(&self, i: usize) -> &[u32] {
        &self.counts[i]
    }

    pub fn index_of_counts(&self, counts: &[u32]) -> Option<usize> {
        self.index.get(counts).copied()
    }

    /// Grid index of a belief that lies on the grid (within 1e-9 per entry).
    pub fn index_of(&self, p: &[f64]) -> Option<usize> {
        let m = self.divisions as f64;
        let counts: Vec<u32> = p.iter().map(|x| (x * m).round().max(0.0) as u32).collect();
        let i = self.index_of_counts(&counts)?;
        let ok = self.points[i]
            .probs()
            .iter()
            .zip(p)
            .all(|(a, b)| (a - b).abs() <= 1e-9);
        ok.then_some(i)
    }

    /// Nearest grid point in Euclidean distance; exact ties go to the lower
    /// index.
    pub fn nearest(&self, p: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (i, q) in self.points.iter().enumerate() {
            let d: f64 = q
                .probs()
                .iter()
                .zip(p)
                .map(|(a, b)| (a - b) * (a - b))
                .sum();
            if d < best_d {
                best_d = d;
                best = i;
            }
        }
        best
    }

    /// Vertices and barycentric weights of the triangulation cell holding
    /// `p`. Weights are positive and sum to one.
    pub fn interpolation_weights(&self, p: &[f64]) -> Vec<(usize, f64)> {
        let n = self.n_regimes;
        if n == 1 {
            return vec![(0, 1.0)];
        }
        let m = self.divisions as f64;
        // cumulative coordinates s_k = m * sum_{i<=k} p_i, k < n - 1
        let mut s = Vec::with_capacity(n - 1);
        let mut acc = 0.0;
        for x in &p[..n - 1] {
            acc += x * m;
            let mut v = acc.clamp(0.0, m);
            if (v - v.round()).abs() < 1e-9 {
                v = v.round();
            }
            s.push(v);
        }
        let base: Vec<u32> = s.iter().map(|v| v.floor() as u32).collect();
        let frac: Vec<f64> = s.iter().zip(&base).map(|(v, b)| v - *b as f64).collect();
        let mut order: Vec<usize> = (0..n - 1).collect();
        // descending fraction, ties to the higher coordinate first so every
        // vertex stays monotone in cumulative coordinates
        order.sort_by(|a, b| frac[*b].total_cmp(&frac[*a]).then(b.cmp(a)));

        let mut out = Vec::with_capacity(n);
        let mut vertex = base.clone();
        let first_w = 1.0 - order.first().map(|k| frac[*k]).unwrap_or(0.0);
        if first_w > 0.0 {
            out.push((self.cumulative_to_index(&vertex), first_w));
        }
        for (j, k) in order.iter().enumerate() {
            vertex[*k] += 1;
            let next = order.get(j + 1).map(|k2| frac[*k2]).unwrap_or(0.0);
            let w = frac[*k] - next;
            if w > 0.0 {
                out.push((self.cumulative_to_index(&vertex), w));
            }
        }
        out
    }

    pub fn interpolate(&self, values: &[f64], p: &[f64]) -> f64 {
        self.interpolation_weights(p)
            .into_iter()
            .map(|(i, w)| w * values[i])
            .sum()
    }

    fn cumulative_to_index(&self, cum: &[u32]) -> usize {
        let n = self.n_regimes;
        let mut counts = Vec::with_capacity(n);
        let mut prev = 0;
        for c in cum {
            counts.push(c - prev);
            prev = *c;
        }
        counts.push(self.divisions - prev);
        self.index[&counts]
    }
}

fn compositions(parts: usize, total: u32, current: &mut Vec<u32>, out: &mut Vec<Vec<u32>>) {
    if parts == 1 {
        current.push(total);
        out.push(current.clone());
        current.pop();
        return;
    }
    for c in 0..=total {
        current.push(c);
        compositions(parts - 1, total - c, current, out);
        current.pop();
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn two_regime_five_percent_grid_has_21_points() {
        let g = BeliefGrid::new(2, 0.05).unwrap();
        assert_eq!(g.len(), 21);
        for (i, p) in g.points().iter().enumerate() {
            assert!((p.probs()[0] - i as f64 * 0.05).abs() < 1e-15);
            assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
        let three = BeliefGrid::new(3, 0.05).unwrap();
        assert_eq!(three.len(), 231);
    }

    #[test]
    fn rejects_non_dividing_step() {
        assert!(BeliefGrid::new(2, 0.3).is_err());
        assert!(BeliefGrid::new(2, 0.0).is_err());
    }

    #[test]
    fn node_consistency() {
        for n in 1..=3 {
            let g = BeliefGrid::new(n, 0.05).unwrap();
            let values: Vec<f64> = (0..g.len()).map(|i| (i as f64 * 0.37).sin()).collect();
            for (i, p) in g.points().iter().enumerate() {
                let v = g.interpolate(&values, p.probs());
                assert!((v - values[i]).abs() <= 1e-12, "n={n} i={i}");
            }
        }
    }

    #[test]
    fn nearest_breaks_ties_low() {
        let g = BeliefGrid::new(2, 0.5).unwrap();
        // (0.25, 0.75) is equidistant from (0, 1) and (0.5, 0.5)
        assert_eq!(g.nearest(&[0.25, 0.75]), 0);
        assert_eq!(g.nearest(&[0.26, 0.74]), 1);
    }

    proptest! {
        #[test]
        fn reproduces_affine_functions(a in 0.0f64..1.0, b in 0.0f64..1.0, c in 0.0f64..1.0) {
            let g = BeliefGrid::new(3, 0.1).unwrap();
            prop_assume!(a + b + c > 1e-3);
            let s = a + b + c;
            let p = [a / s, b / s, c / s];
            let f = |q: &[f64]| 0.3 * q[0] - 1.7 * q[1] + 2.2 * q[2];
            let values: Vec<f64> = g.points().iter().map(|q| f(q.probs())).collect();
            let w = g.interpolation_weights(&p);
            let total: f64 = w.iter().map(|x| x.1).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            prop_assert!((g.interpolate(&values, &p) - f(&p)).abs() < 1e-12);
        }

        #[test]
        fn two_regime_is_linear(p in 0.0f64..1.0) {
            let g = BeliefGrid::new(2, 0.05).unwrap();
            let values: Vec<f64> = (0..21).map(|i| (i as f64).powi(2)).collect();
            let x = p * 20.0;
            let lo = x.floor().min(19.0);
            let expect = values[lo as usize] + (x - lo) * (values[lo as usize + 1] - values[lo as usize]);
            prop_assert!((g.interpolate(&values, &[p, 1.0 - p]) - expect).abs() < 1e-9);
        }
    }
}
