use nalgebra::{DMatrix, DVector};

use super::lookup::LookupTable;
use crate::error::{Error, Result};
use crate::market::{Allocation, Constraints};

/// Least-squares polynomial smoothing. Each output is the value at that
/// point of the degree-`order` fit over the surrounding window; near the
/// ends the window is truncated rather than padded. Truncated windows too
/// short for the requested order use the largest order they support.
pub fn savitzky_golay(series: &[f64], window: usize, order: usize) -> Result<Vec<f64>> {
    if window == 0 || window % 2 == 0 {
        return Err(Error::invalid("smoothing.window", "must be odd and positive"));
    }
    if order >= window {
        return Err(Error::invalid("smoothing.order", "must be smaller than the window"));
    }
    let half = window / 2;
    let len = series.len();
    let mut out = Vec::with_capacity(len);
    for i in 0..len {
        let lo = i.saturating_sub(half);
        let hi = (i + half).min(len.saturating_sub(1));
        let m = hi - lo + 1;
        let deg = order.min(m - 1);
        let x = DMatrix::from_fn(m, deg + 1, |r, c| ((lo + r) as f64 - i as f64).powi(c as i32));
        let y = DVector::from_iterator(m, series[lo..=hi].iter().copied());
        let coef = x
            .svd(true, true)
            .solve(&y, 1e-14)
            .map_err(|e| Error::invalid("smoothing", e.to_string()))?;
        out.push(coef[0]);
    }
    Ok(out)
}

/// Smooths every weight of every grid belief across time, then restores the
/// allocation invariants: under no-shorting negative weights are clipped
/// and the vector renormalized; under shorting risky weights are clipped to
/// the box and cash absorbs the rest. Allocations that cannot be repaired
/// keep their unsmoothed value.
pub fn smooth_lookup(lookup: &LookupTable, window: usize, order: usize, constraints: &Constraints) -> Result<LookupTable> {
    if !lookup.is_complete() {
        return Err(Error::invalid("lookup", "table must be complete before smoothing"));
    }
    let horizon = lookup.horizon();
    let n_beliefs = lookup.grid().len();
    let entries = lookup.get(0, 0)?.weights().len();
    let mut smoothed = vec![vec![Vec::with_capacity(entries); n_beliefs]; horizon];
    for b in 0..n_beliefs {
        for e in 0..entries {
            let series: Vec<f64> = (0..horizon).map(|t| lookup.get(t, b).map(|a| a.weights()[e])).collect::<Result<_>>()?;
            let s = savitzky_golay(&series, window, order)?;
            for t in 0..horizon {
                smoothed[t][b].push(s[t]);
            }
        }
    }
    let mut out = LookupTable::new(horizon, lookup.grid().clone());
    for (t, stage) in smoothed.into_iter().enumerate() {
        let allocs = stage
            .into_iter()
            .enumerate()
            .map(|(b, w)| repair(w, constraints).unwrap_or_else(|| lookup.get(t, b).unwrap().clone()))
            .collect();
        out.insert_stage(t, allocs)?;
    }
    Ok(out)
}

fn repair(mut w: Vec<f64>, constraints: &Constraints) -> Option<Allocation> {
    let cash = w.len() - 1;
    match constraints {
        Constraints::NoShort => {
            w.iter_mut().for_each(|x| *x = x.max(0.0));
            let s: f64 = w.iter().sum();
            if !(s > 0.0) {
                return None;
            }
            w.iter_mut().for_each(|x| *x /= s);
        }
        Constraints::Short { bound } => {
            for x in &mut w[..cash] {
                *x = x.clamp(-bound, *bound);
            }
            w[cash] = 1.0 - w[..cash].iter().sum::<f64>();
        }
    }
    if constraints.admits_weights(&w) && w.iter().all(|x| x.is_finite()) {
        Some(Allocation::from_vec_unchecked(w))
    } else {
        None
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::BeliefGrid;

    #[test]
    fn reproduces_lines_and_constants() {
        let line: Vec<f64> = (0..30).map(|i| 0.3 - 0.01 * i as f64).collect();
        let s = savitzky_golay(&line, 11, 1).unwrap();
        for (a, b) in s.iter().zip(&line) {
            assert!((a - b).abs() < 1e-12);
        }
        let c = vec![0.7; 9];
        assert!(savitzky_golay(&c, 11, 1).unwrap().iter().all(|x| (x - 0.7).abs() < 1e-12));
    }

    #[test]
    fn interior_is_moving_average() {
        let x: Vec<f64> = (0..40).map(|i| ((i * 7919) % 13) as f64 / 13.0).collect();
        let s = savitzky_golay(&x, 11, 1).unwrap();
        for i in 5..35 {
            let mean = x[i - 5..=i + 5].iter().sum::<f64>() / 11.0;
            assert!((s[i] - mean).abs() < 1e-12);
        }
    }

    #[test]
    fn rejects_bad_windows() {
        assert!(savitzky_golay(&[1.0], 10, 1).is_err());
        assert!(savitzky_golay(&[1.0], 3, 3).is_err());
    }

    fn table(series: &[[f64; 2]]) -> LookupTable {
        let grid = BeliefGrid::new(1, 1.0).unwrap();
        let mut l = LookupTable::new(series.len(), grid);
        for (t, w) in series.iter().enumerate() {
            l.insert_stage(t, vec![Allocation::new(w.to_vec()).unwrap()]).unwrap();
        }
        l
    }

    #[test]
    fn constant_lookup_is_unchanged() {
        let l = table(&[[0.4, 0.6]; 12]);
        let s = smooth_lookup(&l, 11, 1, &Constraints::NoShort).unwrap();
        for t in 0..12 {
            for (a, b) in s.get(t, 0).unwrap().weights().iter().zip([0.4, 0.6]) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn noisy_series_gets_smoother() {
        let raw: Vec<[f64; 2]> = (0..20)
            .map(|t| {
                let w = if t % 2 == 0 { 0.7 } else { 0.3 };
                [w, 1.0 - w]
            })
            .collect();
        let l = table(&raw);
        let s = smooth_lookup(&l, 11, 1, &Constraints::NoShort).unwrap();
        let tv = |f: &dyn Fn(usize) -> f64| (1..20).map(|t| (f(t) - f(t - 1)).abs()).sum::<f64>();
        let before = tv(&|t| l.get(t, 0).unwrap().weights()[0]);
        let after = tv(&|t| s.get(t, 0).unwrap().weights()[0]);
        assert!(after < before);
        for t in 0..20 {
            assert!(s.get(t, 0).unwrap().budget_error() < 1e-9);
        }
    }
}
