//! Derivative-free search over the allocation simplex.
//!
//! Small problems are scanned exhaustively on a lattice; large ones use
//! steepest-ascent pairwise transfers. Either result can then be refined by
//! pairwise transfers at a finer step.

use crate::market::Constraints;

/// Search settings shared by the DP stages and the one-period optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct SearchOptions {
    /// Lattice spacing of the coarse search.
    pub coarse_step: f64,
    /// Pairwise-transfer step of the local refinement; `None` keeps the
    /// coarse lattice argmax.
    pub refine_step: Option<f64>,
    /// Largest lattice scanned exhaustively.
    pub max_scan: usize,
    /// Cap on accepted moves per local search.
    pub max_moves: usize,
}

impl Default for SearchOptions {
    fn default() -> Self {
        SearchOptions {
            coarse_step: 0.05,
            refine_step: Some(0.01),
            max_scan: 50_000,
            max_moves: 20_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SearchResult {
    pub weights: Vec<f64>,
    pub objective: f64,
    pub evaluations: usize,
    /// The move cap was hit before a local optimum was certified.
    pub capped: bool,
}

fn units(step: f64) -> i64 {
    (1.0 / step).round() as i64
}

/// Lattice bounds in units of `step`: each weight is `k * step` with
/// `lo <= k <= hi`, and the weights sum to `total` units.
fn lattice_bounds(constraints: &Constraints, step: f64) -> (i64, i64, i64) {
    let m = units(step);
    let lo = (constraints.lower() * m as f64).round() as i64;
    let hi = (constraints.upper() * m as f64).round() as i64;
    (lo, hi, m)
}

/// Number of lattice allocations over `entries` weights, saturating.
pub fn lattice_size(entries: usize, constraints: &Constraints, step: f64) -> usize {
    let (lo, hi, m) = lattice_bounds(constraints, step);
    // shift to nonnegative units: u_i = k_i - lo in [0, hi - lo], sum = m - entries*lo
    let cap = (hi - lo) as usize;
    let total = m - entries as i64 * lo;
    if total < 0 {
        return 0;
    }
    let total = total as usize;
    let mut ways = vec![0u128; total + 1];
    ways[0] = 1;
    for _ in 0..entries {
        let mut next = vec![0u128; total + 1];
        for (s, w) in ways.iter().enumerate() {
            if *w == 0 {
                continue;
            }
            for u in 0..=cap.min(total - s) {
                next[s + u] = next[s + u].saturating_add(*w);
            }
        }
        ways = next;
    }
    ways[total].min(usize::MAX as u128) as usize
}

/// Every lattice allocation, in lexicographic order of the weights.
pub fn lattice(entries: usize, constraints: &Constraints, step: f64) -> Vec<Vec<f64>> {
    let (lo, hi, m) = lattice_bounds(constraints, step);
    let mut out = Vec::new();
    let mut current = Vec::with_capacity(entries);
    fn rec(
        remaining_entries: usize,
        remaining: i64,
        lo: i64,
        hi: i64,
        m: i64,
        current: &mut Vec<i64>,
        out: &mut Vec<Vec<f64>>,
    ) {
        if remaining_entries == 1 {
            if remaining >= lo && remaining <= hi {
                current.push(remaining);
                out.push(current.iter().map(|k| *k as f64 / m as f64).collect());
                current.pop();
            }
            return;
        }
        let rest = remaining_entries as i64 - 1;
        for k in lo..=hi {
            let left = remaining - k;
            if left < rest * lo || left > rest * hi {
                continue;
            }
            current.push(k);
            rec(remaining_entries - 1, left, lo, hi, m, current, out);
            current.pop();
        }
    }
    if entries > 0 {
        rec(entries, m, lo, hi, m, &mut current, &mut out);
    }
    out
}

/// Steepest ascent over moves that shift `step` of weight from one entry to
/// another, staying inside the box.
pub fn pairwise_ascent<F: Fn(&[f64]) -> f64>(
    start: &[f64],
    start_value: f64,
    step: f64,
    constraints: &Constraints,
    max_moves: usize,
    objective: &F,
) -> SearchResult {
    let (lo, hi) = (constraints.lower(), constraints.upper());
    let mut w = start.to_vec();
    let mut best = start_value;
    let mut evaluations = 0;
    let mut moves = 0;
    let mut trial = w.clone();
    loop {
        let mut best_move: Option<(usize, usize, f64)> = None;
        for from in 0..w.len() {
            if w[from] - step < lo - 1e-12 {
                continue;
            }
            for to in 0..w.len() {
                if to == from || w[to] + step > hi + 1e-12 {
                    continue;
                }
                trial.copy_from_slice(&w);
                trial[from] -= step;
                trial[to] += step;
                let v = objective(&trial);
                evaluations += 1;
                let incumbent = best_move.map(|m| m.2).unwrap_or(best);
                if v > incumbent {
                    best_move = Some((from, to, v));
                }
            }
        }
        match best_move {
            Some((from, to, v)) => {
                w[from] -= step;
                w[to] += step;
                best = v;
                moves += 1;
                if moves >= max_moves {
                    return SearchResult { weights: w, objective: best, evaluations, capped: true };
                }
            }
            None => {
                return SearchResult { weights: w, objective: best, evaluations, capped: false };
            }
        }
    }
}

/// Maximizes `objective` over allocations with `entries` weights (cash
/// last). `warm_starts` seed the local search when the lattice is too large
/// to scan.
pub fn maximize<F: Fn(&[f64]) -> f64>(
    entries: usize,
    constraints: &Constraints,
    opts: &SearchOptions,
    warm_starts: &[Vec<f64>],
    objective: F,
) -> SearchResult {
    let mut evaluations = 0;
    let mut capped = false;
    let (mut best_w, mut best_v) =
        if lattice_size(entries, constraints, opts.coarse_step) <= opts.max_scan {
            let mut best: Option<(Vec<f64>, f64)> = None;
            for w in lattice(entries, constraints, opts.coarse_step) {
                let v = objective(&w);
                evaluations += 1;
                if best.as_ref().map_or(true, |b| v > b.1) {
                    best = Some((w, v));
                }
            }
            best.expect("lattice is never empty for a valid constraint set")
        } else {
            let mut starts: Vec<Vec<f64>> = Vec::with_capacity(warm_starts.len() + 1);
            let mut cash = vec![0.0; entries];
            cash[entries - 1] = 1.0;
            starts.push(cash);
            starts.extend(warm_starts.iter().map(|w| snap_to_lattice(w, opts.coarse_step)));
            let mut best: Option<(Vec<f64>, f64)> = None;
            for s in starts {
                let v0 = objective(&s);
                evaluations += 1;
                let mut w = s;
                let mut v = v0;
                // coarse-to-fine transfer sizes ending at the lattice step
                for mult in [4.0, 2.0, 1.0] {
                    let r = pairwise_ascent(&w, v, opts.coarse_step * mult, constraints, opts.max_moves, &objective);
                    evaluations += r.evaluations;
                    capped |= r.capped;
                    w = r.weights;
                    v = r.objective;
                }
                if best.as_ref().map_or(true, |b| v > b.1) {
                    best = Some((w, v));
                }
            }
            best.unwrap()
        };
    if let Some(step) = opts.refine_step {
        let r = pairwise_ascent(&best_w, best_v, step, constraints, opts.max_moves, &objective);
        evaluations += r.evaluations;
        capped |= r.capped;
        best_w = r.weights;
        best_v = r.objective;
    }
    SearchResult { weights: best_w, objective: best_v, evaluations, capped }
}

/// Rounds risky weights to the lattice and lets cash absorb the remainder.
fn snap_to_lattice(w: &[f64], step: f64) -> Vec<f64> {
    let n = w.len() - 1;
    let mut out: Vec<f64> = w[..n].iter().map(|x| (x / step).round() * step).collect();
    let risky: f64 = out.iter().sum();
    out.push(((1.0 - risky) / step).round() * step);
    out
}
