use super::kernel::{rbf_kernel, KernelConfig, KernelTree};
use crate::market::{Allocation, Constraints};

pub const DEFAULT_DEVIATIONS: [f64; 3] = [0.05, 0.10, 0.20];

const SAME_ACTION_TOL: f64 = 1e-12;

fn same(a: &[f64], b: &[f64]) -> bool {
    a.iter().zip(b).all(|(x, y)| (x - y).abs() <= SAME_ACTION_TOL)
}

/// Single-asset moves away from `best`: for each risky asset, deviation and
/// sign, `d` of weight moves between that asset and cash. Infeasible and
/// duplicate moves are dropped. If nothing survives, `best` itself is the
/// only candidate.
pub fn generate_candidates(best: &Allocation, deviations: &[f64], constraints: &Constraints) -> Vec<Allocation> {
    let w = best.weights();
    let cash = w.len() - 1;
    let mut out: Vec<Allocation> = Vec::new();
    for i in 0..cash {
        for d in deviations {
            for sign in [1.0, -1.0] {
                let mut c = w.to_vec();
                c[i] += sign * d;
                c[cash] -= sign * d;
                if !constraints.admits_weights(&c) {
                    continue;
                }
                if out.iter().any(|o| same(o.weights(), &c)) {
                    continue;
                }
                out.push(Allocation::from_vec_unchecked(c));
            }
        }
    }
    if out.is_empty() {
        out.push(best.clone());
    }
    out
}

/// Picks the next child: among candidates around the current best that are
/// not already children and have kernel similarity above `tau` to the best,
/// the one where existing visits are least dense. `None` when the filter
/// leaves nothing.
pub fn expand(
    tree: &KernelTree,
    best: usize,
    deviations: &[f64],
    cfg: &KernelConfig,
    constraints: &Constraints,
) -> Option<Allocation> {
    let anchor = &tree.children()[best].action;
    let mut pick: Option<(Allocation, f64)> = None;
    for c in generate_candidates(anchor, deviations, constraints) {
        if tree.children().iter().any(|k| same(k.action.weights(), c.weights())) {
            continue;
        }
        if rbf_kernel(anchor.weights(), c.weights(), cfg.bandwidth) <= cfg.tau {
            continue;
        }
        let d = tree.density_at(c.weights());
        if pick.as_ref().is_none_or(|p| d < p.1) {
            pick = Some((c, d));
        }
    }
    pick.map(|p| p.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn all_cash_no_short_moves_into_each_asset() {
        let best = Allocation::all_cash(3);
        let c = generate_candidates(&best, &[0.05], &Constraints::NoShort);
        assert_eq!(c.len(), 3);
        for a in &c {
            assert!(a.cash() > 0.94 && a.risky().iter().all(|x| *x >= 0.0));
        }
    }

    #[test]
    fn interior_count() {
        let best = Allocation::new(vec![0.3, 0.3, 0.4]).unwrap();
        let c = generate_candidates(&best, &DEFAULT_DEVIATIONS, &Constraints::NoShort);
        assert_eq!(c.len(), 6 * 2);
    }

    #[test]
    fn short_bound_excludes_overshoot() {
        let best = Allocation::new(vec![-0.95, 0.95, 1.0]).unwrap();
        let c = generate_candidates(&best, &[0.1], &Constraints::Short { bound: 1.0 });
        assert!(c.iter().all(|a| a.weights().iter().all(|x| *x >= -1.0 - 1e-12 && *x <= 1.0 + 1e-12)));
        assert!(!c.iter().any(|a| (a.weights()[0] + 1.05).abs() < 1e-9));
    }

    #[test]
    fn vertex_returns_best() {
        let none = generate_candidates(&Allocation::new(vec![1.0, 0.0]).unwrap(), &[2.5], &Constraints::NoShort);
        assert_eq!(none, vec![Allocation::new(vec![1.0, 0.0]).unwrap()]);
    }

    fn tree_with(actions: &[(&[f64], u64)], bw: f64) -> KernelTree {
        let mut t = KernelTree::new(bw);
        for (a, n) in actions {
            let i = t.push(Allocation::new(a.to_vec()).unwrap());
            for _ in 0..*n {
                t.record(i, 0.0);
            }
        }
        t
    }

    #[test]
    fn expansion_prefers_low_density() {
        // best at 0.5; visits piled up on the +5% side
        let tree = tree_with(&[(&[0.5, 0.5], 1), (&[0.55, 0.45], 30)], 0.1);
        let cfg = KernelConfig::default();
        let a = expand(&tree, 0, &[0.05], &cfg, &Constraints::NoShort).unwrap();
        assert!((a.weights()[0] - 0.45).abs() < 1e-12);
    }

    #[test]
    fn tau_filter_can_block_expansion() {
        let tree = tree_with(&[(&[0.5, 0.5], 1)], 0.1);
        let cfg = KernelConfig { tau: 0.99, ..Default::default() };
        assert!(expand(&tree, 0, &DEFAULT_DEVIATIONS, &cfg, &Constraints::NoShort).is_none());
        // the default tau admits 20% moves
        let cfg = KernelConfig::default();
        let tree = tree_with(&[(&[0.5, 0.5], 1), (&[0.45, 0.55], 1), (&[0.55, 0.45], 1), (&[0.4, 0.6], 1), (&[0.6, 0.4], 1)], 0.1);
        let a = expand(&tree, 0, &DEFAULT_DEVIATIONS, &cfg, &Constraints::NoShort).unwrap();
        assert!((a.weights()[0] - 0.5).abs() > 0.19);
    }
}
