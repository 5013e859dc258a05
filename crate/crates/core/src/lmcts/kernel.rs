use crate::error::{Error, Result};
use crate::market::Allocation;

/// Kernel-regression UCT settings.
#[derive(Debug, Clone, PartialEq)]
pub struct KernelConfig {
    /// RBF length scale in allocation space (Euclidean over all entries).
    pub bandwidth: f64,
    /// Minimum similarity to the current best action for a new child.
    pub tau: f64,
    pub explore_c: f64,
    pub widen_slope: f64,
    pub widen_intercept: f64,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            bandwidth: 0.1,
            // a 20% single-asset move against cash sits at exp(-4) ~ 0.0183
            tau: 0.015,
            explore_c: 5.0,
            widen_slope: 0.04,
            widen_intercept: 1.0,
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.bandwidth > 0.0) || !self.bandwidth.is_finite() {
            return Err(Error::invalid("lmcts.bandwidth", "must be positive"));
        }
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::invalid("lmcts.tau", "must lie in (0, 1)"));
        }
        if !(self.explore_c >= 0.0) {
            return Err(Error::invalid("lmcts.explore_c", "must be nonnegative"));
        }
        if !(self.widen_slope >= 0.0) || !(self.widen_intercept >= 1.0) {
            return Err(Error::invalid(
                "lmcts.widen",
                "slope must be nonnegative and intercept at least 1",
            ));
        }
        Ok(())
    }

    /// Number of children a node with `visits` visits may hold.
    pub fn allowed_children(&self, visits: u64) -> usize {
        (self.widen_intercept + (self.widen_slope * visits as f64).floor()) as usize
    }
}

pub fn rbf_kernel(a: &[f64], b: &[f64], bandwidth: f64) -> f64 {
    let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    (-d2 / (2.0 * bandwidth * bandwidth)).exp()
}

/// A child action of a depth-one search tree. The parent is the
/// `(t, belief)` root that owns the child list.
#[derive(Debug, Clone, PartialEq)]
pub struct ActionNode {
    pub action: Allocation,
    pub n: u64,
    pub v_bar: f64,
}

impl ActionNode {
    pub fn new(action: Allocation) -> Self {
        ActionNode { action, n: 0, v_bar: 0.0 }
    }

    pub fn record(&mut self, reward: f64) {
        self.n += 1;
        self.v_bar += (reward - self.v_bar) / self.n as f64;
    }
}

/// Visit-weighted Nadaraya-Watson estimate of the reward at `a`.
pub fn kr_value(a: &Allocation, siblings: &[ActionNode], bandwidth: f64) -> f64 {
    let (mut num, mut den) = (0.0, 0.0);
    for s in siblings.iter().filter(|s| s.n > 0) {
        let w = rbf_kernel(a.weights(), s.action.weights(), bandwidth) * s.n as f64;
        num += w * s.v_bar;
        den += w;
    }
    if den > 0.0 {
        num / den
    } else {
        let visited: Vec<f64> = siblings.iter().filter(|s| s.n > 0).map(|s| s.v_bar).collect();
        if visited.is_empty() {
            0.0
        } else {
            visited.iter().sum::<f64>() / visited.len() as f64
        }
    }
}

/// Kernel density of visits at `a`.
pub fn kr_density(a: &Allocation, siblings: &[ActionNode], bandwidth: f64) -> f64 {
    siblings
        .iter()
        .map(|s| rbf_kernel(a.weights(), s.action.weights(), bandwidth) * s.n as f64)
        .sum()
}

/// Affine map applied to rewards before the exploration bonus is added, so
/// that the exploration constant works on a fixed scale.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RewardRange {
    pub offset: f64,
    pub scale: f64,
}

impl RewardRange {
    pub const IDENTITY: RewardRange = RewardRange { offset: 0.0, scale: 1.0 };

    /// Maps `[min, max]` onto `[0, 1]`; a degenerate range only shifts.
    pub fn from_bounds(min: f64, max: f64) -> Self {
        let scale = max - min;
        RewardRange {
            offset: min,
            scale: if scale > 0.0 && scale.is_finite() { scale } else { 1.0 },
        }
    }

    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        (v - self.offset) / self.scale
    }
}

/// KR-UCT score of every child.
pub fn kr_uct_scores(children: &[ActionNode], cfg: &KernelConfig, range: RewardRange) -> Vec<f64> {
    let density: Vec<f64> = children
        .iter()
        .map(|c| kr_density(&c.action, children, cfg.bandwidth))
        .collect();
    let total: f64 = density.iter().sum();
    children
        .iter()
        .zip(&density)
        .map(|(c, w)| {
            let v = range.apply(kr_value(&c.action, children, cfg.bandwidth));
            v + cfg.explore_c * (total.ln() / w).sqrt()
        })
        .collect()
}

/// Index of the child maximizing the KR-UCT score; ties go to the earliest
/// child.
pub fn kr_uct_select(children: &[ActionNode], cfg: &KernelConfig, range: RewardRange) -> usize {
    argmax_first(&kr_uct_scores(children, cfg, range))
}

pub(crate) fn argmax_first(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, x) in xs.iter().enumerate() {
        if *x > xs[best] {
            best = i;
        }
    }
    best
}

/// Children plus running kernel sums `W(a) = sum_b K(a,b) n_b` and
/// `S(a) = sum_b K(a,b) n_b v_b`, updated in `O(children)` per visit.
#[derive(Debug, Clone)]
pub struct KernelTree {
    bandwidth: f64,
    pub(crate) children: Vec<ActionNode>,
    kernel: Vec<Vec<f64>>,
    density: Vec<f64>,
    weighted: Vec<f64>,
    reward_min: f64,
    reward_max: f64,
}

impl KernelTree {
    pub fn new(bandwidth: f64) -> Self {
        KernelTree {
            bandwidth,
            children: Vec::new(),
            kernel: Vec::new(),
            density: Vec::new(),
            weighted: Vec::new(),
            reward_min: f64::INFINITY,
            reward_max: f64::NEG_INFINITY,
        }
    }

    pub fn children(&self) -> &[ActionNode] {
        &self.children
    }

    pub fn len(&self) -> usize {
        self.children.len()
    }

    pub fn is_empty(&self) -> bool {
        self.children.is_empty()
    }

    pub fn density(&self, i: usize) -> f64 {
        self.density[i]
    }

    /// Kernel-regression value of child `i`.
    pub fn value(&self, i: usize) -> f64 {
        if self.density[i] > 0.0 {
            self.weighted[i] / self.density[i]
        } else {
            self.children[i].v_bar
        }
    }

    pub fn range(&self) -> RewardRange {
        if self.reward_min.is_finite() {
            RewardRange::from_bounds(self.reward_min, self.reward_max)
        } else {
            RewardRange::IDENTITY
        }
    }

    /// Visit density the current children place on an arbitrary action.
    pub fn density_at(&self, a: &[f64]) -> f64 {
        self.children
            .iter()
            .map(|c| rbf_kernel(a, c.action.weights(), self.bandwidth) * c.n as f64)
            .sum()
    }

    pub fn push(&mut self, action: Allocation) -> usize {
        let row: Vec<f64> = self
            .children
            .iter()
            .map(|c| rbf_kernel(action.weights(), c.action.weights(), self.bandwidth))
            .collect();
        let mut w = 0.0;
        let mut s = 0.0;
        for (k, c) in row.iter().zip(&self.children) {
            w += k * c.n as f64;
            s += k * c.n as f64 * c.v_bar;
        }
        for (r, k) in self.kernel.iter_mut().zip(&row) {
            r.push(*k);
        }
        let mut row = row;
        row.push(1.0);
        self.kernel.push(row);
        self.density.push(w);
        self.weighted.push(s);
        self.children.push(ActionNode::new(action));
        self.children.len() - 1
    }

    pub fn record(&mut self, i: usize, reward: f64) {
        self.children[i].record(reward);
        self.reward_min = self.reward_min.min(reward);
        self.reward_max = self.reward_max.max(reward);
        for (j, k) in self.kernel[i].iter().enumerate() {
            self.density[j] += k;
            self.weighted[j] += k * reward;
        }
    }

    pub fn select(&self, cfg: &KernelConfig) -> usize {
        let range = self.range();
        let total: f64 = self.density.iter().sum();
        let log_total = total.ln();
        let mut best = 0;
        let mut best_score = f64::NEG_INFINITY;
        for i in 0..self.children.len() {
            let score = range.apply(self.value(i)) + cfg.explore_c * (log_total / self.density[i]).sqrt();
            if score > best_score {
                best = i;
                best_score = score;
            }
        }
        best
    }

    /// Child with the highest kernel-regression value.
    pub fn best(&self) -> usize {
        let values: Vec<f64> = (0..self.len()).map(|i| self.value(i)).collect();
        argmax_first(&values)
    }

    pub fn most_visited(&self) -> usize {
        let mut best = 0;
        for (i, c) in self.children.iter().enumerate() {
            if c.n > self.children[best].n {
                best = i;
            }
        }
        best
    }

    pub fn total_visits(&self) -> u64 {
        self.children.iter().map(|c| c.n).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn node(w: &[f64], n: u64, v: f64) -> ActionNode {
        ActionNode {
            action: Allocation::new(w.to_vec()).unwrap(),
            n,
            v_bar: v,
        }
    }

    #[test]
    fn kernel_basics() {
        let a = [0.3, 0.7];
        let b = [0.2, 0.8];
        assert_eq!(rbf_kernel(&a, &a, 0.1), 1.0);
        assert_eq!(rbf_kernel(&a, &b, 0.1), rbf_kernel(&b, &a, 0.1));
        // |a - c| = 0.1 exactly along the first axis
        let c = [0.4, 0.7];
        assert!((rbf_kernel(&[0.3, 0.0], &[0.4, 0.0], 0.1) - (-0.5f64).exp()).abs() < 1e-12);
        assert!(rbf_kernel(&a, &c, 0.1) < 1.0);
    }

    #[test]
    fn kr_value_single_and_symmetric() {
        let s = vec![node(&[0.5, 0.5], 3, 2.5)];
        let a = Allocation::new(vec![0.1, 0.9]).unwrap();
        assert!((kr_value(&a, &s, 0.1) - 2.5).abs() < 1e-12);
        let s = vec![node(&[0.4, 0.6], 4, 1.0), node(&[0.6, 0.4], 4, 3.0)];
        let mid = Allocation::new(vec![0.5, 0.5]).unwrap();
        assert!((kr_value(&mid, &s, 0.1) - 2.0).abs() < 1e-12);
    }

    #[test]
    fn kr_value_hand_fixture() {
        let s = vec![
            node(&[0.0, 1.0], 2, 1.0),
            node(&[0.1, 0.9], 5, 2.0),
            node(&[0.3, 0.7], 1, 4.0),
        ];
        let a = Allocation::new(vec![0.1, 0.9]).unwrap();
        let bw: f64 = 0.2;
        // squared distances from a: 0.02, 0, 0.08
        let k = [(-0.02 / 0.08f64).exp(), 1.0, (-0.08 / 0.08f64).exp()];
        let num = k[0] * 2.0 * 1.0 + k[1] * 5.0 * 2.0 + k[2] * 1.0 * 4.0;
        let den = k[0] * 2.0 + k[1] * 5.0 + k[2] * 1.0;
        assert!((kr_value(&a, &s, bw) - num / den).abs() < 1e-12);
    }

    #[test]
    fn kr_value_all_zero_weights_falls_back_to_mean() {
        let s = vec![node(&[1.0, 0.0], 1, 1.0), node(&[0.0, 1.0], 1, 3.0)];
        let a = Allocation::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(kr_value(&a, &s, 1e-6), 2.0);
    }

    #[test]
    fn wide_bandwidth_gives_visit_weighted_mean() {
        let s = vec![
            node(&[0.0, 1.0], 2, 1.0),
            node(&[0.5, 0.5], 6, -2.0),
            node(&[1.0, 0.0], 1, 4.0),
        ];
        let direct = (2.0 * 1.0 + 6.0 * -2.0 + 4.0) / 9.0;
        let a = Allocation::new(vec![0.2, 0.8]).unwrap();
        let v = kr_value(&a, &s, 1e6);
        assert!(((v - direct) / direct).abs() <= 1e-9);
    }

    #[test]
    fn density_cases() {
        let a = Allocation::new(vec![0.5, 0.5]).unwrap();
        assert_eq!(kr_density(&a, &[], 0.1), 0.0);
        assert_eq!(kr_density(&a, &[node(&[0.5, 0.5], 7, 0.0)], 0.1), 7.0);
        // place siblings so that K = 0.5 and K = 0.25
        let bw: f64 = 0.1;
        let d1 = (2.0 * bw * bw * 2f64.ln()).sqrt();
        let d2 = (2.0 * bw * bw * 4f64.ln()).sqrt();
        let s = vec![
            node(&[0.5 + d1 / 2f64.sqrt(), 0.5 - d1 / 2f64.sqrt()], 4, 0.0),
            node(&[0.5 - d2 / 2f64.sqrt(), 0.5 + d2 / 2f64.sqrt()], 8, 0.0),
        ];
        assert!((kr_density(&a, &s, bw) - 4.0).abs() < 1e-12);
    }

    #[test]
    fn selection_rules() {
        let cfg = KernelConfig { explore_c: 0.0, bandwidth: 1e-3, ..Default::default() };
        let s = vec![
            node(&[0.0, 1.0], 3, 1.0),
            node(&[0.5, 0.5], 3, 2.0),
            node(&[1.0, 0.0], 3, 1.5),
        ];
        assert_eq!(kr_uct_select(&s, &cfg, RewardRange::IDENTITY), 1);

        // same value everywhere; the less visited child wins on exploration
        let cfg = KernelConfig { bandwidth: 1e-3, ..Default::default() };
        let s = vec![node(&[0.0, 1.0], 5, 1.0), node(&[1.0, 0.0], 2, 1.0)];
        assert_eq!(kr_uct_select(&s, &cfg, RewardRange::IDENTITY), 1);
    }

    #[test]
    fn three_node_fixture() {
        let cfg = KernelConfig { bandwidth: 0.2, explore_c: 0.5, ..Default::default() };
        let s = vec![
            node(&[0.0, 1.0], 4, 0.2),
            node(&[0.1, 0.9], 2, 0.5),
            node(&[0.4, 0.6], 6, 0.3),
        ];
        let pts: [[f64; 2]; 3] = [[0.0, 1.0], [0.1, 0.9], [0.4, 0.6]];
        let n = [4.0, 2.0, 6.0];
        let v = [0.2, 0.5, 0.3];
        let k = |i: usize, j: usize| {
            let d2: f64 = (0..2).map(|c| (pts[i][c] - pts[j][c]).powi(2)).sum();
            (-d2 / (2.0 * 0.04)).exp()
        };
        let w: Vec<f64> = (0..3).map(|i| (0..3).map(|j| k(i, j) * n[j]).sum()).collect();
        let e: Vec<f64> = (0..3)
            .map(|i| (0..3).map(|j| k(i, j) * n[j] * v[j]).sum::<f64>() / w[i])
            .collect();
        let total: f64 = w.iter().sum();
        let score: Vec<f64> = (0..3).map(|i| e[i] + 0.5 * (total.ln() / w[i]).sqrt()).collect();
        let expect = (0..3).fold(0, |b, i| if score[i] > score[b] { i } else { b });
        assert_eq!(kr_uct_select(&s, &cfg, RewardRange::IDENTITY), expect);
    }

    #[test]
    fn vanishing_bandwidth_is_greedy() {
        let cfg = KernelConfig { explore_c: 0.0, bandwidth: 1e-9, ..Default::default() };
        let s = vec![node(&[0.2, 0.8], 10, 0.4), node(&[0.25, 0.75], 1, 0.6)];
        assert_eq!(kr_uct_select(&s, &cfg, RewardRange::IDENTITY), 1);
    }

    #[test]
    fn cached_tree_matches_direct_formulas() {
        let cfg = KernelConfig { bandwidth: 0.15, ..Default::default() };
        let mut tree = KernelTree::new(cfg.bandwidth);
        let actions = [[0.0, 1.0], [0.1, 0.9], [0.3, 0.7], [0.05, 0.95]];
        let rewards = [0.3, -0.1, 0.7, 0.2, 0.5, 0.1, -0.3, 0.9];
        for a in &actions {
            tree.push(Allocation::new(a.to_vec()).unwrap());
        }
        for (k, r) in rewards.iter().enumerate() {
            tree.record(k % actions.len(), *r);
        }
        let kids = tree.children().to_vec();
        for i in 0..kids.len() {
            let v = kr_value(&kids[i].action, &kids, cfg.bandwidth);
            let w = kr_density(&kids[i].action, &kids, cfg.bandwidth);
            assert!((tree.value(i) - v).abs() < 1e-12);
            assert!((tree.density(i) - w).abs() < 1e-12);
        }
        assert_eq!(tree.select(&cfg), kr_uct_select(&kids, &cfg, tree.range()));
        assert_eq!(tree.total_visits(), rewards.len() as u64);
    }

    #[test]
    fn widening_schedule() {
        let cfg = KernelConfig::default();
        assert_eq!(cfg.allowed_children(0), 1);
        assert_eq!(cfg.allowed_children(24), 1);
        assert_eq!(cfg.allowed_children(25), 2);
        assert_eq!(cfg.allowed_children(50), 3);
    }
}
