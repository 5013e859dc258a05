use std::ops::Range;

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::tape::{Tape, Var};
use crate::error::{Error, Result};
use crate::rng::{self, Domain};

/// Initial half-width of every band.
pub const INITIAL_WIDTH: f64 = 0.02;
const HIDDEN_INIT_SD: f64 = 0.1;
const HEAD_INIT_SD: f64 = 0.01;

/// Shape of the no-trade-zone network: one shared tanh hidden layer feeding
/// softplus width heads for the upper and lower bands and, optionally, a
/// linear head that shifts the band center.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NtzLayout {
    pub n_regimes: usize,
    pub n_risky: usize,
    pub hidden: usize,
    pub wealth_feature: bool,
    pub center_head: bool,
}

impl NtzLayout {
    pub fn n_features(&self) -> usize {
        self.n_regimes + usize::from(self.wealth_feature)
    }

    /// Named parameter blocks in storage order.
    pub fn blocks(&self) -> Vec<(&'static str, Range<usize>)> {
        let (f, h, n) = (self.n_features(), self.hidden, self.n_risky);
        let mut sizes = vec![
            ("hidden.weight", h * f),
            ("hidden.bias", h),
            ("upper.weight", n * h),
            ("upper.bias", n),
            ("lower.weight", n * h),
            ("lower.bias", n),
        ];
        if self.center_head {
            sizes.push(("center.weight", n * h));
            sizes.push(("center.bias", n));
        }
        let mut at = 0;
        sizes
            .into_iter()
            .map(|(name, len)| {
                let r = at..at + len;
                at += len;
                (name, r)
            })
            .collect()
    }

    pub fn block(&self, name: &str) -> Option<Range<usize>> {
        self.blocks().into_iter().find(|(n, _)| *n == name).map(|b| b.1)
    }

    pub fn n_params(&self) -> usize {
        self.blocks().last().map_or(0, |b| b.1.end)
    }

    /// Index of the weight from wealth input to hidden unit `j`.
    pub fn wealth_weight(&self, j: usize) -> Option<usize> {
        self.wealth_feature
            .then(|| j * self.n_features() + self.n_regimes)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NtzParams {
    pub layout: NtzLayout,
    pub values: Vec<f64>,
}

/// Bias that makes the softplus head output `width` when its weights vanish.
pub fn width_bias(width: f64) -> f64 {
    width.exp_m1().ln()
}

impl NtzParams {
    pub fn zeros(layout: NtzLayout) -> Self {
        NtzParams {
            layout,
            values: vec![0.0; layout.n_params()],
        }
    }

    /// Small random hidden and head weights, width biases at
    /// `INITIAL_WIDTH`, center head zero.
    pub fn init(layout: NtzLayout, seed: u64) -> Self {
        let mut p = NtzParams::zeros(layout);
        let mut r = rng::stream(seed, Domain::NnInit, 0);
        for (name, range) in layout.blocks() {
            let sd = match name {
                "hidden.weight" => HIDDEN_INIT_SD,
                "upper.weight" | "lower.weight" => HEAD_INIT_SD,
                _ => 0.0,
            };
            for v in &mut p.values[range.clone()] {
                let z: f64 = r.sample(StandardNormal);
                *v = sd * z;
            }
            if name == "upper.bias" || name == "lower.bias" {
                p.values[range].fill(width_bias(INITIAL_WIDTH));
            }
        }
        p
    }

    /// Parameters whose bands have (numerically) zero width: head weights
    /// zero and width biases far negative.
    pub fn collapsed(layout: NtzLayout) -> Self {
        Self::with_constant_width(layout, 0.0)
    }

    /// Zero head weights and biases giving half-width `width` everywhere.
    /// A width of zero uses a bias of -50 (softplus about 2e-22).
    pub fn with_constant_width(layout: NtzLayout, width: f64) -> Self {
        let mut p = NtzParams::zeros(layout);
        let bias = if width > 0.0 { width_bias(width) } else { -50.0 };
        for name in ["upper.bias", "lower.bias"] {
            let r = layout.block(name).unwrap();
            p.values[r].fill(bias);
        }
        p
    }

    pub fn get(&self, name: &str) -> Option<&[f64]> {
        self.layout.block(name).map(|r| &self.values[r])
    }

    pub fn validate(&self) -> Result<()> {
        if self.values.len() != self.layout.n_params() {
            return Err(Error::invalid(
                "ntz.params",
                format!("{} values for a layout of {}", self.values.len(), self.layout.n_params()),
            ));
        }
        if let Some(i) = self.values.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("ntz.params[{i}]"), "not finite"));
        }
        Ok(())
    }
}

/// Head outputs for one decision.
pub struct Heads {
    pub upper: Vec<Var>,
    pub lower: Vec<Var>,
    pub center: Option<Vec<Var>>,
}

/// Network evaluation on a tape. `params` are the tape variables holding
/// the parameter vector.
pub fn heads(tape: &mut Tape, layout: &NtzLayout, params: &[Var], features: &[Var]) -> Heads {
    let (f, h, n) = (layout.n_features(), layout.hidden, layout.n_risky);
    debug_assert_eq!(features.len(), f);
    let blocks = layout.blocks();
    let block = |i: usize| &params[blocks[i].1.clone()];
    let (w1, b1) = (block(0), block(1));
    let hidden: Vec<Var> = (0..h)
        .map(|j| {
            let z = tape.dot_bias(&w1[j * f..(j + 1) * f], features, b1[j]);
            tape.tanh(z)
        })
        .collect();
    let mut head = |wi: usize, bi: usize, softplus: bool| -> Vec<Var> {
        let (w, b) = (block(wi), block(bi));
        (0..n)
            .map(|i| {
                let z = tape.dot_bias(&w[i * h..(i + 1) * h], &hidden, b[i]);
                if softplus {
                    tape.softplus(z)
                } else {
                    z
                }
            })
            .collect()
    };
    let upper = head(2, 3, true);
    let lower = head(4, 5, true);
    let center = layout.center_head.then(|| head(6, 7, false));
    Heads { upper, lower, center }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout(wealth: bool, center: bool) -> NtzLayout {
        NtzLayout { n_regimes: 2, n_risky: 3, hidden: 4, wealth_feature: wealth, center_head: center }
    }

    #[test]
    fn blocks_tile_the_vector() {
        let l = layout(true, true);
        let b = l.blocks();
        assert_eq!(b[0].1, 0..12);
        for w in b.windows(2) {
            assert_eq!(w[0].1.end, w[1].1.start);
        }
        assert_eq!(l.n_params(), 12 + 4 + 2 * (12 + 3) + 12 + 3);
    }

    #[test]
    fn init_widths() {
        let l = layout(false, false);
        let p = NtzParams::init(l, 3);
        let mut t = Tape::forward_only();
        let vars: Vec<Var> = p.values.iter().map(|v| t.leaf(*v)).collect();
        let feats = vec![t.constant(0.5), t.constant(0.5)];
        let hd = heads(&mut t, &l, &vars, &feats);
        for v in hd.upper.iter().chain(&hd.lower) {
            assert!((t.value(*v) - INITIAL_WIDTH).abs() < 0.01);
        }
        assert!(hd.center.is_none());
    }

    #[test]
    fn dead_wealth_input_changes_nothing() {
        let off = NtzParams::init(layout(false, false), 5);
        let lw = layout(true, false);
        let mut on = NtzParams::zeros(lw);
        // copy weights, inserting a zero wealth column
        for j in 0..4 {
            for k in 0..2 {
                on.values[j * 3 + k] = off.values[j * 2 + k];
            }
        }
        let tail_off = &off.values[8..];
        on.values[12..].copy_from_slice(tail_off);
        let eval = |p: &NtzParams, extra: Option<f64>| {
            let mut t = Tape::forward_only();
            let vars: Vec<Var> = p.values.iter().map(|v| t.leaf(*v)).collect();
            let mut f = vec![t.constant(0.3), t.constant(0.7)];
            if let Some(w) = extra {
                f.push(t.constant(w));
            }
            let hd = heads(&mut t, &p.layout, &vars, &f);
            hd.upper.iter().chain(&hd.lower).map(|v| t.value(*v)).collect::<Vec<_>>()
        };
        assert_eq!(eval(&off, None), eval(&on, Some(1.0)));
    }
}
