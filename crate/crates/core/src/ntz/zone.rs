use super::network::{heads, NtzLayout};
use super::tape::{Tape, Var};
use crate::market::{Allocation, Constraints};

/// Band around a base allocation, risky assets only. Cash is the residual.
#[derive(Debug, Clone, PartialEq)]
pub struct Zone {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub center: Vec<f64>,
}

/// Tape form of a zone.
pub struct ZoneVars {
    pub lower: Vec<Var>,
    pub upper: Vec<Var>,
    /// Band center after the center head and box clipping.
    pub center: Vec<Var>,
}

/// Builds the zone for one decision: the base allocation shifted by the
/// center head (if any) and clipped to the box, with the width heads below
/// and above it, intersected with the box.
pub fn zone_vars(
    tape: &mut Tape,
    layout: &NtzLayout,
    params: &[Var],
    base: &Allocation,
    features: &[Var],
    constraints: &Constraints,
) -> ZoneVars {
    let (lo, hi) = (constraints.lower(), constraints.upper());
    let h = heads(tape, layout, params, features);
    let mut out = ZoneVars {
        lower: Vec::with_capacity(layout.n_risky),
        upper: Vec::with_capacity(layout.n_risky),
        center: Vec::with_capacity(layout.n_risky),
    };
    for i in 0..layout.n_risky {
        let b = base.risky()[i];
        let c = match &h.center {
            Some(shift) => {
                let moved = tape.affine(shift[i], 1.0, b);
                tape.clamp_const(moved, lo, hi)
            }
            None => tape.constant(b),
        };
        let l = tape.sub(c, h.lower[i]);
        let u = tape.add(c, h.upper[i]);
        out.lower.push(tape.clamp_const(l, lo, f64::INFINITY));
        out.upper.push(tape.clamp_const(u, f64::NEG_INFINITY, hi));
        out.center.push(c);
    }
    out
}

/// Evaluates the zone for given parameter values.
pub fn zone(
    layout: &NtzLayout,
    values: &[f64],
    base: &Allocation,
    features: &[f64],
    constraints: &Constraints,
) -> Zone {
    let mut tape = Tape::forward_only();
    let params: Vec<Var> = values.iter().map(|v| tape.leaf(*v)).collect();
    let feats: Vec<Var> = features.iter().map(|v| tape.constant(*v)).collect();
    let z = zone_vars(&mut tape, layout, &params, base, &feats, constraints);
    Zone {
        lower: z.lower.iter().map(|v| tape.value(*v)).collect(),
        upper: z.upper.iter().map(|v| tape.value(*v)).collect(),
        center: z.center.iter().map(|v| tape.value(*v)).collect(),
    }
}

/// Result of moving a drifted portfolio into its zone.
pub struct ProjectionVars {
    /// Risky weights then cash.
    pub weights: Vec<Var>,
    /// `|x - drifted|_1` over all entries.
    pub turnover: Var,
    /// The clamped cash weight left the box and the trade was scaled back.
    pub flagged: bool,
}

/// Clamps each risky weight into its band; cash absorbs the residual. If
/// that leaves cash outside its bound, the trade is shrunk toward the
/// drifted portfolio until cash sits on the bound.
pub fn project_vars(
    tape: &mut Tape,
    drifted: &[Var],
    lower: &[Var],
    upper: &[Var],
    constraints: &Constraints,
) -> ProjectionVars {
    let n = lower.len();
    let (lo, hi) = (constraints.lower(), constraints.upper());
    let mut x: Vec<Var> = (0..n).map(|i| tape.clamp(drifted[i], lower[i], upper[i])).collect();
    let moved = (0..n).any(|i| tape.value(x[i]) != tape.value(drifted[i]));
    let mut cash = if moved {
        let risky = tape.sum(&x);
        tape.affine(risky, -1.0, 1.0)
    } else {
        drifted[n]
    };
    let mut flagged = false;
    let (c, dc) = (tape.value(cash), tape.value(drifted[n]));
    let bound = if c < lo - 1e-15 {
        Some(lo)
    } else if c > hi + 1e-15 {
        Some(hi)
    } else {
        None
    };
    if let Some(bound) = bound {
        flagged = true;
        if dc >= lo && dc <= hi && c != dc {
            // x = d + s (x - d) with s chosen so cash lands on the bound
            let gap = tape.sub(cash, drifted[n]);
            let num = tape.constant(bound - dc);
            let s = tape.div(num, gap);
            for i in 0..n {
                let step = tape.sub(x[i], drifted[i]);
                let scaled = tape.mul(s, step);
                x[i] = tape.add(drifted[i], scaled);
            }
            let risky = tape.sum(&x);
            cash = tape.affine(risky, -1.0, 1.0);
        }
    }
    x.push(cash);
    let diffs: Vec<Var> = x
        .iter()
        .zip(drifted)
        .map(|(a, b)| {
            let d = tape.sub(*a, *b);
            tape.abs(d)
        })
        .collect();
    let turnover = tape.sum(&diffs);
    ProjectionVars { weights: x, turnover, flagged }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Projection {
    pub alloc: Allocation,
    pub turnover: f64,
    pub flagged: bool,
}

/// Moves `drifted` to the nearest point of the zone (per-asset box, cash as
/// residual).
pub fn project_to_zone(drifted: &Allocation, zone: &Zone, constraints: &Constraints) -> Projection {
    let mut tape = Tape::forward_only();
    let d: Vec<Var> = drifted.weights().iter().map(|v| tape.constant(*v)).collect();
    let l: Vec<Var> = zone.lower.iter().map(|v| tape.constant(*v)).collect();
    let u: Vec<Var> = zone.upper.iter().map(|v| tape.constant(*v)).collect();
    let p = project_vars(&mut tape, &d, &l, &u, constraints);
    Projection {
        alloc: Allocation::from_vec_unchecked(p.weights.iter().map(|v| tape.value(*v)).collect()),
        turnover: tape.value(p.turnover),
        flagged: p.flagged,
    }
}
