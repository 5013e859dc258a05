//! Minimal reverse-mode differentiation over a flat tape.
//!
//! Every operation stores its value and the partial derivatives with
//! respect to its operands. `gradient` walks the tape backward once.

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(u32);

impl Var {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
pub struct Tape {
    values: Vec<f64>,
    edge_start: Vec<u32>,
    edges: Vec<(u32, f64)>,
    record: bool,
}

impl Default for Tape {
    fn default() -> Self {
        Tape::new()
    }
}

impl Tape {
    pub fn new() -> Self {
        Tape {
            values: Vec::new(),
            edge_start: Vec::new(),
            edges: Vec::new(),
            record: true,
        }
    }

    /// Tape that only computes values.
    pub fn forward_only() -> Self {
        Tape { record: false, ..Tape::new() }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn clear(&mut self) {
        self.values.clear();
        self.edge_start.clear();
        self.edges.clear();
    }

    #[inline]
    pub fn value(&self, v: Var) -> f64 {
        self.values[v.index()]
    }

    #[inline]
    fn push(&mut self, value: f64, partials: &[(Var, f64)]) -> Var {
        let id = self.values.len() as u32;
        self.values.push(value);
        if self.record {
            self.edge_start.push(self.edges.len() as u32);
            self.edges.extend(partials.iter().map(|(v, d)| (v.0, *d)));
        }
        Var(id)
    }

    pub fn leaf(&mut self, value: f64) -> Var {
        self.push(value, &[])
    }

    pub fn constant(&mut self, value: f64) -> Var {
        self.push(value, &[])
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) + self.value(b);
        self.push(v, &[(a, 1.0), (b, 1.0)])
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let v = self.value(a) - self.value(b);
        self.push(v, &[(a, 1.0), (b, -1.0)])
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(x * y, &[(a, y), (b, x)])
    }

    pub fn div(&mut self, a: Var, b: Var) -> Var {
        let (x, y) = (self.value(a), self.value(b));
        self.push(x / y, &[(a, 1.0 / y), (b, -x / (y * y))])
    }

    /// `k * a + c` for constants `k`, `c`.
    pub fn affine(&mut self, a: Var, k: f64, c: f64) -> Var {
        let v = k * self.value(a) + c;
        self.push(v, &[(a, k)])
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let y = self.value(a).tanh();
        self.push(y, &[(a, 1.0 - y * y)])
    }

    pub fn softplus(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let y = if x > 30.0 { x } else { x.exp().ln_1p() };
        let s = 1.0 / (1.0 + (-x).exp());
        self.push(y, &[(a, s)])
    }

    pub fn sigmoid(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let y = if x >= 0.0 {
            1.0 / (1.0 + (-x).exp())
        } else {
            let e = x.exp();
            e / (1.0 + e)
        };
        self.push(y, &[(a, y * (1.0 - y))])
    }

    pub fn exp(&mut self, a: Var) -> Var {
        let y = self.value(a).exp();
        self.push(y, &[(a, y)])
    }

    pub fn ln(&mut self, a: Var) -> Var {
        let x = self.value(a);
        self.push(x.ln(), &[(a, 1.0 / x)])
    }

    /// `a^p` for a constant exponent.
    pub fn powf(&mut self, a: Var, p: f64) -> Var {
        let x = self.value(a);
        self.push(x.powf(p), &[(a, p * x.powf(p - 1.0))])
    }

    pub fn abs(&mut self, a: Var) -> Var {
        let x = self.value(a);
        let s = if x > 0.0 {
            1.0
        } else if x < 0.0 {
            -1.0
        } else {
            0.0
        };
        self.push(x.abs(), &[(a, s)])
    }

    /// Clamps `x` into `[lo, hi]`. The derivative flows to `x` inside the
    /// interval and to the active bound outside it.
    pub fn clamp(&mut self, x: Var, lo: Var, hi: Var) -> Var {
        let (v, l, h) = (self.value(x), self.value(lo), self.value(hi));
        if v < l {
            self.push(l, &[(lo, 1.0)])
        } else if v > h {
            self.push(h, &[(hi, 1.0)])
        } else {
            self.push(v, &[(x, 1.0)])
        }
    }

    /// Clamp against constant bounds.
    pub fn clamp_const(&mut self, x: Var, lo: f64, hi: f64) -> Var {
        let v = self.value(x);
        if v < lo {
            self.push(lo, &[])
        } else if v > hi {
            self.push(hi, &[])
        } else {
            self.push(v, &[(x, 1.0)])
        }
    }

    pub fn sum(&mut self, xs: &[Var]) -> Var {
        let v = xs.iter().map(|x| self.value(*x)).sum();
        if self.record {
            let id = self.values.len() as u32;
            self.values.push(v);
            self.edge_start.push(self.edges.len() as u32);
            self.edges.extend(xs.iter().map(|x| (x.0, 1.0)));
            Var(id)
        } else {
            self.push(v, &[])
        }
    }

    /// `bias + sum_i w_i * x_i`, one node with `2n + 1` edges.
    pub fn dot_bias(&mut self, w: &[Var], x: &[Var], bias: Var) -> Var {
        debug_assert_eq!(w.len(), x.len());
        let mut v = self.value(bias);
        for (a, b) in w.iter().zip(x) {
            v += self.value(*a) * self.value(*b);
        }
        let id = self.values.len() as u32;
        self.values.push(v);
        if self.record {
            self.edge_start.push(self.edges.len() as u32);
            self.edges.push((bias.0, 1.0));
            for (a, b) in w.iter().zip(x) {
                let (va, vb) = (self.values[a.index()], self.values[b.index()]);
                self.edges.push((a.0, vb));
                self.edges.push((b.0, va));
            }
        }
        Var(id)
    }

    /// Adjoints of every tape entry with respect to `output`.
    pub fn gradient(&self, output: Var) -> Vec<f64> {
        assert!(self.record, "gradient requested from a forward-only tape");
        let n = self.values.len();
        let mut adj = vec![0.0; n];
        adj[output.index()] = 1.0;
        for i in (0..=output.index()).rev() {
            let a = adj[i];
            if a == 0.0 {
                continue;
            }
            let start = self.edge_start[i] as usize;
            let end = self.edge_start.get(i + 1).map_or(self.edges.len(), |e| *e as usize);
            for &(p, d) in &self.edges[start..end] {
                adj[p as usize] += a * d;
            }
        }
        adj
    }
}
