use nalgebra::{DMatrix, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Eigenvalues of a covariance matrix in `[-PSD_REPAIR_TOL, 0)` are floored
/// to zero; anything more negative is rejected.
pub const PSD_REPAIR_TOL: f64 = 1e-10;
const STOCHASTIC_ROW_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;

/// Gaussian return law of one regime with its sampling factor and the
/// whitening transform used for log-densities.
#[derive(Debug, Clone)]
struct RegimeLaw {
    mu: Vec<f64>,
    cov: Vec<Vec<f64>>,
    /// Row-major `n x n` factor with `factor * factor^T = cov`.
    factor: Vec<f64>,
    /// Row-major `rank x n`; `|whiten * (r - mu)|^2` is the Mahalanobis form.
    whiten: Vec<f64>,
    rank: usize,
    /// `-0.5 * (rank * ln(2 pi) + ln pdet(cov))`.
    log_norm: f64,
}

/// Hidden-Markov regime-switching market: per-regime Gaussian returns for
/// the risky assets, a regime transition matrix, and per-regime risk-free
/// rates.
#[derive(Debug, Clone)]
pub struct RegimeModel {
    n_risky: usize,
    laws: Vec<RegimeLaw>,
    trans: Vec<Vec<f64>>,
    rf: Vec<f64>,
}

impl RegimeModel {
    /// Validates and factorizes a model. `rf` may hold a single rate shared
    /// by every regime or one rate per regime.
    pub fn new(
        mu: Vec<Vec<f64>>,
        cov: Vec<Vec<Vec<f64>>>,
        trans: Vec<Vec<f64>>,
        rf: Vec<f64>,
    ) -> Result<Self> {
        let n_regimes = mu.len();
        if n_regimes == 0 {
            return Err(Error::invalid("mu", "at least one regime is required"));
        }
        let n_risky = mu[0].len();
        for (k, m) in mu.iter().enumerate() {
            if m.len() != n_risky {
                return Err(Error::invalid(
                    format!("mu[{k}]"),
                    format!("has {} entries, expected {n_risky}", m.len()),
                ));
            }
            if let Some(i) = m.iter().position(|x| !x.is_finite()) {
                return Err(Error::invalid(format!("mu[{k}][{i}]"), "not finite"));
            }
        }
        if cov.len() != n_regimes {
            return Err(Error::invalid(
                "cov",
                format!("has {} matrices, expected {n_regimes}", cov.len()),
            ));
        }
        if trans.len() != n_regimes {
            return Err(Error::invalid(
                "trans",
                format!("has {} rows, expected {n_regimes}", trans.len()),
            ));
        }
        for (k, row) in trans.iter().enumerate() {
            if row.len() != n_regimes {
                return Err(Error::invalid(
                    format!("trans[{k}]"),
                    format!("has {} entries, expected {n_regimes}", row.len()),
                ));
            }
            if let Some(l) = row.iter().position(|p| !p.is_finite() || *p < 0.0) {
                return Err(Error::invalid(
                    format!("trans[{k}][{l}]"),
                    "transition probabilities must be finite and nonnegative",
                ));
            }
            let sum: f64 = row.iter().sum();
            if (sum - 1.0).abs() > STOCHASTIC_ROW_TOL {
                return Err(Error::invalid(
                    format!("trans[{k}]"),
                    format!("row sums to {sum}, expected 1"),
                ));
            }
        }
        let rf = match rf.len() {
            1 => vec![rf[0]; n_regimes],
            len if len == n_regimes => rf,
            len => {
                return Err(Error::invalid(
                    "rf",
                    format!("has {len} entries, expected 1 or {n_regimes}"),
                ))
            }
        };
        if let Some(k) = rf.iter().position(|r| !r.is_finite() || *r <= -1.0) {
            return Err(Error::invalid(format!("rf[{k}]"), "must be finite and above -1"));
        }

        let laws = mu
            .into_iter()
            .zip(cov)
            .enumerate()
            .map(|(k, (m, c))| RegimeLaw::new(k, m, c))
            .collect::<Result<Vec<_>>>()?;

        Ok(RegimeModel {
            n_risky,
            laws,
            trans,
            rf,
        })
    }

    pub fn n_risky(&self) -> usize {
        self.n_risky
    }

    pub fn n_regimes(&self) -> usize {
        self.laws.len()
    }

    pub fn mu(&self, regime: usize) -> &[f64] {
        &self.laws[regime].mu
    }

    /// Covariance after eigenvalue flooring.
    pub fn cov(&self, regime: usize) -> &[Vec<f64>] {
        &self.laws[regime].cov
    }

    pub fn trans(&self) -> &[Vec<f64>] {
        &self.trans
    }

    pub fn rf(&self, regime: usize) -> f64 {
        self.rf[regime]
    }

    pub fn rf_all(&self) -> &[f64] {
        &self.rf
    }

    /// Writes `mu + factor * z` for the given standard normal draw.
    pub fn returns_from_normals(&self, regime: usize, z: &[f64], out: &mut [f64]) {
        let law = &self.laws[regime];
        let n = self.n_risky;
        for i in 0..n {
            let row = &law.factor[i * n..(i + 1) * n];
            out[i] = law.mu[i] + row.iter().zip(z).map(|(a, b)| a * b).sum::<f64>();
        }
    }

    /// Next regime given a uniform draw in `[0, 1)`.
    pub fn next_regime_from_uniform(&self, regime: usize, u: f64) -> usize {
        categorical(&self.trans[regime], u)
    }

    /// Draws one period: returns under `regime`, then the regime of the
    /// following period. The normals are drawn before the uniform.
    pub fn sample_step<R: Rng + ?Sized>(&self, regime: usize, rng: &mut R) -> (Vec<f64>, usize) {
        let z: Vec<f64> = (0..self.n_risky).map(|_| rng.sample(StandardNormal)).collect();
        let mut r = vec![0.0; self.n_risky];
        self.returns_from_normals(regime, &z, &mut r);
        let next = self.next_regime_from_uniform(regime, rng.random::<f64>());
        (r, next)
    }

    /// Gaussian log-density of `returns` under `regime`. Singular
    /// covariances use the pseudo-determinant and pseudo-inverse.
    pub fn log_pdf(&self, regime: usize, returns: &[f64]) -> f64 {
        let law = &self.laws[regime];
        let n = self.n_risky;
        let mut quad = 0.0;
        for j in 0..law.rank {
            let row = &law.whiten[j * n..(j + 1) * n];
            let y: f64 = row
                .iter()
                .zip(returns.iter().zip(&law.mu))
                .map(|(w, (r, m))| w * (r - m))
                .sum();
            quad += y * y;
        }
        law.log_norm - 0.5 * quad
    }

    /// Stationary distribution of the regime chain by power iteration from
    /// the uniform vector.
    pub fn stationary(&self) -> Vec<f64> {
        let n = self.n_regimes();
        let mut p = vec![1.0 / n as f64; n];
        for _ in 0..10_000 {
            let mut next = vec![0.0; n];
            for (k, pk) in p.iter().enumerate() {
                for (l, t) in self.trans[k].iter().enumerate() {
                    next[l] += pk * t;
                }
            }
            let diff: f64 = next.iter().zip(&p).map(|(a, b)| (a - b).abs()).sum();
            p = next;
            if diff < 1e-15 {
                break;
            }
        }
        let s: f64 = p.iter().sum();
        p.iter().map(|x| x / s).collect()
    }
}

pub(crate) fn categorical(probs: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    // u landed in the rounding gap above the cumulative sum; take the last
    // state with positive mass.
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}

impl RegimeLaw {
    fn new(k: usize, mu: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let n = mu.len();
        let field = format!("cov[{k}]");
        if cov.len() != n || cov.iter().any(|row| row.len() != n) {
            return Err(Error::invalid(field, format!("must be {n}x{n}")));
        }
        if cov.iter().flatten().any(|x| !x.is_finite()) {
            return Err(Error::invalid(field, "entries must be finite"));
        }
        let scale = cov
            .iter()
            .flatten()
            .fold(0.0f64, |m, x| m.max(x.abs()))
            .max(1.0);
        for i in 0..n {
            for j in 0..i {
                if (cov[i][j] - cov[j][i]).abs() > SYMMETRY_TOL * scale {
                    return Err(Error::invalid(
                        field,
                        format!("not symmetric at ({i},{j}): {} vs {}", cov[i][j], cov[j][i]),
                    ));
                }
            }
        }

        if n == 0 {
            return Ok(RegimeLaw {
                mu,
                cov,
                factor: Vec::new(),
                whiten: Vec::new(),
                rank: 0,
                log_norm: 0.0,
            });
        }
        let m = DMatrix::from_fn(n, n, |i, j| 0.5 * (cov[i][j] + cov[j][i]));
        let eig = SymmetricEigen::new(m.clone());
        let min_eig = eig.eigenvalues.iter().cloned().fold(f64::INFINITY, f64::min);
        if min_eig < -PSD_REPAIR_TOL {
            return Err(Error::invalid(
                field,
                format!("not positive semidefinite: eigenvalue {min_eig:e} below -{PSD_REPAIR_TOL:e}"),
            ));
        }
        let lambdas: Vec<f64> = eig.eigenvalues.iter().map(|l| l.max(0.0)).collect();
        let repaired = min_eig < 0.0;
        let cov_fixed = if repaired {
            let v = &eig.eigenvectors;
            let d = DMatrix::from_diagonal(&nalgebra::DVector::from_vec(lambdas.clone()));
            v * d * v.transpose()
        } else {
            m.clone()
        };

        // Cholesky when positive definite, otherwise the symmetric square
        // root from the eigen-decomposition.
        let factor_m = match cov_fixed.clone().cholesky() {
            Some(ch) => ch.l(),
            None => {
                let v = &eig.eigenvectors;
                DMatrix::from_fn(n, n, |i, j| v[(i, j)] * lambdas[j].sqrt())
            }
        };
        let mut factor = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                factor.push(factor_m[(i, j)]);
            }
        }

        let lmax = lambdas.iter().cloned().fold(0.0, f64::max);
        let cutoff = lmax * 1e-12;
        let mut whiten = Vec::new();
        let mut rank = 0;
        let mut log_det = 0.0;
        for (j, l) in lambdas.iter().enumerate() {
            if *l > cutoff && *l > 0.0 {
                rank += 1;
                log_det += l.ln();
                let s = 1.0 / l.sqrt();
                for i in 0..n {
                    whiten.push(eig.eigenvectors[(i, j)] * s);
                }
            }
        }
        let log_norm = -0.5 * (rank as f64 * (2.0 * std::f64::consts::PI).ln() + log_det);
        let cov = (0..n)
            .map(|i| (0..n).map(|j| cov_fixed[(i, j)]).collect())
            .collect();
        Ok(RegimeLaw {
            mu,
            cov,
            factor,
            whiten,
            rank,
            log_norm,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::{stream, Domain};

    fn one_asset(mu: f64, var: f64) -> RegimeModel {
        RegimeModel::new(vec![vec![mu]], vec![vec![vec![var]]], vec![vec![1.0]], vec![0.0]).unwrap()
    }

    #[test]
    fn zero_covariance_returns_the_mean() {
        let m = RegimeModel::new(
            vec![vec![0.01, -0.02]],
            vec![vec![vec![0.0, 0.0], vec![0.0, 0.0]]],
            vec![vec![1.0]],
            vec![0.0],
        )
        .unwrap();
        let mut rng = stream(1, Domain::Misc, 0);
        for _ in 0..10 {
            let (r, next) = m.sample_step(0, &mut rng);
            assert_eq!(r, vec![0.01, -0.02]);
            assert_eq!(next, 0);
        }
    }

    #[test]
    fn identity_transition_is_absorbing() {
        let m = RegimeModel::new(
            vec![vec![0.0], vec![0.0]],
            vec![vec![vec![0.01]], vec![vec![0.02]]],
            vec![vec![1.0, 0.0], vec![0.0, 1.0]],
            vec![0.0],
        )
        .unwrap();
        let mut rng = stream(2, Domain::Misc, 0);
        for regime in 0..2 {
            for _ in 0..100 {
                assert_eq!(m.sample_step(regime, &mut rng).1, regime);
            }
        }
    }

    #[test]
    fn sample_mean_within_clt_bound() {
        let m = one_asset(0.002, 0.0009);
        let mut rng = stream(3, Domain::Misc, 0);
        let n = 1_000_000;
        let mean = (0..n).map(|_| m.sample_step(0, &mut rng).0[0]).sum::<f64>() / n as f64;
        // three standard errors: 3 * 0.03 / 1000
        assert!((mean - 0.002).abs() <= 3.0 * 0.03 / 1e3, "mean {mean}");
    }

    #[test]
    fn log_pdf_matches_univariate_formula() {
        let m = one_asset(0.01, 0.04);
        let x = 0.13;
        let expect = -0.5 * ((2.0 * std::f64::consts::PI * 0.04).ln() + (x - 0.01f64).powi(2) / 0.04);
        assert!((m.log_pdf(0, &[x]) - expect).abs() < 1e-13);
    }

    #[test]
    fn rejects_bad_transition_row() {
        let err = RegimeModel::new(
            vec![vec![0.0], vec![0.0]],
            vec![vec![vec![0.01]], vec![vec![0.01]]],
            vec![vec![0.5, 0.5], vec![0.6, 0.3]],
            vec![0.0],
        )
        .unwrap_err();
        assert!(err.to_string().contains("trans[1]"), "{err}");
    }

    #[test]
    fn psd_repair_threshold() {
        // eigenvalues of [[a, b], [b, a]] are a +- b
        let build = |neg: f64| {
            let a = (1.0 - neg) / 2.0;
            let b = (1.0 + neg) / 2.0;
            RegimeModel::new(
                vec![vec![0.0, 0.0]],
                vec![vec![vec![a, b], vec![b, a]]],
                vec![vec![1.0]],
                vec![0.0],
            )
        };
        assert!(build(1e-3).is_err());
        assert!(build(1e-13).is_ok());
    }

    #[test]
    fn stationary_distribution() {
        let m = RegimeModel::new(
            vec![vec![0.0], vec![0.0]],
            vec![vec![vec![0.01]], vec![vec![0.01]]],
            vec![vec![0.9, 0.1], vec![0.3, 0.7]],
            vec![0.0],
        )
        .unwrap();
        let p = m.stationary();
        assert!((p[0] - 0.75).abs() < 1e-12 && (p[1] - 0.25).abs() < 1e-12);
    }
}
