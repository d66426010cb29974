//! Multivariate normal with Cholesky-backed density, sampling and
//! conditioning. All density work happens in log space.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

const LN_2PI: f64 = 1.8378770664093453;

/// A nondegenerate Gaussian law. Covariance is symmetrized and, if needed,
/// ridge-conditioned at construction; `ridged` records whether that happened.
#[derive(Clone, Debug)]
pub struct Gaussian {
    mean: DVector<f64>,
    cov: DMatrix<f64>,
    chol: Cholesky<f64, Dyn>,
    ridged: bool,
}

impl Gaussian {
    pub fn new(mean: Vec<f64>, cov: Vec<Vec<f64>>) -> Result<Self> {
        let k = mean.len();
        if cov.len() != k || cov.iter().any(|row| row.len() != k) {
            return Err(Error::Config(format!("covariance must be {k}x{k}")));
        }
        let mean = DVector::from_vec(mean);
        let cov = DMatrix::from_fn(k, k, |i, j| cov[i][j]);
        Self::from_parts(mean, cov)
    }

    pub fn from_parts(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let k = mean.len();
        if mean.iter().any(|v| !v.is_finite()) || cov.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("gaussian parameters".into()));
        }
        // Symmetrize; asymmetry beyond roundoff is a caller bug but harmless to fix.
        let mut s = DMatrix::zeros(k, k);
        for i in 0..k {
            for j in 0..k {
                s[(i, j)] = 0.5 * (cov[(i, j)] + cov[(j, i)]);
            }
        }
        let trace: f64 = (0..k).map(|i| s[(i, i)]).sum();
        let base_ridge = 1e-8 * trace.max(1e-8) / k as f64;
        let mut ridged = false;
        let mut ridge = 0.0;
        for attempt in 0..40 {
            let mut trial = s.clone();
            for i in 0..k {
                trial[(i, i)] += ridge;
            }
            if let Some(chol) = Cholesky::new(trial.clone()) {
                return Ok(Gaussian {
                    mean,
                    cov: trial,
                    chol,
                    ridged,
                });
            }
            ridged = true;
            ridge = if attempt == 0 { base_ridge } else { ridge * 10.0 };
        }
        Err(Error::SingularCovariance(format!("{k}-dimensional covariance")))
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn cov(&self) -> &DMatrix<f64> {
        &self.cov
    }

    pub fn was_ridged(&self) -> bool {
        self.ridged
    }

    pub fn log_pdf(&self, x: &[f64]) -> f64 {
        let k = self.dim();
        debug_assert_eq!(x.len(), k);
        let diff = DVector::from_iterator(k, x.iter().zip(self.mean.iter()).map(|(a, b)| a - b));
        let solved = self.chol.solve(&diff);
        let maha = diff.dot(&solved);
        let log_det: f64 = self.chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        -0.5 * (k as f64 * LN_2PI + log_det + maha)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let k = self.dim();
        let z = DVector::from_fn(k, |_, _| rng.sample::<f64, _>(StandardNormal));
        let x = &self.mean + self.chol.l() * z;
        x.iter().copied().collect()
    }

    /// Marginal over a subset of coordinates (positions into this law).
    pub fn marginal(&self, idx: &[usize]) -> Result<Gaussian> {
        let mean = DVector::from_iterator(idx.len(), idx.iter().map(|&i| self.mean[i]));
        let cov = DMatrix::from_fn(idx.len(), idx.len(), |a, b| self.cov[(idx[a], idx[b])]);
        Gaussian::from_parts(mean, cov)
    }

    /// Conditional law of the `target` coordinates given the `given`
    /// coordinates pinned at `values`. Index sets are positions into this law
    /// and must be disjoint.
    pub fn conditional(&self, target: &[usize], given: &[usize], values: &[f64]) -> Result<Gaussian> {
        let (c, m, cov) = self.regression(target, given)?;
        let a = DVector::from_column_slice(values);
        let mean = c + &m * a;
        Gaussian::from_parts(mean, cov)
    }

    /// Affine representation of the conditional expectation:
    /// `E[X_target | X_given = a] = c + M a`, plus the conditional covariance.
    pub fn regression(&self, target: &[usize], given: &[usize]) -> Result<(DVector<f64>, DMatrix<f64>, DMatrix<f64>)> {
        let mu_t = DVector::from_iterator(target.len(), target.iter().map(|&i| self.mean[i]));
        if given.is_empty() {
            let cov = DMatrix::from_fn(target.len(), target.len(), |a, b| self.cov[(target[a], target[b])]);
            return Ok((mu_t, DMatrix::zeros(target.len(), 0), cov));
        }
        let mu_g = DVector::from_iterator(given.len(), given.iter().map(|&i| self.mean[i]));
        let s_tt = DMatrix::from_fn(target.len(), target.len(), |a, b| self.cov[(target[a], target[b])]);
        let s_tg = DMatrix::from_fn(target.len(), given.len(), |a, b| self.cov[(target[a], given[b])]);
        let s_gg = DMatrix::from_fn(given.len(), given.len(), |a, b| self.cov[(given[a], given[b])]);
        let chol = Cholesky::new(s_gg).ok_or_else(|| Error::SingularCovariance("conditioning block".into()))?;
        // M = S_tg S_gg^{-1}
        let m = chol.solve(&s_tg.transpose()).transpose();
        let c = &mu_t - &m * &mu_g;
        let cov = &s_tt - &m * s_tg.transpose();
        Ok((c, m, cov))
    }
}

/// log(Σ exp(x_i)) with the usual max shift.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let m = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + xs.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}
