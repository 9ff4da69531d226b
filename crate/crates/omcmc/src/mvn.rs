//! Multivariate Gaussian sampling and exact log-density.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::RngStream;

const LN_2PI: f64 = 1.8378770664093453;

/// Gaussian with fixed mean and covariance, factored once at construction.
#[derive(Debug, Clone)]
pub struct MvNormal {
    mean: DVector<f64>,
    chol: Cholesky<f64, Dyn>,
    log_norm: f64,
}

impl MvNormal {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        let d = mean.len();
        if cov.nrows() != d || cov.ncols() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: cov.nrows(),
            });
        }
        let chol = Cholesky::new(cov).ok_or(Error::Covariance)?;
        let log_det: f64 = chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>() * 2.0;
        let log_norm = -0.5 * (d as f64 * LN_2PI + log_det);
        Ok(Self {
            mean,
            chol,
            log_norm,
        })
    }

    pub fn isotropic(mean: DVector<f64>, sigma2: f64) -> Result<Self> {
        let d = mean.len();
        Self::new(mean, DMatrix::identity(d, d) * sigma2)
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn sample(&self, rng: &mut RngStream) -> DVector<f64> {
        let z = DVector::from_fn(self.dim(), |_, _| StandardNormal.sample(rng));
        &self.mean + self.chol.l() * z
    }

    pub fn logpdf(&self, x: &DVector<f64>) -> f64 {
        let diff = x - &self.mean;
        let sol = self.chol.l().solve_lower_triangular(&diff).unwrap();
        self.log_norm - 0.5 * sol.norm_squared()
    }
}
