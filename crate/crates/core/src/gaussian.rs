//! Multivariate Gaussian components for the baseline mixture.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::mixture::{ComponentDensity, Mixture, RowEval};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

#[derive(Debug, Clone, PartialEq)]
pub struct GaussianComponent {
    mean: DVector<f64>,
    cov: SpdMatrix,
}

pub type GaussianMixture = Mixture<GaussianComponent>;

impl GaussianComponent {
    pub fn new(mean: DVector<f64>, cov: DMatrix<f64>) -> Result<Self> {
        GaussianComponent::from_parts(mean, SpdMatrix::new(cov)?)
    }

    pub fn from_parts(mean: DVector<f64>, cov: SpdMatrix) -> Result<Self> {
        if mean.len() != cov.dim() {
            return Err(Error::DimensionMismatch { expected: cov.dim(), got: mean.len() });
        }
        if mean.iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("mean must be finite"));
        }
        Ok(GaussianComponent { mean, cov })
    }

    pub fn mean(&self) -> &DVector<f64> {
        &self.mean
    }

    pub fn covariance(&self) -> &DMatrix<f64> {
        self.cov.matrix()
    }

    pub fn covariance_spd(&self) -> &SpdMatrix {
        &self.cov
    }

    pub(crate) fn evaluate(&self, x: &[f64]) -> Result<RowEval> {
        Ok(RowEval { log_density: self.log_density(x)?, e_w: 1.0, e_inv_w: 1.0 })
    }

    pub(crate) fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let p = self.mean.len();
        let z: Vec<f64> = (0..p).map(|_| rng.sample(StandardNormal)).collect();
        let l = self.cov.cholesky_lower();
        for i in 0..p {
            out[i] = self.mean[i] + (0..=i).map(|k| l[(i, k)] * z[k]).sum::<f64>();
        }
    }
}

impl ComponentDensity for GaussianComponent {
    fn dim(&self) -> usize {
        self.mean.len()
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        let p = self.mean.len();
        if x.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: x.len() });
        }
        let diff: Vec<f64> = x.iter().zip(self.mean.iter()).map(|(a, b)| a - b).collect();
        Ok(-0.5 * (p as f64 * LN_2PI + self.cov.log_det() + self.cov.quad_form(&diff)))
    }
}
