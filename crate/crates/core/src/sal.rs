//! Shifted asymmetric Laplace (SAL) distribution.
//!
//! `X = μ + Wα + √W·Y` with `W ~ Exp(1)` and `Y ~ N(0, Σ)`. Conditional on
//! an observation the latent scale `W` is GIG with `a = 2 + α'Σ⁻¹α`,
//! `b = δ(x, μ | Σ)` (squared Mahalanobis distance) and `ν = (2 - p)/2`.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::SpdMatrix;
use crate::mixture::{ComponentDensity, Mixture, RowEval};
use crate::special::{gig_moments_from_triple, log_bessel_k_triple, GigParams};

const LN_2PI: f64 = 1.837_877_066_409_345_5;

/// Below this squared Mahalanobis distance an observation is treated as
/// sitting on the shift point.
pub const SHIFT_POINT_TOL: f64 = 1e-300;

/// One SAL component `(μ, α, Σ)` with the factorization of `Σ` cached.
#[derive(Debug, Clone, PartialEq)]
pub struct SalComponent {
    mu: DVector<f64>,
    alpha: DVector<f64>,
    sigma: SpdMatrix,
    alpha_white: Vec<f64>,
    quad_alpha: f64,
}

/// Quadratic forms shared by the density and the latent-scale posterior.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvaluationTerms {
    /// `(x-μ)'Σ⁻¹(x-μ)`
    pub delta: f64,
    /// `α'Σ⁻¹α`
    pub quad_alpha: f64,
    /// `(x-μ)'Σ⁻¹α`
    pub dot_term: f64,
    /// `sqrt((2 + α'Σ⁻¹α) δ)`
    pub u: f64,
    /// `(2 - p)/2`
    pub nu: f64,
}

impl SalComponent {
    pub fn new(mu: DVector<f64>, alpha: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        SalComponent::from_parts(mu, alpha, SpdMatrix::new(sigma)?)
    }

    pub fn from_parts(mu: DVector<f64>, alpha: DVector<f64>, sigma: SpdMatrix) -> Result<Self> {
        let p = sigma.dim();
        if mu.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: mu.len() });
        }
        if alpha.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: alpha.len() });
        }
        if mu.iter().chain(alpha.iter()).any(|v| !v.is_finite()) {
            return Err(Error::Domain("shift and skewness must be finite"));
        }
        let alpha_white = sigma.whiten(alpha.as_slice());
        let quad_alpha = alpha_white.iter().map(|v| v * v).sum();
        Ok(SalComponent { mu, alpha, sigma, alpha_white, quad_alpha })
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn alpha(&self) -> &DVector<f64> {
        &self.alpha
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        self.sigma.matrix()
    }

    pub fn sigma_spd(&self) -> &SpdMatrix {
        &self.sigma
    }

    pub fn sigma_chol(&self) -> &DMatrix<f64> {
        self.sigma.cholesky_lower()
    }

    pub fn sigma_inv(&self) -> &DMatrix<f64> {
        self.sigma.inverse()
    }

    pub fn log_det_sigma(&self) -> f64 {
        self.sigma.log_det()
    }

    pub fn terms(&self, x: &[f64]) -> Result<EvaluationTerms> {
        let p = self.mu.len();
        if x.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: x.len() });
        }
        let mut y: Vec<f64> = x.iter().zip(self.mu.iter()).map(|(a, b)| a - b).collect();
        self.sigma.whiten_in_place(&mut y);
        let delta: f64 = y.iter().map(|v| v * v).sum();
        let dot_term = y.iter().zip(&self.alpha_white).map(|(a, b)| a * b).sum();
        Ok(EvaluationTerms {
            delta,
            quad_alpha: self.quad_alpha,
            dot_term,
            u: ((2.0 + self.quad_alpha) * delta).sqrt(),
            nu: (2.0 - p as f64) / 2.0,
        })
    }

    /// Log-density and GIG posterior moments from one Bessel evaluation.
    ///
    /// `delta_floor` replaces distances below it (used where the caller has
    /// its own degeneracy handling); `e_inv_w_cap` clips `E[1/W]`, raising
    /// `E[W]` to `1 / cap` where needed so that `E[W] E[1/W] >= 1` still holds.
    pub(crate) fn evaluate(&self, x: &[f64], delta_floor: f64, e_inv_w_cap: Option<f64>) -> Result<RowEval> {
        let mut t = self.terms(x)?;
        if t.delta < delta_floor {
            t.delta = delta_floor;
            t.u = ((2.0 + t.quad_alpha) * t.delta).sqrt();
        }
        if t.delta < SHIFT_POINT_TOL {
            return Err(Error::AtShiftPoint { delta: t.delta });
        }
        let k = log_bessel_k_triple(t.nu, t.u)?;
        let a = 2.0 + t.quad_alpha;
        let log_density = log_density_from_terms(&t, self.log_det_sigma(), self.mu.len(), k.at);
        let (mut e_w, mut e_inv_w) = gig_moments_from_triple(&GigParams { a, b: t.delta, nu: t.nu }, &k);
        if let Some(cap) = e_inv_w_cap {
            if e_inv_w > cap {
                // Keep E[W] E[1/W] >= 1, which any scale distribution satisfies.
                e_inv_w = cap;
                e_w = e_w.max(1.0 / cap);
            }
        }
        Ok(RowEval { log_density, e_w, e_inv_w })
    }

    /// Draws one observation; stream order is `W` (one uniform) then the
    /// `p` standard normals of `Y`.
    pub(crate) fn draw_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut [f64]) {
        let u: f64 = rng.random();
        let w = -(1.0 - u).ln();
        let z: Vec<f64> = (0..self.mu.len()).map(|_| rng.sample(StandardNormal)).collect();
        let l = self.sigma.cholesky_lower();
        let sw = w.sqrt();
        for i in 0..self.mu.len() {
            let y: f64 = (0..=i).map(|k| l[(i, k)] * z[k]).sum();
            out[i] = self.mu[i] + w * self.alpha[i] + sw * y;
        }
    }
}

fn log_density_from_terms(t: &EvaluationTerms, log_det: f64, p: usize, log_k: f64) -> f64 {
    core::f64::consts::LN_2 + t.dot_term - 0.5 * p as f64 * LN_2PI - 0.5 * log_det
        + 0.5 * t.nu * (t.delta / (2.0 + t.quad_alpha)).ln()
        + log_k
}

impl ComponentDensity for SalComponent {
    fn dim(&self) -> usize {
        self.mu.len()
    }

    fn log_density(&self, x: &[f64]) -> Result<f64> {
        sal_log_density(x, self)
    }
}

/// A mixture of SAL components.
pub type SalMixture = Mixture<SalComponent>;

/// `ln ξ(x | α, Σ, μ)`.
///
/// Fails with [`Error::AtShiftPoint`] when `x` coincides with `μ`, where the
/// density is unbounded for `p >= 2`.
pub fn sal_log_density(x: &[f64], c: &SalComponent) -> Result<f64> {
    let t = c.terms(x)?;
    if t.delta < SHIFT_POINT_TOL {
        return Err(Error::AtShiftPoint { delta: t.delta });
    }
    let log_k = crate::special::log_bessel_k(t.nu, t.u)?;
    Ok(log_density_from_terms(&t, c.log_det_sigma(), c.dim(), log_k))
}

/// `ln Σ_g π_g ξ(x | α_g, Σ_g, μ_g)`.
pub fn sal_mixture_log_density(x: &[f64], m: &SalMixture) -> Result<f64> {
    m.log_density(x)
}

/// GIG parameters of the posterior of the latent scale `W` given `x`.
pub fn posterior_w_params(x: &[f64], c: &SalComponent) -> Result<GigParams> {
    let t = c.terms(x)?;
    if t.delta < SHIFT_POINT_TOL {
        return Err(Error::AtShiftPoint { delta: t.delta });
    }
    Ok(GigParams { a: 2.0 + t.quad_alpha, b: t.delta, nu: t.nu })
}

/// `n` draws from one SAL component as an `n × p` matrix, deterministic in `seed`.
pub fn sample_sal(c: &SalComponent, n: usize, seed: u64) -> DMatrix<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = c.dim();
    let mut out = DMatrix::zeros(n, p);
    let mut row = vec![0.0; p];
    for i in 0..n {
        c.draw_into(&mut rng, &mut row);
        for j in 0..p {
            out[(i, j)] = row[j];
        }
    }
    out
}
