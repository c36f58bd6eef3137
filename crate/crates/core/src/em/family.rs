//! Per-family pieces of the EM engine: row evaluation, random starts and
//! the closed-form component updates.

use alloc::vec::Vec;
use core::fmt::Debug;

use nalgebra::{DMatrix, DVector};

use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::gaussian::GaussianComponent;
use crate::linalg::{repair_covariance, SpdMatrix};
use crate::metrics::ModelKind;
use crate::mixture::{ComponentDensity, RowEval};
use crate::sal::SalComponent;

use super::EStepQuantities;

/// Smallest soft count a component may carry into an M-step.
pub fn empty_component_floor(p: usize) -> usize {
    (p + 1).max(2)
}

/// Mutable per-component bookkeeping carried across iterations.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComponentState {
    /// Shift frozen by the degeneracy safeguard.
    pub frozen_shift: Option<DVector<f64>>,
}

/// What an M-step may do about shifts that walk onto observations.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FreezePolicy {
    /// Annealing: never freeze.
    Off,
    /// Freeze when a candidate shift is within this squared Euclidean distance of a row.
    Threshold(f64),
}

/// A component family the shared engine can fit.
pub trait MixtureFamily {
    type Component: ComponentDensity + Clone + Debug;
    const KIND: ModelKind;

    /// Log-density of `x` plus latent-scale moments; `e_inv_w_cap` is only
    /// set while annealing.
    fn evaluate(c: &Self::Component, x: &[f64], e_inv_w_cap: Option<f64>) -> Result<RowEval>;

    /// Component used by a random start centred on an observation.
    fn initial_component(center: &[f64], cov: &SpdMatrix) -> Result<Self::Component>;

    /// The component with its location moved by `delta`.
    fn translated(c: &Self::Component, delta: &DVector<f64>) -> Result<Self::Component>;

    /// Safeguard state for a component at the start of a fit.
    fn initial_state(_c: &Self::Component, _data: &DataSet, _freeze: FreezePolicy) -> ComponentState {
        ComponentState::default()
    }

    /// Closed-form update of component `g`.
    fn update(
        data: &DataSet,
        e: &EStepQuantities,
        g: usize,
        prev: &Self::Component,
        state: &mut ComponentState,
        freeze: FreezePolicy,
    ) -> Result<Self::Component>;
}

/// Weighted sums over rows for one component.
pub(crate) struct WeightedSums {
    /// `Σ τ`
    pub n_g: f64,
    /// `Σ τ E[W]`
    pub sum_w: f64,
    /// `Σ τ E[1/W]`
    pub sum_inv_w: f64,
    /// `Σ τ x`
    pub sum_x: DVector<f64>,
    /// `Σ τ E[1/W] x`
    pub sum_inv_w_x: DVector<f64>,
}

pub(crate) fn weighted_sums(data: &DataSet, e: &EStepQuantities, g: usize) -> WeightedSums {
    let p = data.p();
    let mut s = WeightedSums {
        n_g: 0.0,
        sum_w: 0.0,
        sum_inv_w: 0.0,
        sum_x: DVector::zeros(p),
        sum_inv_w_x: DVector::zeros(p),
    };
    for (i, x) in data.rows().enumerate() {
        let t = e.tau[(i, g)];
        if t == 0.0 {
            continue;
        }
        let ti = t * e.e_inv_w[(i, g)];
        s.n_g += t;
        s.sum_w += t * e.e_w[(i, g)];
        s.sum_inv_w += ti;
        for j in 0..p {
            s.sum_x[j] += t * x[j];
            s.sum_inv_w_x[j] += ti * x[j];
        }
    }
    s
}

fn check_count(s: &WeightedSums, p: usize, g: usize) -> Result<()> {
    let floor = empty_component_floor(p);
    if !(s.n_g >= floor as f64) {
        return Err(Error::EmptyComponent { component: g, count: s.n_g, floor });
    }
    Ok(())
}

/// `n_g`, `S_g = (1/n_g) Σ τ E[1/W] (x - μ)(x - μ)'` and
/// `r_g = (1/n_g) Σ τ (x - μ)` about a given shift `μ`.
#[derive(Debug, Clone, PartialEq)]
pub struct MStepSufficientStats {
    pub n_g: f64,
    pub s_g: DMatrix<f64>,
    pub r_g: DVector<f64>,
}

impl MStepSufficientStats {
    pub fn compute(data: &DataSet, e: &EStepQuantities, g: usize, mu: &DVector<f64>) -> Self {
        let p = data.p();
        let mut sm = DMatrix::zeros(p, p);
        let mut r = DVector::zeros(p);
        let mut d = DVector::zeros(p);
        let mut n_g = 0.0;
        for (i, x) in data.rows().enumerate() {
            let t = e.tau[(i, g)];
            if t == 0.0 {
                continue;
            }
            n_g += t;
            let ti = t * e.e_inv_w[(i, g)];
            for j in 0..p {
                d[j] = x[j] - mu[j];
                r[j] += t * d[j];
            }
            for a in 0..p {
                for b in 0..=a {
                    sm[(a, b)] += ti * d[a] * d[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                sm[(b, a)] = sm[(a, b)];
            }
        }
        MStepSufficientStats { n_g, s_g: sm / n_g, r_g: r / n_g }
    }
}

/// `S_g - α r' - r α' + (Σ τ E[W] / n_g) α α'` about `mu`.
fn sal_scale_matrix(data: &DataSet, e: &EStepQuantities, g: usize, s: &WeightedSums, mu: &DVector<f64>, alpha: &DVector<f64>) -> DMatrix<f64> {
    let st = MStepSufficientStats::compute(data, e, g, mu);
    let ar = alpha * st.r_g.transpose();
    st.s_g - &ar - ar.transpose() + alpha * alpha.transpose() * (s.sum_w / s.n_g)
}

fn finish_sal(mu: DVector<f64>, alpha: DVector<f64>, sigma: DMatrix<f64>, g: usize) -> Result<SalComponent> {
    let sigma = repair_covariance(sigma).ok_or(Error::CovarianceRepairFailed { component: g })?;
    SalComponent::from_parts(mu, alpha, sigma).map_err(|_| Error::CovarianceRepairFailed { component: g })
}

/// Joint closed-form `(μ̂_g, α̂_g)`.
///
/// The system is only concave when `Σ τ E[W] · Σ τ E[1/W] > n_g²`. That
/// fails in the Gaussian limit (equality) and whenever the annealing cap on
/// `E[1/W]` bites; the ratio formulas would then return a saddle point, so
/// fall back to `α = 0` with the `E[1/W]`-weighted mean.
fn free_shift_and_skew(s: &WeightedSums) -> (DVector<f64>, DVector<f64>) {
    let denom = s.sum_w * s.sum_inv_w - s.n_g * s.n_g;
    if denom <= 1e-10 * s.n_g * s.n_g {
        return (&s.sum_inv_w_x / s.sum_inv_w, DVector::zeros(s.sum_x.len()));
    }
    let mu = (&s.sum_inv_w_x * s.sum_w - &s.sum_x * s.n_g) / denom;
    let alpha = (&s.sum_x * s.sum_inv_w - &s.sum_inv_w_x * s.n_g) / denom;
    (mu, alpha)
}

/// Unrestricted SAL update of component `g` (no degeneracy handling).
pub fn sal_component_update(data: &DataSet, e: &EStepQuantities, g: usize) -> Result<SalComponent> {
    let s = weighted_sums(data, e, g);
    check_count(&s, data.p(), g)?;
    let (mu, alpha) = free_shift_and_skew(&s);
    let sigma = sal_scale_matrix(data, e, g, &s, &mu, &alpha);
    finish_sal(mu, alpha, sigma, g)
}

/// SAL update of component `g` with the shift held at `mu_star`:
/// `α* = Σ τ (x - μ*) / Σ τ E[W]` and `Σ` from the usual update about `μ*`.
pub fn frozen_shift_update(data: &DataSet, e: &EStepQuantities, g: usize, mu_star: &DVector<f64>) -> Result<SalComponent> {
    let s = weighted_sums(data, e, g);
    check_count(&s, data.p(), g)?;
    let alpha = (&s.sum_x - mu_star * s.n_g) / s.sum_w;
    let sigma = sal_scale_matrix(data, e, g, &s, mu_star, &alpha);
    finish_sal(mu_star.clone(), alpha, sigma, g)
}

/// Smallest squared Euclidean distance from `point` to any row.
pub(crate) fn nearest_row_sq_distance(data: &DataSet, point: &[f64]) -> f64 {
    data.rows()
        .map(|x| x.iter().zip(point).map(|(a, b)| (a - b) * (a - b)).sum::<f64>())
        .fold(f64::INFINITY, f64::min)
}

pub struct SalFamily;

impl MixtureFamily for SalFamily {
    type Component = SalComponent;
    const KIND: ModelKind = ModelKind::Sal;

    fn evaluate(c: &SalComponent, x: &[f64], e_inv_w_cap: Option<f64>) -> Result<RowEval> {
        c.evaluate(x, crate::sal::SHIFT_POINT_TOL, e_inv_w_cap)
    }

    fn initial_component(center: &[f64], cov: &SpdMatrix) -> Result<SalComponent> {
        SalComponent::from_parts(DVector::from_column_slice(center), DVector::zeros(center.len()), cov.clone())
    }

    fn translated(c: &SalComponent, delta: &DVector<f64>) -> Result<SalComponent> {
        SalComponent::from_parts(c.mu() + delta, c.alpha().clone(), c.sigma_spd().clone())
    }

    fn initial_state(c: &SalComponent, data: &DataSet, freeze: FreezePolicy) -> ComponentState {
        match freeze {
            FreezePolicy::Threshold(t) if nearest_row_sq_distance(data, c.mu().as_slice()) < t => {
                ComponentState { frozen_shift: Some(c.mu().clone()) }
            }
            _ => ComponentState::default(),
        }
    }

    fn update(
        data: &DataSet,
        e: &EStepQuantities,
        g: usize,
        prev: &SalComponent,
        state: &mut ComponentState,
        freeze: FreezePolicy,
    ) -> Result<SalComponent> {
        if let Some(mu_star) = &state.frozen_shift {
            return frozen_shift_update(data, e, g, mu_star);
        }
        let s = weighted_sums(data, e, g);
        check_count(&s, data.p(), g)?;
        let (mu, alpha) = free_shift_and_skew(&s);
        if let FreezePolicy::Threshold(t) = freeze {
            if nearest_row_sq_distance(data, mu.as_slice()) < t {
                let mu_star = prev.mu().clone();
                let c = frozen_shift_update(data, e, g, &mu_star)?;
                state.frozen_shift = Some(mu_star);
                return Ok(c);
            }
        }
        let sigma = sal_scale_matrix(data, e, g, &s, &mu, &alpha);
        finish_sal(mu, alpha, sigma, g)
    }
}

pub struct GaussianFamily;

/// Weighted mean and covariance update for Gaussian component `g`.
pub fn gaussian_component_update(data: &DataSet, e: &EStepQuantities, g: usize) -> Result<GaussianComponent> {
    let p = data.p();
    let s = weighted_sums(data, e, g);
    check_count(&s, p, g)?;
    let mean = &s.sum_x / s.n_g;
    let mut cov = DMatrix::zeros(p, p);
    let mut d: Vec<f64> = alloc::vec![0.0; p];
    for (i, x) in data.rows().enumerate() {
        let t = e.tau[(i, g)];
        if t == 0.0 {
            continue;
        }
        for j in 0..p {
            d[j] = x[j] - mean[j];
        }
        for a in 0..p {
            for b in 0..=a {
                cov[(a, b)] += t * d[a] * d[b];
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            cov[(b, a)] = cov[(a, b)];
        }
    }
    cov /= s.n_g;
    let cov = repair_covariance(cov).ok_or(Error::CovarianceRepairFailed { component: g })?;
    GaussianComponent::from_parts(mean, cov)
}

impl MixtureFamily for GaussianFamily {
    type Component = GaussianComponent;
    const KIND: ModelKind = ModelKind::Gaussian;

    fn evaluate(c: &GaussianComponent, x: &[f64], _e_inv_w_cap: Option<f64>) -> Result<RowEval> {
        c.evaluate(x)
    }

    fn initial_component(center: &[f64], cov: &SpdMatrix) -> Result<GaussianComponent> {
        GaussianComponent::from_parts(DVector::from_column_slice(center), cov.clone())
    }

    fn translated(c: &GaussianComponent, delta: &DVector<f64>) -> Result<GaussianComponent> {
        GaussianComponent::from_parts(c.mean() + delta, c.covariance_spd().clone())
    }

    fn update(
        data: &DataSet,
        e: &EStepQuantities,
        g: usize,
        _prev: &GaussianComponent,
        _state: &mut ComponentState,
        _freeze: FreezePolicy,
    ) -> Result<GaussianComponent> {
        gaussian_component_update(data, e, g)
    }
}
