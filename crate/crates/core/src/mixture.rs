//! Finite mixtures over an arbitrary component density.

use alloc::vec::Vec;

#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// A component density that can be evaluated in log scale.
pub trait ComponentDensity {
    fn dim(&self) -> usize;
    fn log_density(&self, x: &[f64]) -> Result<f64>;
}

/// Log-density and latent-scale moments of one observation under one component.
///
/// Families without a latent scale report `e_w = e_inv_w = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RowEval {
    pub log_density: f64,
    pub e_w: f64,
    pub e_inv_w: f64,
}

/// Mixing weights `π` plus `G` components of a common dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture<C> {
    weights: Vec<f64>,
    components: Vec<C>,
}

impl<C: ComponentDensity> Mixture<C> {
    /// Weights must be strictly positive and sum to one within `1e-9`;
    /// they are renormalized to remove the residual.
    pub fn new(weights: Vec<f64>, components: Vec<C>) -> Result<Self> {
        if weights.is_empty() || weights.len() != components.len() {
            return Err(Error::DimensionMismatch { expected: components.len(), got: weights.len() });
        }
        if weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::Domain("mixing weights must be strictly positive"));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Domain("mixing weights must sum to one"));
        }
        let p = components[0].dim();
        if let Some(c) = components.iter().find(|c| c.dim() != p) {
            return Err(Error::DimensionMismatch { expected: p, got: c.dim() });
        }
        let weights = weights.into_iter().map(|w| w / total).collect();
        Ok(Mixture { weights, components })
    }

    pub fn g(&self) -> usize {
        self.components.len()
    }

    pub fn dim(&self) -> usize {
        self.components[0].dim()
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn components(&self) -> &[C] {
        &self.components
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<C>) {
        (self.weights, self.components)
    }

    /// `ln Σ_g π_g f_g(x)`, evaluated with the max-shift.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        let mut terms = Vec::with_capacity(self.g());
        for (w, c) in self.weights.iter().zip(&self.components) {
            terms.push(w.ln() + c.log_density(x)?);
        }
        Ok(log_sum_exp(&terms))
    }
}

/// Numerically stable `ln Σ exp(v_i)`.
pub fn log_sum_exp(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return max;
    }
    max + v.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}
