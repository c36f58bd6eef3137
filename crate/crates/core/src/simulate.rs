//! Synthetic data from SAL or Gaussian mixtures.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::gaussian::GaussianComponent;
use crate::sal::SalComponent;

/// Components to draw from. Weights may contain zeros.
#[derive(Debug, Clone, PartialEq)]
pub enum SimComponents {
    Sal(Vec<SalComponent>),
    Gaussian(Vec<GaussianComponent>),
}

impl SimComponents {
    fn len(&self) -> usize {
        match self {
            SimComponents::Sal(c) => c.len(),
            SimComponents::Gaussian(c) => c.len(),
        }
    }

    fn dim(&self) -> usize {
        match self {
            SimComponents::Sal(c) => c[0].mu().len(),
            SimComponents::Gaussian(c) => c[0].mean().len(),
        }
    }

    fn draw_into(&self, g: usize, rng: &mut ChaCha8Rng, out: &mut [f64]) {
        match self {
            SimComponents::Sal(c) => c[g].draw_into(rng, out),
            SimComponents::Gaussian(c) => c[g].draw_into(rng, out),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationSpec {
    pub weights: Vec<f64>,
    pub components: SimComponents,
    pub n: usize,
    pub datasets: usize,
    pub seed: u64,
}

impl SimulationSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 || self.datasets == 0 {
            return Err(Error::InvalidConfig("n and datasets must be at least 1"));
        }
        if self.components.len() == 0 || self.weights.len() != self.components.len() {
            return Err(Error::DimensionMismatch { expected: self.components.len(), got: self.weights.len() });
        }
        if self.weights.iter().any(|w| !(w.is_finite() && *w >= 0.0)) {
            return Err(Error::Domain("weights must be nonnegative"));
        }
        if (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Domain("weights must sum to one"));
        }
        Ok(())
    }
}

/// Two skewed bivariate components: `n = 500`, 25 data sets, equal weights,
/// `α = (2,1), (2,2)`, `μ = (0,-2), (0,5)`, `Σ₁ = [[1, .5], [.5, 1]]`, `Σ₂ = I`.
pub fn paper_sim_spec(seed: u64) -> SimulationSpec {
    let c1 = SalComponent::new(
        DVector::from_vec(vec![0.0, -2.0]),
        DVector::from_vec(vec![2.0, 1.0]),
        DMatrix::from_row_slice(2, 2, &[1.0, 0.5, 0.5, 1.0]),
    )
    .expect("valid component");
    let c2 = SalComponent::new(DVector::from_vec(vec![0.0, 5.0]), DVector::from_vec(vec![2.0, 2.0]), DMatrix::identity(2, 2))
        .expect("valid component");
    SimulationSpec { weights: vec![0.5, 0.5], components: SimComponents::Sal(vec![c1, c2]), n: 500, datasets: 25, seed }
}

fn categorical(weights: &[f64], u: f64) -> usize {
    let mut acc = 0.0;
    for (g, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return g;
        }
    }
    weights.iter().rposition(|&w| w > 0.0).unwrap_or(0)
}

/// One data set per index; data set `d` uses stream `d` of the seed, so
/// each can be generated independently. Labels are 0-based components.
pub fn generate_one(spec: &SimulationSpec, d: usize) -> Result<DataSet> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(d as u64);
    let p = spec.components.dim();
    let labels: Vec<usize> = (0..spec.n).map(|_| categorical(&spec.weights, rng.random())).collect();
    let mut values = vec![0.0; spec.n * p];
    for (i, &g) in labels.iter().enumerate() {
        spec.components.draw_into(g, &mut rng, &mut values[i * p..(i + 1) * p]);
    }
    DataSet::new(values, spec.n, p)?.with_labels(labels)
}

pub fn generate(spec: &SimulationSpec) -> Result<Vec<DataSet>> {
    (0..spec.datasets).map(|d| generate_one(spec, d)).collect()
}
