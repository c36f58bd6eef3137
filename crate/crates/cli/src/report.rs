//! JSON documents for fitted models and sweeps.
//!
//! Matrices are stored row-major with explicit dimensions. Component labels
//! in `map_labels` are 1-based, as in the labels CSV.

use std::path::Path;

use nalgebra::{DMatrix, DVector};
use salmix_core::em::{FitConfig, FitStatus};
use salmix_core::{GaussianComponent, Mixture, ModelFit, ModelKind, SalComponent};
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::input::Standardization;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    Sal,
    Gaussian,
}

impl Model {
    pub fn kind(self) -> ModelKind {
        match self {
            Model::Sal => ModelKind::Sal,
            Model::Gaussian => ModelKind::Gaussian,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Model::Sal => "sal",
            Model::Gaussian => "gaussian",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl Matrix {
    pub fn from_dmatrix(m: &DMatrix<f64>) -> Self {
        let data = (0..m.nrows()).flat_map(|i| m.row(i).iter().copied().collect::<Vec<_>>()).collect();
        Matrix { rows: m.nrows(), cols: m.ncols(), data }
    }

    pub fn to_dmatrix(&self) -> Result<DMatrix<f64>> {
        if self.data.len() != self.rows * self.cols {
            return Err(CliError::InvalidArgument(format!(
                "matrix declares {}x{} but holds {} values",
                self.rows,
                self.cols,
                self.data.len()
            )));
        }
        Ok(DMatrix::from_row_slice(self.rows, self.cols, &self.data))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SalParams {
    pub mu: Vec<f64>,
    pub alpha: Vec<f64>,
    pub sigma: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianParams {
    pub mean: Vec<f64>,
    pub covariance: Matrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "lowercase")]
pub enum Parameters {
    Sal { weights: Vec<f64>, components: Vec<SalParams> },
    Gaussian { weights: Vec<f64>, components: Vec<GaussianParams> },
}

/// A fitted mixture rebuilt from its parameters.
#[derive(Debug, Clone)]
pub enum FittedMixture {
    Sal(Mixture<SalComponent>),
    Gaussian(Mixture<GaussianComponent>),
}

impl FittedMixture {
    pub fn dim(&self) -> usize {
        match self {
            FittedMixture::Sal(m) => m.dim(),
            FittedMixture::Gaussian(m) => m.dim(),
        }
    }

    pub fn log_density(&self, x: &[f64]) -> salmix_core::Result<f64> {
        match self {
            FittedMixture::Sal(m) => m.log_density(x),
            FittedMixture::Gaussian(m) => m.log_density(x),
        }
    }
}

/// Maps standardized coordinates `z` back to `x = m + s z`.
fn unscale_vec(v: &DVector<f64>, s: Option<&Standardization>, shift: bool) -> Vec<f64> {
    match s {
        None => v.iter().copied().collect(),
        Some(s) => v.iter().enumerate().map(|(j, x)| x * s.scales[j] + if shift { s.means[j] } else { 0.0 }).collect(),
    }
}

fn unscale_mat(m: &DMatrix<f64>, s: Option<&Standardization>) -> Matrix {
    match s {
        None => Matrix::from_dmatrix(m),
        Some(s) => Matrix::from_dmatrix(&DMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s.scales[i] * s.scales[j])),
    }
}

impl Parameters {
    /// Parameters in original units when `s` records a standardization.
    pub fn from_fit(fit: &ModelFit, s: Option<&Standardization>) -> Self {
        match fit {
            ModelFit::Sal(r) => Parameters::Sal {
                weights: r.mixture.weights().to_vec(),
                components: r
                    .mixture
                    .components()
                    .iter()
                    .map(|c| SalParams {
                        mu: unscale_vec(c.mu(), s, true),
                        alpha: unscale_vec(c.alpha(), s, false),
                        sigma: unscale_mat(c.sigma(), s),
                    })
                    .collect(),
            },
            ModelFit::Gaussian(r) => Parameters::Gaussian {
                weights: r.mixture.weights().to_vec(),
                components: r
                    .mixture
                    .components()
                    .iter()
                    .map(|c| GaussianParams { mean: unscale_vec(c.mean(), s, true), covariance: unscale_mat(c.covariance(), s) })
                    .collect(),
            },
        }
    }

    pub fn to_mixture(&self) -> Result<FittedMixture> {
        Ok(match self {
            Parameters::Sal { weights, components } => {
                let comps = components
                    .iter()
                    .map(|c| {
                        SalComponent::new(DVector::from_vec(c.mu.clone()), DVector::from_vec(c.alpha.clone()), c.sigma.to_dmatrix()?)
                            .map_err(CliError::from)
                    })
                    .collect::<Result<Vec<_>>>()?;
                FittedMixture::Sal(Mixture::new(weights.clone(), comps)?)
            }
            Parameters::Gaussian { weights, components } => {
                let comps = components
                    .iter()
                    .map(|c| GaussianComponent::new(DVector::from_vec(c.mean.clone()), c.covariance.to_dmatrix()?).map_err(CliError::from))
                    .collect::<Result<Vec<_>>>()?;
                FittedMixture::Gaussian(Mixture::new(weights.clone(), comps)?)
            }
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "state", rename_all = "kebab-case")]
pub enum Status {
    Converged,
    MaxIter,
    /// Components (1-based) whose shift was frozen on an observation.
    DegenerateFrozen { components: Vec<usize>, converged: bool },
}

impl From<&FitStatus> for Status {
    fn from(s: &FitStatus) -> Self {
        match s {
            FitStatus::Converged => Status::Converged,
            FitStatus::MaxIter => Status::MaxIter,
            FitStatus::DegenerateFrozen { components, converged } => {
                Status::DegenerateFrozen { components: components.iter().map(|g| g + 1).collect(), converged: *converged }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Score {
    pub log_lik: f64,
    pub free_params: usize,
    pub n: usize,
    pub bic: f64,
    pub icl: f64,
    pub entropy_term: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConfigEcho {
    pub epsilon: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub anneal_steps: usize,
    pub anneal_jitter: f64,
    pub degeneracy_tol: f64,
}

impl From<&FitConfig> for ConfigEcho {
    fn from(c: &FitConfig) -> Self {
        ConfigEcho {
            epsilon: c.epsilon,
            max_iter: c.max_iter,
            restarts: c.annealing.restarts,
            anneal_steps: c.annealing.v_values.len(),
            anneal_jitter: c.annealing.jitter,
            degeneracy_tol: c.degeneracy_tol,
        }
    }
}

/// One fitted `(model, g)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitDocument {
    pub model: Model,
    pub g: usize,
    pub n: usize,
    pub p: usize,
    pub column_names: Vec<String>,
    pub parameters: Parameters,
    pub log_lik_trace: Vec<f64>,
    pub iterations: usize,
    pub status: Status,
    pub score: Score,
    pub map_labels: Vec<usize>,
    pub responsibilities: Matrix,
    /// Adjusted Rand index against the input labels, when every row has one.
    pub ari: Option<f64>,
    pub seed: u64,
    pub config: ConfigEcho,
    pub standardization: Option<Standardization>,
    /// Names of the classes behind components `1..=len`, when labels were read.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub class_names: Vec<String>,
}

impl FitDocument {
    /// Likelihoods and criteria are reported for the data in original units,
    /// so a standardized fit is shifted by the log Jacobian of the scaling.
    pub fn new(
        fit: &ModelFit,
        column_names: &[String],
        cfg: &FitConfig,
        standardization: Option<&Standardization>,
        ari: Option<f64>,
    ) -> Self {
        let s = fit.score();
        let shift = standardization.map_or(0.0, |st| s.n as f64 * st.log_jacobian());
        let model = match fit.kind() {
            ModelKind::Sal => Model::Sal,
            ModelKind::Gaussian => Model::Gaussian,
        };
        FitDocument {
            model,
            g: fit.g(),
            n: s.n,
            p: column_names.len(),
            column_names: column_names.to_vec(),
            parameters: Parameters::from_fit(fit, standardization),
            log_lik_trace: fit.log_lik_trace().iter().map(|l| l + shift).collect(),
            iterations: fit.iterations(),
            status: fit.status().into(),
            score: Score {
                log_lik: s.log_lik + shift,
                free_params: s.free_params,
                n: s.n,
                bic: s.bic + 2.0 * shift,
                icl: s.icl + 2.0 * shift,
                entropy_term: s.entropy_term,
            },
            map_labels: fit.map_labels().iter().map(|l| l + 1).collect(),
            responsibilities: Matrix::from_dmatrix(fit.responsibilities()),
            ari,
            seed: cfg.seed,
            config: cfg.into(),
            standardization: standardization.cloned(),
            class_names: Vec::new(),
        }
    }

    pub fn criterion(&self, c: Criterion) -> f64 {
        match c {
            Criterion::Icl => self.score.icl,
            Criterion::Bic => self.score.bic,
        }
    }

    pub fn file_name(&self) -> String {
        format!("fit-{}-g{}.json", self.model.name(), self.g)
    }
}

/// Larger is better for both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Icl,
    Bic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub model: Model,
    pub g: usize,
    pub error: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub model: Model,
    pub g: usize,
    pub log_lik: f64,
    pub bic: f64,
    pub icl: f64,
    pub status: Status,
    pub ari: Option<f64>,
    pub file: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub criterion: Criterion,
    pub seed: u64,
    pub fits: Vec<SweepEntry>,
    pub failures: Vec<Failure>,
    pub selected: SweepEntry,
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = std::fs::File::create(path).map_err(CliError::io(path))?;
    let mut w = std::io::BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    std::io::Write::flush(&mut w).map_err(CliError::io(path))
}

pub fn read_fit_document(path: &Path) -> Result<FitDocument> {
    let file = std::fs::File::open(path).map_err(CliError::io(path))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

/// `row_id,map_label,tau_1..tau_G`, both ids 1-based.
pub fn write_labels_csv<W: std::io::Write>(out: W, doc: &FitDocument) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["row_id".to_string(), "map_label".to_string()];
    header.extend((1..=doc.g).map(|g| format!("tau_{g}")));
    w.write_record(&header)?;
    let tau = &doc.responsibilities;
    for (i, label) in doc.map_labels.iter().enumerate() {
        let mut rec = vec![(i + 1).to_string(), label.to_string()];
        rec.extend(tau.data[i * tau.cols..(i + 1) * tau.cols].iter().map(|t| t.to_string()));
        w.write_record(&rec)?;
    }
    w.flush().map_err(CliError::io("labels CSV"))?;
    Ok(())
}
