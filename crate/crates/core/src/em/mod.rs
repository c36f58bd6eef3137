//! EM fitting: E-step expectations, closed-form M-steps, Aitken stopping,
//! deterministic-annealing starts and the shift-degeneracy safeguard.
//!
//! The loop in [`Engine`] is generic over [`MixtureFamily`]; SAL and
//! Gaussian mixtures differ only in their family implementation.

mod aitken;
mod family;

pub use aitken::AitkenState;
pub use family::{
    empty_component_floor, frozen_shift_update, gaussian_component_update, sal_component_update, ComponentState,
    FreezePolicy, GaussianFamily, MStepSufficientStats, MixtureFamily, SalFamily,
};

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::marker::PhantomData;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;
use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::data::DataSet;
use crate::error::{Error, Result};
use crate::gaussian::GaussianComponent;
use crate::linalg::SpdMatrix;
use crate::metrics::{count_free_params, icl, map_labels, ModelKind, ModelScore};
use crate::mixture::{log_sum_exp, Mixture};
use crate::sal::{SalComponent, SalMixture};

/// Tempering exponents for deterministic annealing, plus the restart count.
#[derive(Debug, Clone, PartialEq)]
pub struct AnnealingSchedule {
    pub v_values: Vec<f64>,
    pub restarts: usize,
    /// Standard deviation, in units of each column's standard deviation, of
    /// the Gaussian nudge applied to component locations after every
    /// annealing step. Tempered responsibilities pull components together;
    /// without the nudge they can coincide to rounding error, and EM cannot
    /// leave that saddle.
    pub jitter: f64,
}

pub const DEFAULT_JITTER: f64 = 1e-2;

impl AnnealingSchedule {
    /// `steps` evenly spaced values ending at 1: `1/steps, 2/steps, ..., 1`.
    pub fn linear(steps: usize, restarts: usize) -> Self {
        let v_values = (1..=steps).map(|k| k as f64 / steps as f64).collect();
        AnnealingSchedule { v_values, restarts, jitter: DEFAULT_JITTER }
    }

    pub fn validate(&self) -> Result<()> {
        if self.v_values.is_empty() {
            return Err(Error::InvalidConfig("annealing schedule is empty"));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("at least one restart is required"));
        }
        if self.v_values.iter().any(|v| !(0.0..=1.0).contains(v)) {
            return Err(Error::InvalidConfig("annealing values must lie in [0, 1]"));
        }
        if self.v_values.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig("annealing values must be strictly increasing"));
        }
        if !(self.jitter >= 0.0 && self.jitter.is_finite()) {
            return Err(Error::InvalidConfig("annealing jitter must be finite and nonnegative"));
        }
        Ok(())
    }
}

impl Default for AnnealingSchedule {
    fn default() -> Self {
        AnnealingSchedule::linear(25, 10)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub g: usize,
    pub epsilon: f64,
    pub max_iter: usize,
    pub annealing: AnnealingSchedule,
    pub seed: u64,
    /// Fraction of the median pairwise squared distance below which a shift
    /// is treated as sitting on an observation.
    pub degeneracy_tol: f64,
}

impl FitConfig {
    pub fn new(g: usize, seed: u64) -> Self {
        FitConfig { g, epsilon: 1e-5, max_iter: 1000, annealing: AnnealingSchedule::default(), seed, degeneracy_tol: 1e-8 }
    }

    pub fn validate(&self) -> Result<()> {
        if self.g == 0 {
            return Err(Error::InvalidConfig("g must be at least 1"));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidConfig("epsilon must be positive"));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidConfig("max_iter must be at least 1"));
        }
        if !(self.degeneracy_tol > 0.0) {
            return Err(Error::InvalidConfig("degeneracy_tol must be positive"));
        }
        self.annealing.validate()
    }
}

/// Responsibilities and latent-scale moments, all `n × G`.
#[derive(Debug, Clone, PartialEq)]
pub struct EStepQuantities {
    pub tau: DMatrix<f64>,
    pub e_w: DMatrix<f64>,
    pub e_inv_w: DMatrix<f64>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum FitStatus {
    Converged,
    MaxIter,
    /// Some shifts were frozen by the degeneracy safeguard.
    DegenerateFrozen { components: Vec<usize>, converged: bool },
}

impl FitStatus {
    pub fn converged(&self) -> bool {
        matches!(self, FitStatus::Converged | FitStatus::DegenerateFrozen { converged: true, .. })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitReport<C> {
    pub kind: ModelKind,
    pub mixture: Mixture<C>,
    /// Observed-data log-likelihood at every E-step, in order.
    pub log_lik_trace: Vec<f64>,
    pub iterations: usize,
    pub status: FitStatus,
    pub responsibilities: DMatrix<f64>,
    /// 0-based MAP component per row.
    pub map_labels: Vec<usize>,
    pub score: ModelScore,
}

impl<C> FitReport<C> {
    pub fn log_lik(&self) -> f64 {
        self.score.log_lik
    }
}

/// A fitted report from either family.
#[derive(Debug, Clone, PartialEq)]
pub enum ModelFit {
    Sal(FitReport<SalComponent>),
    Gaussian(FitReport<GaussianComponent>),
}

macro_rules! each_fit {
    ($self:ident, $r:ident => $e:expr) => {
        match $self {
            ModelFit::Sal($r) => $e,
            ModelFit::Gaussian($r) => $e,
        }
    };
}

impl ModelFit {
    pub fn kind(&self) -> ModelKind {
        each_fit!(self, r => r.kind)
    }

    pub fn g(&self) -> usize {
        each_fit!(self, r => r.mixture.g())
    }

    pub fn weights(&self) -> &[f64] {
        each_fit!(self, r => r.mixture.weights())
    }

    pub fn score(&self) -> &ModelScore {
        each_fit!(self, r => &r.score)
    }

    pub fn log_lik_trace(&self) -> &[f64] {
        each_fit!(self, r => &r.log_lik_trace)
    }

    pub fn iterations(&self) -> usize {
        each_fit!(self, r => r.iterations)
    }

    pub fn status(&self) -> &FitStatus {
        each_fit!(self, r => &r.status)
    }

    pub fn responsibilities(&self) -> &DMatrix<f64> {
        each_fit!(self, r => &r.responsibilities)
    }

    pub fn map_labels(&self) -> &[usize] {
        each_fit!(self, r => &r.map_labels)
    }

    /// Mixture log-density at `x`.
    pub fn log_density(&self, x: &[f64]) -> Result<f64> {
        each_fit!(self, r => r.mixture.log_density(x))
    }
}

/// Annealing followed by EM for a clustering problem.
pub fn fit_model(data: &DataSet, cfg: &FitConfig, kind: ModelKind) -> Result<ModelFit> {
    Ok(match kind {
        ModelKind::Sal => ModelFit::Sal(Engine::<SalFamily>::new(data, cfg, None)?.anneal_and_fit()?),
        ModelKind::Gaussian => ModelFit::Gaussian(Engine::<GaussianFamily>::new(data, cfg, None)?.anneal_and_fit()?),
    })
}

/// The best restart of an annealing run and the restarts that failed.
#[derive(Debug, Clone)]
pub struct AnnealOutcome<C> {
    pub mixture: Mixture<C>,
    pub restart: usize,
    pub log_lik: f64,
    pub failures: Vec<(usize, Error)>,
}

struct EStepOutput {
    q: EStepQuantities,
    log_lik: f64,
}

/// Shared EM machinery over one data set.
///
/// `known` pins rows to a component (classification); `None` entries and a
/// missing slice mean ordinary clustering rows.
pub struct Engine<'a, F: MixtureFamily> {
    data: &'a DataSet,
    known: Option<&'a [Option<usize>]>,
    cfg: &'a FitConfig,
    _family: PhantomData<F>,
}

impl<'a, F: MixtureFamily> Engine<'a, F> {
    pub fn new(data: &'a DataSet, cfg: &'a FitConfig, known: Option<&'a [Option<usize>]>) -> Result<Self> {
        cfg.validate()?;
        if data.n() < 2 {
            return Err(Error::InvalidData("at least two rows are needed to fit".into()));
        }
        if let Some(k) = known {
            if k.len() != data.n() {
                return Err(Error::DimensionMismatch { expected: data.n(), got: k.len() });
            }
            if k.iter().flatten().any(|&g| g >= cfg.g) {
                return Err(Error::InvalidData("known label outside the component range".into()));
            }
        }
        Ok(Engine { data, known, cfg, _family: PhantomData })
    }

    fn known_label(&self, i: usize) -> Option<usize> {
        self.known.and_then(|k| k[i])
    }

    fn known_mask(&self) -> Option<Vec<bool>> {
        self.known.map(|k| k.iter().map(Option::is_some).collect())
    }

    fn check_mixture(&self, m: &Mixture<F::Component>) -> Result<()> {
        if m.g() != self.cfg.g {
            return Err(Error::DimensionMismatch { expected: self.cfg.g, got: m.g() });
        }
        if m.dim() != self.data.p() {
            return Err(Error::DimensionMismatch { expected: self.data.p(), got: m.dim() });
        }
        Ok(())
    }

    /// `temper = Some(v)` gives annealed responsibilities and caps `E[1/W]`.
    fn e_step(&self, m: &Mixture<F::Component>, temper: Option<f64>) -> Result<EStepOutput> {
        let (n, g) = (self.data.n(), m.g());
        let cap = temper.map(|v| -(1.0 - v.min(1.0 - 1e-10)).ln());
        let mut q = EStepQuantities {
            tau: DMatrix::zeros(n, g),
            e_w: DMatrix::zeros(n, g),
            e_inv_w: DMatrix::zeros(n, g),
        };
        let log_w: Vec<f64> = m.weights().iter().map(|w| w.ln()).collect();
        let mut l = alloc::vec![0.0; g];
        let mut log_lik = 0.0;
        for (i, x) in self.data.rows().enumerate() {
            for (k, c) in m.components().iter().enumerate() {
                let r = F::evaluate(c, x, cap)?;
                l[k] = log_w[k] + r.log_density;
                q.e_w[(i, k)] = r.e_w;
                q.e_inv_w[(i, k)] = r.e_inv_w;
            }
            if let Some(k) = self.known_label(i) {
                q.tau[(i, k)] = 1.0;
                log_lik += l[k];
                continue;
            }
            let lse = log_sum_exp(&l);
            log_lik += lse;
            match temper {
                Some(v) => {
                    let scaled: Vec<f64> = l.iter().map(|a| v * a).collect();
                    let z = log_sum_exp(&scaled);
                    for k in 0..g {
                        q.tau[(i, k)] = (scaled[k] - z).exp();
                    }
                }
                None => {
                    for k in 0..g {
                        q.tau[(i, k)] = (l[k] - lse).exp();
                    }
                }
            }
        }
        Ok(EStepOutput { q, log_lik })
    }

    fn m_step(
        &self,
        q: &EStepQuantities,
        prev: &Mixture<F::Component>,
        states: &mut [ComponentState],
        freeze: FreezePolicy,
    ) -> Result<Mixture<F::Component>> {
        let n = self.data.n() as f64;
        let mut weights = Vec::with_capacity(prev.g());
        let mut comps = Vec::with_capacity(prev.g());
        for (k, c) in prev.components().iter().enumerate() {
            comps.push(F::update(self.data, q, k, c, &mut states[k], freeze)?);
            weights.push(q.tau.column(k).sum() / n);
        }
        Mixture::new(weights, comps)
    }

    fn freeze_policy(&self) -> FreezePolicy {
        FreezePolicy::Threshold(self.cfg.degeneracy_tol * self.data.median_pairwise_sq_distance())
    }

    /// Observed-data log-likelihood (joint likelihood when rows are pinned).
    pub fn log_likelihood(&self, m: &Mixture<F::Component>) -> Result<f64> {
        self.check_mixture(m)?;
        Ok(self.e_step(m, None)?.log_lik)
    }

    /// Runs EM from `init` until the Aitken rule fires or `max_iter` E-steps.
    ///
    /// The returned parameters are the ones evaluated by the last E-step, so
    /// the responsibilities, trace tail and score all describe them.
    pub fn fit(&self, init: Mixture<F::Component>) -> Result<FitReport<F::Component>> {
        self.check_mixture(&init)?;
        let freeze = self.freeze_policy();
        let mut states: Vec<ComponentState> =
            init.components().iter().map(|c| F::initial_state(c, self.data, freeze)).collect();
        let mut current = init;
        let mut trace = Vec::new();
        let (last, converged) = loop {
            let e = self.e_step(&current, None)?;
            if !e.log_lik.is_finite() {
                return Err(Error::NonFinite { iteration: trace.len() });
            }
            trace.push(e.log_lik);
            if AitkenState::from_trace(&trace).is_some_and(|a| a.converged(self.cfg.epsilon)) {
                break (e, true);
            }
            if trace.len() >= self.cfg.max_iter {
                break (e, false);
            }
            current = self.m_step(&e.q, &current, &mut states, freeze)?;
        };
        let frozen: Vec<usize> = states.iter().enumerate().filter(|(_, s)| s.frozen_shift.is_some()).map(|(k, _)| k).collect();
        let status = match (frozen.is_empty(), converged) {
            (true, true) => FitStatus::Converged,
            (true, false) => FitStatus::MaxIter,
            (false, converged) => FitStatus::DegenerateFrozen { components: frozen, converged },
        };
        let free = count_free_params(F::KIND, current.g(), self.data.p());
        let mask = self.known_mask();
        let score = icl(last.log_lik, free, &last.q.tau, mask.as_deref());
        Ok(FitReport {
            kind: F::KIND,
            iterations: trace.len(),
            log_lik_trace: trace,
            status,
            map_labels: map_labels(&last.q.tau),
            responsibilities: last.q.tau,
            score,
            mixture: current,
        })
    }

    /// A random start: Dirichlet(1) weights, shifts at `G` distinct rows,
    /// zero skewness, diagonal of the sample covariance as scale.
    fn random_start(&self, rng: &mut ChaCha8Rng) -> Result<Mixture<F::Component>> {
        let (n, p, g) = (self.data.n(), self.data.p(), self.cfg.g);
        if g > n {
            return Err(Error::InvalidConfig("more components than rows"));
        }
        let draws: Vec<f64> = (0..g).map(|_| -(1.0 - rng.random::<f64>()).ln() + f64::MIN_POSITIVE).collect();
        let total: f64 = draws.iter().sum();
        let weights = draws.iter().map(|d| d / total).collect();
        let cov = self.data.covariance();
        let diag: Vec<f64> = (0..p).map(|j| cov[(j, j)].max(1e-12)).collect();
        let scale = SpdMatrix::new(DMatrix::from_diagonal(&DVector::from_vec(diag)))?;
        let comps = sample(rng, n, g)
            .into_iter()
            .map(|i| F::initial_component(self.data.row(i), &scale))
            .collect::<Result<Vec<_>>>()?;
        Mixture::new(weights, comps)
    }

    fn restart_rng(&self, restart: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.cfg.seed);
        rng.set_stream(restart as u64);
        rng
    }

    /// The random start used by annealing restart `restart`.
    pub fn start(&self, restart: usize) -> Result<Mixture<F::Component>> {
        self.random_start(&mut self.restart_rng(restart))
    }

    fn jitter(&self, m: Mixture<F::Component>, scales: &DVector<f64>, rng: &mut ChaCha8Rng) -> Result<Mixture<F::Component>> {
        let (weights, comps) = m.into_parts();
        let comps = comps
            .iter()
            .map(|c| {
                let delta = DVector::from_fn(scales.len(), |j, _| scales[j] * rng.sample::<f64, _>(StandardNormal));
                F::translated(c, &delta)
            })
            .collect::<Result<Vec<_>>>()?;
        Mixture::new(weights, comps)
    }

    /// One annealing run from [`Engine::start`]`(restart)`, with its untempered log-likelihood.
    pub fn anneal_restart(&self, restart: usize) -> Result<(Mixture<F::Component>, f64)> {
        let mut rng = self.restart_rng(restart);
        let mut m = self.random_start(&mut rng)?;
        let mut states = alloc::vec![ComponentState::default(); m.g()];
        let cov = self.data.covariance();
        let scales = DVector::from_fn(self.data.p(), |j, _| self.cfg.annealing.jitter * cov[(j, j)].max(0.0).sqrt());
        for &v in &self.cfg.annealing.v_values {
            let e = self.e_step(&m, Some(v))?;
            m = self.m_step(&e.q, &m, &mut states, FreezePolicy::Off)?;
            if self.cfg.annealing.jitter > 0.0 {
                m = self.jitter(m, &scales, &mut rng)?;
            }
        }
        let ll = self.e_step(&m, None)?.log_lik;
        if !ll.is_finite() {
            return Err(Error::NonFinite { iteration: self.cfg.annealing.v_values.len() });
        }
        Ok((m, ll))
    }

    /// Deterministic annealing from `restarts` random starts; keeps the one
    /// with the highest untempered log-likelihood.
    pub fn anneal(&self) -> Result<AnnealOutcome<F::Component>> {
        let mut best: Option<(Mixture<F::Component>, usize, f64)> = None;
        let mut failures = Vec::new();
        for r in 0..self.cfg.annealing.restarts {
            match self.anneal_restart(r) {
                Ok((m, ll)) => {
                    if best.as_ref().is_none_or(|b| ll > b.2) {
                        best = Some((m, r, ll));
                    }
                }
                Err(e) => failures.push((r, e)),
            }
        }
        match best {
            Some((mixture, restart, log_lik)) => Ok(AnnealOutcome { mixture, restart, log_lik, failures }),
            None => {
                let detail: Vec<String> = failures.iter().map(|(r, e)| format!("restart {r}: {e}")).collect();
                Err(Error::AllRestartsFailed(detail.join("; ")))
            }
        }
    }

    /// Annealing followed by EM from the selected start.
    pub fn anneal_and_fit(&self) -> Result<FitReport<F::Component>> {
        self.fit(self.anneal()?.mixture)
    }
}

fn clustering_e_step<F: MixtureFamily>(data: &DataSet, m: &Mixture<F::Component>) -> Result<EStepQuantities> {
    let cfg = FitConfig::new(m.g(), 0);
    let engine = Engine::<F>::new(data, &cfg, None)?;
    engine.check_mixture(m)?;
    Ok(engine.e_step(m, None)?.q)
}

/// Responsibilities and GIG posterior moments under a SAL mixture.
pub fn e_step(data: &DataSet, m: &SalMixture) -> Result<EStepQuantities> {
    clustering_e_step::<SalFamily>(data, m)
}

/// One unrestricted SAL M-step: `π = n_g / n` and the closed-form
/// `(μ, α, Σ)` updates for every component.
pub fn m_step(data: &DataSet, e: &EStepQuantities) -> Result<SalMixture> {
    check_e_shape(data, e)?;
    let n = data.n() as f64;
    let g = e.tau.ncols();
    let comps = (0..g).map(|k| sal_component_update(data, e, k)).collect::<Result<Vec<_>>>()?;
    let weights = (0..g).map(|k| e.tau.column(k).sum() / n).collect();
    Mixture::new(weights, comps)
}

fn check_e_shape(data: &DataSet, e: &EStepQuantities) -> Result<()> {
    for m in [&e.tau, &e.e_w, &e.e_inv_w] {
        if m.nrows() != data.n() {
            return Err(Error::DimensionMismatch { expected: data.n(), got: m.nrows() });
        }
        if m.ncols() != e.tau.ncols() {
            return Err(Error::DimensionMismatch { expected: e.tau.ncols(), got: m.ncols() });
        }
    }
    Ok(())
}

/// EM for a SAL mixture from `init`.
pub fn fit_em(data: &DataSet, cfg: &FitConfig, init: SalMixture) -> Result<FitReport<SalComponent>> {
    Engine::<SalFamily>::new(data, cfg, None)?.fit(init)
}

/// Deterministic-annealing start for a SAL mixture.
pub fn anneal_init(data: &DataSet, cfg: &FitConfig) -> Result<SalMixture> {
    Ok(Engine::<SalFamily>::new(data, cfg, None)?.anneal()?.mixture)
}

/// Responsibilities under a Gaussian mixture (`e_w = e_inv_w = 1`).
pub fn gmm_e_step(data: &DataSet, m: &Mixture<GaussianComponent>) -> Result<EStepQuantities> {
    clustering_e_step::<GaussianFamily>(data, m)
}
