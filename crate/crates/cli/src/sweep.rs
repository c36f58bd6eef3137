//! Parallel fitting over `(model, g)` and selection by a criterion.

use rayon::prelude::*;
use salmix_core::classify::{fit_classifier, ClassificationTask};
use salmix_core::em::{fit_model, AnnealingSchedule, FitConfig};
use salmix_core::metrics::rand_and_ari;
use salmix_core::{DataSet, ModelFit};

use crate::error::{CliError, Result};
use crate::input::Standardization;
use crate::report::{Criterion, Failure, FitDocument, Model, SweepEntry, SweepSummary};

/// Settings shared by every fit of a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct FitSettings {
    pub epsilon: f64,
    pub max_iter: usize,
    pub restarts: usize,
    pub anneal_steps: usize,
    pub seed: u64,
}

impl FitSettings {
    pub fn config(&self, g: usize) -> FitConfig {
        let mut cfg = FitConfig::new(g, self.seed);
        cfg.epsilon = self.epsilon;
        cfg.max_iter = self.max_iter;
        cfg.annealing = AnnealingSchedule::linear(self.anneal_steps, self.restarts);
        cfg
    }
}

#[derive(Debug, Clone)]
pub struct SweepResult {
    pub documents: Vec<FitDocument>,
    pub failures: Vec<Failure>,
    pub selected: usize,
}

impl SweepResult {
    pub fn selected(&self) -> &FitDocument {
        &self.documents[self.selected]
    }

    pub fn summary(&self, criterion: Criterion, seed: u64) -> SweepSummary {
        let entry = |d: &FitDocument| SweepEntry {
            model: d.model,
            g: d.g,
            log_lik: d.score.log_lik,
            bic: d.score.bic,
            icl: d.score.icl,
            status: d.status.clone(),
            ari: d.ari,
            file: d.file_name(),
        };
        SweepSummary {
            criterion,
            seed,
            fits: self.documents.iter().map(entry).collect(),
            failures: self.failures.clone(),
            selected: entry(self.selected()),
        }
    }
}

/// Highest criterion wins; ties keep the earlier (smaller) model.
pub fn select(docs: &[FitDocument], criterion: Criterion) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (i, d) in docs.iter().enumerate() {
        if best.is_none_or(|b| d.criterion(criterion) > docs[b].criterion(criterion)) {
            best = Some(i);
        }
    }
    best
}

pub fn ari_against(fit: &ModelFit, truth: Option<&[usize]>) -> Option<f64> {
    rand_and_ari(truth?, fit.map_labels()).ok().map(|(_, ari)| ari)
}

/// Fits every `(model, g)` pair on the shared pool. Failures are recorded
/// and the sweep carries on.
pub fn cluster_sweep(
    data: &DataSet,
    models: &[Model],
    g_range: std::ops::RangeInclusive<usize>,
    settings: &FitSettings,
    criterion: Criterion,
    standardization: Option<&Standardization>,
) -> Result<SweepResult> {
    let jobs: Vec<(Model, usize)> = models.iter().flat_map(|&m| g_range.clone().map(move |g| (m, g))).collect();
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(model, g)| {
            let cfg = settings.config(g);
            let fit = fit_model(data, &cfg, model.kind())?;
            let ari = ari_against(&fit, data.labels());
            Ok(FitDocument::new(&fit, data.column_names(), &cfg, standardization, ari))
        })
        .collect::<Vec<salmix_core::Result<FitDocument>>>();
    collect(jobs, outcomes, criterion)
}

fn collect(jobs: Vec<(Model, usize)>, outcomes: Vec<salmix_core::Result<FitDocument>>, criterion: Criterion) -> Result<SweepResult> {
    let mut documents = Vec::new();
    let mut failures = Vec::new();
    for ((model, g), out) in jobs.into_iter().zip(outcomes) {
        match out {
            Ok(doc) => documents.push(doc),
            Err(e) => failures.push(Failure { model, g, error: e.to_string() }),
        }
    }
    let Some(selected) = select(&documents, criterion) else {
        let detail = failures.iter().map(|f| format!("{} g={}: {}", f.model.name(), f.g, f.error)).collect::<Vec<_>>().join("; ");
        return Err(CliError::NothingFitted(detail));
    };
    Ok(SweepResult { documents, failures, selected })
}

/// Classification fits for each requested model with `h` components.
///
/// The reported ARI compares MAP labels with the true labels of the rows
/// fitted as unknown, when all of those rows carry one.
pub fn classify_sweep(
    task: &ClassificationTask,
    truth: Option<&[Option<usize>]>,
    models: &[Model],
    settings: &FitSettings,
    criterion: Criterion,
    standardization: Option<&Standardization>,
) -> Result<SweepResult> {
    let jobs: Vec<(Model, usize)> = models.iter().map(|&m| (m, task.h)).collect();
    let held_out = task.unlabeled_rows();
    let outcomes: Vec<_> = jobs
        .par_iter()
        .map(|&(model, h)| {
            let cfg = settings.config(h);
            let fit = fit_classifier(task, &cfg, model.kind())?;
            let ari = truth.and_then(|t| {
                let want: Option<Vec<usize>> = held_out.iter().map(|&i| t[i]).collect();
                let got: Vec<usize> = held_out.iter().map(|&i| fit.map_labels()[i]).collect();
                rand_and_ari(&want?, &got).ok().map(|(_, a)| a)
            });
            Ok(FitDocument::new(&fit, task.data.column_names(), &cfg, standardization, ari))
        })
        .collect::<Vec<salmix_core::Result<FitDocument>>>();
    collect(jobs, outcomes, criterion)
}

/// Sizes the global pool; `None` keeps rayon's default.
pub fn init_thread_pool(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        if n == 0 {
            return Err(CliError::InvalidArgument("SALMIX_THREADS must be at least 1".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::InvalidArgument(format!("thread pool: {e}")))?;
    }
    Ok(())
}
