//! The two-component simulation study: every data set is clustered by both
//! families over a range of G, and the selected models are tallied.

use std::fmt;

use rayon::prelude::*;
use salmix_core::em::fit_model;
use salmix_core::metrics::rand_and_ari;
use salmix_core::simulate::{generate_one, paper_sim_spec};

use crate::error::Result;
use crate::report::Model;
use crate::sweep::FitSettings;

/// What was selected on one data set by one family.
#[derive(Debug, Clone, PartialEq)]
pub struct Selection {
    pub dataset: usize,
    pub model: Model,
    /// `None` when no G could be fitted.
    pub g: Option<usize>,
    pub ari: f64,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StudySummary {
    pub datasets: usize,
    pub g_max: usize,
    pub selections: Vec<Selection>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModelSummary {
    pub model: Model,
    /// Share of data sets with G = 2 selected.
    pub two_selected: f64,
    /// Share with G >= 3.
    pub three_plus: f64,
    pub mean_ari: f64,
    pub sd_ari: f64,
    /// Counts of selected G, index `g - 1`.
    pub g_counts: Vec<usize>,
}

impl StudySummary {
    pub fn model(&self, model: Model) -> ModelSummary {
        let sel: Vec<&Selection> = self.selections.iter().filter(|s| s.model == model).collect();
        let k = sel.len() as f64;
        let mut g_counts = vec![0; self.g_max];
        for s in &sel {
            if let Some(g) = s.g {
                g_counts[g - 1] += 1;
            }
        }
        let mean_ari = sel.iter().map(|s| s.ari).sum::<f64>() / k;
        // Sample standard deviation, as usually tabulated.
        let sd_ari = (sel.iter().map(|s| (s.ari - mean_ari).powi(2)).sum::<f64>() / (k - 1.0).max(1.0)).sqrt();
        ModelSummary {
            model,
            two_selected: sel.iter().filter(|s| s.g == Some(2)).count() as f64 / k,
            three_plus: sel.iter().filter(|s| s.g.is_some_and(|g| g >= 3)).count() as f64 / k,
            mean_ari,
            sd_ari,
            g_counts,
        }
    }
}

impl fmt::Display for StudySummary {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "{} data sets, G = 1..{}, selection by ICL", self.datasets, self.g_max)?;
        write!(f, "{:<10} {:>12} {:>22}", "model", "G=2 chosen", "average ARI (sd)")?;
        for g in 1..=self.g_max {
            write!(f, " {:>4}", format!("G={g}"))?;
        }
        writeln!(f)?;
        for model in [Model::Sal, Model::Gaussian] {
            let m = self.model(model);
            write!(
                f,
                "{:<10} {:>11.0}% {:>22}",
                model.name(),
                100.0 * m.two_selected,
                format!("{:.4} ({:.4})", m.mean_ari, m.sd_ari)
            )?;
            for c in &m.g_counts {
                write!(f, " {c:>4}")?;
            }
            writeln!(f)?;
        }
        Ok(())
    }
}

/// Data set `d` is drawn from stream `d` of `seed`; every fit uses `settings.seed`.
pub fn run_study(seed: u64, datasets: usize, g_max: usize, settings: &FitSettings) -> Result<StudySummary> {
    let mut spec = paper_sim_spec(seed);
    spec.datasets = datasets;
    let data = (0..datasets).map(|d| generate_one(&spec, d)).collect::<salmix_core::Result<Vec<_>>>()?;
    let jobs: Vec<(usize, Model, usize)> = (0..datasets)
        .flat_map(|d| [Model::Sal, Model::Gaussian].into_iter().flat_map(move |m| (1..=g_max).map(move |g| (d, m, g))))
        .collect();
    let fits: Vec<_> = jobs
        .par_iter()
        .map(|&(d, model, g)| {
            let fit = fit_model(&data[d], &settings.config(g), model.kind()).ok()?;
            let truth = data[d].labels().expect("simulated data carry labels");
            let ari = rand_and_ari(truth, fit.map_labels()).ok()?.1;
            Some((fit.score().icl, ari))
        })
        .collect();
    let mut selections = Vec::new();
    for d in 0..datasets {
        for model in [Model::Sal, Model::Gaussian] {
            let mut best: Option<(usize, f64, f64)> = None;
            let mut failures = 0;
            for (job, fit) in jobs.iter().zip(&fits) {
                if job.0 != d || job.1 != model {
                    continue;
                }
                match fit {
                    Some((icl, ari)) if best.is_none_or(|b| *icl > b.1) => best = Some((job.2, *icl, *ari)),
                    Some(_) => {}
                    None => failures += 1,
                }
            }
            selections.push(Selection { dataset: d, model, g: best.map(|b| b.0), ari: best.map_or(0.0, |b| b.2), failures });
        }
    }
    Ok(StudySummary { datasets, g_max, selections })
}
