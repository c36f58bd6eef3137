//! Model-based classification: EM on the joint likelihood of labeled and
//! unlabeled rows, with labeled rows pinned to their class component.

use alloc::vec::Vec;

use crate::data::DataSet;
use crate::em::{Engine, FitConfig, GaussianFamily, MixtureFamily, ModelFit, SalFamily};
use crate::error::{Error, Result};
use crate::metrics::ModelKind;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassificationTask {
    pub data: DataSet,
    /// 0-based class per row, `None` for rows to classify.
    pub known_labels: Vec<Option<usize>>,
    /// Number of labeled classes.
    pub g: usize,
    /// Total components, `h >= g`; components `g..h` only serve unlabeled rows.
    pub h: usize,
}

impl ClassificationTask {
    pub fn new(data: DataSet, known_labels: Vec<Option<usize>>, g: usize, h: usize) -> Result<Self> {
        if known_labels.len() != data.n() {
            return Err(Error::DimensionMismatch { expected: data.n(), got: known_labels.len() });
        }
        if g == 0 || h < g {
            return Err(Error::InvalidConfig("need 1 <= g <= h"));
        }
        if known_labels.iter().flatten().any(|&l| l >= g) {
            return Err(Error::InvalidData("known label outside 0..g".into()));
        }
        Ok(ClassificationTask { data, known_labels, g, h })
    }

    /// The first `labels.len()` rows carry `labels`; the rest are unlabeled.
    pub fn first_k(data: DataSet, labels: &[usize], g: usize, h: usize) -> Result<Self> {
        if labels.len() > data.n() {
            return Err(Error::DimensionMismatch { expected: data.n(), got: labels.len() });
        }
        let mut known: Vec<Option<usize>> = labels.iter().map(|&l| Some(l)).collect();
        known.resize(data.n(), None);
        ClassificationTask::new(data, known, g, h)
    }

    pub fn k(&self) -> usize {
        self.known_labels.iter().flatten().count()
    }

    /// Every class needs a labeled row, unless nothing is labeled at all
    /// (which is plain clustering).
    fn check_classes(&self) -> Result<()> {
        if self.k() == 0 {
            return Ok(());
        }
        for class in 0..self.g {
            if !self.known_labels.contains(&Some(class)) {
                return Err(Error::MissingClassExamples { class });
            }
        }
        Ok(())
    }

    /// Indices of rows without a known label.
    pub fn unlabeled_rows(&self) -> Vec<usize> {
        (0..self.data.n()).filter(|&i| self.known_labels[i].is_none()).collect()
    }
}

fn run<F: MixtureFamily>(task: &ClassificationTask, cfg: &FitConfig) -> Result<crate::em::FitReport<F::Component>> {
    Engine::<F>::new(&task.data, cfg, Some(&task.known_labels))?.anneal_and_fit()
}

/// Anneals and fits `task.h` components; `cfg.g` is ignored in favour of `task.h`.
pub fn fit_classifier(task: &ClassificationTask, cfg: &FitConfig, kind: ModelKind) -> Result<ModelFit> {
    task.check_classes()?;
    let mut cfg = cfg.clone();
    cfg.g = task.h;
    Ok(match kind {
        ModelKind::Sal => ModelFit::Sal(run::<SalFamily>(task, &cfg)?),
        ModelKind::Gaussian => ModelFit::Gaussian(run::<GaussianFamily>(task, &cfg)?),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn data() -> DataSet {
        let rows: Vec<Vec<f64>> = (0..30).map(|i| vec![if i % 2 == 0 { -4.0 } else { 4.0 } + (i as f64).sin()]).collect();
        DataSet::from_rows(&rows).unwrap()
    }

    #[test]
    fn missing_class_is_reported() {
        let task = ClassificationTask::first_k(data(), &[0, 0, 0], 2, 2).unwrap();
        let cfg = FitConfig::new(2, 1);
        assert!(matches!(fit_classifier(&task, &cfg, ModelKind::Sal), Err(Error::MissingClassExamples { class: 1 })));
    }

    #[test]
    fn rejects_out_of_range_labels() {
        assert!(ClassificationTask::first_k(data(), &[0, 2], 2, 2).is_err());
        assert!(ClassificationTask::first_k(data(), &[0, 1], 2, 1).is_err());
    }

    #[test]
    fn labeled_rows_keep_their_labels() {
        let labels: Vec<usize> = (0..10).map(|i| i % 2).collect();
        let task = ClassificationTask::first_k(data(), &labels, 2, 2).unwrap();
        let fit = fit_classifier(&task, &FitConfig::new(2, 3), ModelKind::Gaussian).unwrap();
        assert_eq!(&fit.map_labels()[..10], &labels[..]);
        assert!(fit.map_labels()[10..].iter().enumerate().all(|(j, &l)| l == (j + 10) % 2));
    }
}
