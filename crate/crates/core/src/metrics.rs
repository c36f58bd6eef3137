//! Model-selection criteria, MAP labeling and partition agreement.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // shadowed by inherent methods whenever std is linked
use num_traits::Float;

use crate::error::{Error, Result};

/// Which component family a model uses.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Sal,
    Gaussian,
}

/// Number of free parameters of a `g`-component model in `p` dimensions.
pub fn count_free_params(kind: ModelKind, g: usize, p: usize) -> usize {
    let cov = g * p * (p + 1) / 2;
    match kind {
        ModelKind::Sal => (g - 1) + g * p + g * p + cov,
        ModelKind::Gaussian => (g - 1) + g * p + cov,
    }
}

/// Log-likelihood based scores of a fitted model.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelScore {
    pub log_lik: f64,
    pub free_params: usize,
    pub n: usize,
    pub bic: f64,
    pub icl: f64,
    /// `Σ_i Σ_g MAP{τ_ig} ln τ_ig` over unlabeled rows; never positive.
    pub entropy_term: f64,
}

/// `2 l - k ln n`.
pub fn bic(log_lik: f64, free_params: usize, n: usize) -> f64 {
    2.0 * log_lik - free_params as f64 * (n as f64).ln()
}

/// BIC plus the MAP entropy term over the rows not flagged in `known_mask`.
pub fn icl(log_lik: f64, free_params: usize, tau: &DMatrix<f64>, known_mask: Option<&[bool]>) -> ModelScore {
    let n = tau.nrows();
    let labels = map_labels(tau);
    let mut entropy_term = 0.0;
    for (i, &g) in labels.iter().enumerate() {
        if known_mask.is_some_and(|m| m[i]) {
            continue;
        }
        entropy_term += tau[(i, g)].ln();
    }
    let bic = bic(log_lik, free_params, n);
    ModelScore { log_lik, free_params, n, bic, icl: bic + entropy_term, entropy_term }
}

/// Row-wise argmax of a responsibility matrix; the lowest index wins ties.
pub fn map_labels(tau: &DMatrix<f64>) -> Vec<usize> {
    (0..tau.nrows())
        .map(|i| {
            let mut best = 0;
            for g in 1..tau.ncols() {
                if tau[(i, g)] > tau[(i, best)] {
                    best = g;
                }
            }
            best
        })
        .collect()
}

fn pairs(k: u64) -> f64 {
    (k * k.saturating_sub(1) / 2) as f64
}

/// Rand index and Hubert-Arabie adjusted Rand index of two partitions.
///
/// Labels are arbitrary identifiers; only co-membership matters.
pub fn rand_and_ari(a: &[usize], b: &[usize]) -> Result<(f64, f64)> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch { expected: a.len(), got: b.len() });
    }
    if a.len() < 2 {
        return Err(Error::InvalidData("at least two items are needed to compare partitions".into()));
    }
    let mut cells: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut rows: BTreeMap<usize, u64> = BTreeMap::new();
    let mut cols: BTreeMap<usize, u64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *cells.entry((x, y)).or_default() += 1;
        *rows.entry(x).or_default() += 1;
        *cols.entry(y).or_default() += 1;
    }
    let total = pairs(a.len() as u64);
    let index: f64 = cells.values().map(|&c| pairs(c)).sum();
    let sum_a: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_b: f64 = cols.values().map(|&c| pairs(c)).sum();
    let rand = (total + 2.0 * index - sum_a - sum_b) / total;
    let expected = sum_a * sum_b / total;
    let max = 0.5 * (sum_a + sum_b);
    let ari = if max == expected {
        // Both partitions trivial (one block, or all singletons).
        if index == max {
            1.0
        } else {
            0.0
        }
    } else {
        (index - expected) / (max - expected)
    };
    Ok((rand, ari))
}

/// Expands a contingency table (rows = truth, columns = predicted) into
/// paired label vectors.
pub fn labels_from_table(table: &[&[usize]]) -> (Vec<usize>, Vec<usize>) {
    let mut truth = Vec::new();
    let mut pred = Vec::new();
    for (i, row) in table.iter().enumerate() {
        for (j, &count) in row.iter().enumerate() {
            truth.extend(core::iter::repeat_n(i, count));
            pred.extend(core::iter::repeat_n(j, count));
        }
    }
    (truth, pred)
}
