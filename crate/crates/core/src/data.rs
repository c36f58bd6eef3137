use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// An `n × p` matrix of observations, stored row-major, with optional
/// per-row class labels (`0..classes`) and a known-label mask.
#[derive(Debug, Clone, PartialEq)]
pub struct DataSet {
    values: Vec<f64>,
    n: usize,
    p: usize,
    column_names: Vec<String>,
    labels: Option<Vec<usize>>,
    known: Option<Vec<bool>>,
}

impl DataSet {
    pub fn new(values: Vec<f64>, n: usize, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidData("at least one column is required".into()));
        }
        if values.len() != n * p {
            return Err(Error::DimensionMismatch { expected: n * p, got: values.len() });
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidData(format!("non-finite value in row {}, column {}", pos / p, pos % p)));
        }
        let column_names = (1..=p).map(|j| format!("x{j}")).collect();
        Ok(DataSet { values, n, p, column_names, labels: None, known: None })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let p = rows.first().map_or(0, Vec::len);
        if let Some(bad) = rows.iter().find(|r| r.len() != p) {
            return Err(Error::DimensionMismatch { expected: p, got: bad.len() });
        }
        DataSet::new(rows.iter().flatten().copied().collect(), rows.len(), p)
    }

    pub fn with_column_names(mut self, names: Vec<String>) -> Result<Self> {
        if names.len() != self.p {
            return Err(Error::DimensionMismatch { expected: self.p, got: names.len() });
        }
        self.column_names = names;
        Ok(self)
    }

    pub fn with_labels(mut self, labels: Vec<usize>) -> Result<Self> {
        if labels.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: labels.len() });
        }
        self.labels = Some(labels);
        Ok(self)
    }

    pub fn with_known_mask(mut self, known: Vec<bool>) -> Result<Self> {
        if known.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: known.len() });
        }
        self.known = Some(known);
        Ok(self)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.p..(i + 1) * self.p]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> + '_ {
        self.values.chunks_exact(self.p)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn column_names(&self) -> &[String] {
        &self.column_names
    }

    pub fn labels(&self) -> Option<&[usize]> {
        self.labels.as_deref()
    }

    pub fn known_mask(&self) -> Option<&[bool]> {
        self.known.as_deref()
    }

    /// Copy of the rows selected by `idx`, carrying labels and mask along.
    pub fn select(&self, idx: &[usize]) -> DataSet {
        let values = idx.iter().flat_map(|&i| self.row(i).iter().copied()).collect();
        DataSet {
            values,
            n: idx.len(),
            p: self.p,
            column_names: self.column_names.clone(),
            labels: self.labels.as_ref().map(|l| idx.iter().map(|&i| l[i]).collect()),
            known: self.known.as_ref().map(|k| idx.iter().map(|&i| k[i]).collect()),
        }
    }

    pub fn mean(&self) -> DVector<f64> {
        let mut m = DVector::zeros(self.p);
        for r in self.rows() {
            for (acc, v) in m.iter_mut().zip(r) {
                *acc += v;
            }
        }
        m / self.n as f64
    }

    /// Maximum-likelihood (divide-by-`n`) covariance about the column means.
    pub fn covariance(&self) -> DMatrix<f64> {
        let mean = self.mean();
        let mut s = DMatrix::zeros(self.p, self.p);
        for r in self.rows() {
            for a in 0..self.p {
                let da = r[a] - mean[a];
                for b in 0..=a {
                    s[(a, b)] += da * (r[b] - mean[b]);
                }
            }
        }
        for a in 0..self.p {
            for b in 0..a {
                s[(b, a)] = s[(a, b)];
            }
        }
        s / self.n as f64
    }

    /// Median squared Euclidean distance over all row pairs, computed on at
    /// most 2000 evenly strided rows.
    pub fn median_pairwise_sq_distance(&self) -> f64 {
        let stride = self.n.div_ceil(2000).max(1);
        let idx: Vec<usize> = (0..self.n).step_by(stride).collect();
        let mut d = Vec::with_capacity(idx.len() * idx.len().saturating_sub(1) / 2);
        for (k, &i) in idx.iter().enumerate() {
            for &j in &idx[..k] {
                d.push(self.row(i).iter().zip(self.row(j)).map(|(a, b)| (a - b) * (a - b)).sum::<f64>());
            }
        }
        if d.is_empty() {
            return 0.0;
        }
        let mid = d.len() / 2;
        let (_, m, _) = d.select_nth_unstable_by(mid, f64::total_cmp);
        *m
    }
}
