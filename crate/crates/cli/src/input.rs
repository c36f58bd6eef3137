//! CSV ingestion: a header row, numeric feature columns, and optional
//! `label` and `known` columns.

use std::collections::HashMap;
use std::io::Read;
use std::path::Path;

use salmix_core::DataSet;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};

/// A parsed input file.
#[derive(Debug, Clone)]
pub struct Table {
    pub data: DataSet,
    /// Class names in order of first appearance; label `k` is `class_names[k]`.
    pub class_names: Vec<String>,
    /// Per-row class, `None` when the label cell is empty or absent.
    pub labels: Option<Vec<Option<usize>>>,
    /// Per-row `known` flag.
    pub known: Option<Vec<bool>>,
}

impl Table {
    /// All rows labeled.
    pub fn complete_labels(&self) -> Option<Vec<usize>> {
        self.labels.as_ref()?.iter().copied().collect()
    }
}

pub fn read_table_path(path: &Path) -> Result<Table> {
    let file = std::fs::File::open(path).map_err(CliError::io(path))?;
    read_table(file)
}

pub fn read_table<R: Read>(reader: R) -> Result<Table> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    let mut label_col = None;
    let mut known_col = None;
    let mut features = Vec::new();
    for (j, h) in headers.iter().enumerate() {
        match h.to_ascii_lowercase().as_str() {
            "label" if label_col.is_none() => label_col = Some(j),
            "known" if known_col.is_none() => known_col = Some(j),
            _ => features.push(j),
        }
    }
    if features.is_empty() {
        return Err(CliError::Parse { line: 1, message: "no feature columns in header".into() });
    }
    let column_names: Vec<String> = features.iter().map(|&j| headers[j].to_string()).collect();
    let p = features.len();
    let mut values = Vec::new();
    let mut class_index: HashMap<String, usize> = HashMap::new();
    let mut class_names = Vec::new();
    let mut labels = Vec::new();
    let mut known = Vec::new();
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |pos| pos.line());
        if record.len() != headers.len() {
            return Err(CliError::Parse { line, message: format!("expected {} fields, found {}", headers.len(), record.len()) });
        }
        for (&j, name) in features.iter().zip(&column_names) {
            let cell = &record[j];
            let v: f64 = cell
                .parse()
                .map_err(|_| CliError::Parse { line, message: format!("column {name}: '{cell}' is not a number") })?;
            if !v.is_finite() {
                return Err(CliError::Parse { line, message: format!("column {name}: non-finite value '{cell}'") });
            }
            values.push(v);
        }
        if let Some(j) = label_col {
            let cell = &record[j];
            labels.push(if cell.is_empty() {
                None
            } else {
                let next = class_index.len();
                let k = *class_index.entry(cell.to_string()).or_insert_with(|| {
                    class_names.push(cell.to_string());
                    next
                });
                Some(k)
            });
        }
        if let Some(j) = known_col {
            known.push(match &record[j] {
                "1" | "true" | "TRUE" => true,
                "0" | "false" | "FALSE" | "" => false,
                other => return Err(CliError::Parse { line, message: format!("known: expected 0 or 1, found '{other}'") }),
            });
        }
    }
    let n = values.len() / p;
    if n == 0 {
        return Err(CliError::Parse { line: 1, message: "no data rows".into() });
    }
    let mut data = DataSet::new(values, n, p)?.with_column_names(column_names)?;
    let labels = label_col.map(|_| labels);
    if let Some(all) = labels.as_ref().and_then(|l| l.iter().copied().collect::<Option<Vec<usize>>>()) {
        data = data.with_labels(all)?;
    }
    let known = known_col.map(|_| known);
    if let Some(k) = &known {
        data = data.with_known_mask(k.clone())?;
    }
    Ok(Table { data, class_names, labels, known })
}

/// Per-column centring and scaling applied before fitting.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
}

impl Standardization {
    /// Column means and (divide-by-n) standard deviations; constant columns keep scale 1.
    pub fn fit(data: &DataSet) -> Self {
        let means: Vec<f64> = data.mean().iter().copied().collect();
        let cov = data.covariance();
        let scales = (0..data.p()).map(|j| if cov[(j, j)] > 0.0 { cov[(j, j)].sqrt() } else { 1.0 }).collect();
        Standardization { means, scales }
    }

    pub fn apply(&self, data: &DataSet) -> Result<DataSet> {
        let p = data.p();
        let values = data.values().iter().enumerate().map(|(k, v)| (v - self.means[k % p]) / self.scales[k % p]).collect();
        let mut out = DataSet::new(values, data.n(), p)?.with_column_names(data.column_names().to_vec())?;
        if let Some(l) = data.labels() {
            out = out.with_labels(l.to_vec())?;
        }
        if let Some(k) = data.known_mask() {
            out = out.with_known_mask(k.to_vec())?;
        }
        Ok(out)
    }

    pub fn to_standard(&self, x: &[f64]) -> Vec<f64> {
        x.iter().zip(self.means.iter().zip(&self.scales)).map(|(v, (m, s))| (v - m) / s).collect()
    }

    /// `ln |det|` of the map from original to standardized coordinates.
    pub fn log_jacobian(&self) -> f64 {
        -self.scales.iter().map(|s| s.ln()).sum::<f64>()
    }
}
