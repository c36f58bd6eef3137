//! Density of a fitted bivariate mixture on a rectangular grid.

use std::io::Write;

use salmix_core::Error as CoreError;

use crate::error::{CliError, Result};
use crate::report::FittedMixture;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub x: (f64, f64),
    pub y: (f64, f64),
    pub nx: usize,
    pub ny: usize,
}

impl GridSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = |(lo, hi): (f64, f64)| lo.is_finite() && hi.is_finite() && lo < hi;
        if !ok(self.x) || !ok(self.y) {
            return Err(CliError::InvalidArgument("grid bounds must be finite with min < max".into()));
        }
        if self.nx < 2 || self.ny < 2 {
            return Err(CliError::InvalidArgument("grid resolution must be at least 2".into()));
        }
        Ok(())
    }

    fn axis((lo, hi): (f64, f64), k: usize) -> impl Iterator<Item = f64> {
        (0..k).map(move |i| lo + (hi - lo) * i as f64 / (k - 1) as f64)
    }

    pub fn cell_area(&self) -> f64 {
        (self.x.1 - self.x.0) / (self.nx - 1) as f64 * (self.y.1 - self.y.0) / (self.ny - 1) as f64
    }
}

/// `(x, y, density)` triples, `x` varying fastest. A point exactly on a SAL
/// shift (where the density is unbounded) is reported as infinite.
pub fn density_grid(m: &FittedMixture, spec: &GridSpec) -> Result<Vec<(f64, f64, f64)>> {
    if m.dim() != 2 {
        return Err(CliError::UnsupportedDimension { p: m.dim() });
    }
    spec.validate()?;
    let mut out = Vec::with_capacity(spec.nx * spec.ny);
    for y in GridSpec::axis(spec.y, spec.ny) {
        for x in GridSpec::axis(spec.x, spec.nx) {
            let d = match m.log_density(&[x, y]) {
                Ok(l) => l.exp(),
                Err(CoreError::AtShiftPoint { .. }) => f64::INFINITY,
                Err(e) => return Err(e.into()),
            };
            out.push((x, y, d));
        }
    }
    Ok(out)
}

pub fn write_grid_csv<W: Write>(out: W, grid: &[(f64, f64, f64)]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["x", "y", "density"])?;
    for (x, y, d) in grid {
        w.write_record([x.to_string(), y.to_string(), d.to_string()])?;
    }
    w.flush().map_err(CliError::io("grid CSV"))?;
    Ok(())
}
