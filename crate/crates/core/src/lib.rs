#![no_std]

extern crate alloc;

pub mod classify;
pub mod data;
pub mod em;
pub mod error;
pub mod gaussian;
pub mod gmm;
pub mod linalg;
pub mod metrics;
pub mod mixture;
pub mod sal;
pub mod simulate;
pub mod special;

pub use data::DataSet;
pub use em::{AnnealingSchedule, EStepQuantities, FitConfig, FitReport, FitStatus, ModelFit};
pub use error::{Error, Result};
pub use gaussian::{GaussianComponent, GaussianMixture};
pub use metrics::{ModelKind, ModelScore};
pub use mixture::{ComponentDensity, Mixture};
pub use sal::{SalComponent, SalMixture};
