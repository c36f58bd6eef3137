//! Gaussian mixture baseline sharing the SAL engine's annealing, stopping
//! rule, floors and covariance repair.

use crate::data::DataSet;
use crate::em::{Engine, FitConfig, FitReport, GaussianFamily};
use crate::error::Result;
use crate::gaussian::{GaussianComponent, GaussianMixture};

/// EM for a Gaussian mixture from `init`.
pub fn fit_gmm(data: &DataSet, cfg: &FitConfig, init: GaussianMixture) -> Result<FitReport<GaussianComponent>> {
    Engine::<GaussianFamily>::new(data, cfg, None)?.fit(init)
}

/// Deterministic-annealing start for a Gaussian mixture. With the same
/// `cfg` the random starts coincide with those of the SAL engine.
pub fn anneal_init_gmm(data: &DataSet, cfg: &FitConfig) -> Result<GaussianMixture> {
    Ok(Engine::<GaussianFamily>::new(data, cfg, None)?.anneal()?.mixture)
}
