//! Forward maps, Monte Carlo estimation of the approximation-error
//! statistics, and training data.

mod error_model;
mod model;
mod reduced;
mod training;

use rayon::prelude::*;

pub use error_model::{repair_psd, ErrorModel};
pub use model::ForwardModel;
pub use reduced::{
    LinearizedState, ReducedModel, ADJOINT_TAG, INC_ADJOINT_TAG, INC_STATE_TAG, SETUP_TAG,
};
pub use training::{
    draw_sample, draw_samples, make_training_set, StreamLabels, TrainingSample, TrainingSet,
    BAE_STREAMS, TRAINING_REUSE_STREAMS, TRAINING_STREAMS, VALIDATION_STREAMS,
};

use crate::error::{invalid, Result};
use crate::numkit::stream;
use crate::prior::GaussianFieldPrior;

/// Anything that can produce independent draws of the approximation error
/// `G(m, xi) - F(m)` with `(m, xi)` from their priors.
pub trait ErrorSampler: Sync {
    fn n_obs(&self) -> usize;

    /// Draw `index` of the error, from streams keyed by `(seed, index)`.
    fn error_sample(&self, seed: u64, index: u64) -> Result<Vec<f64>>;
}

/// The PDE model with its two priors.
pub struct PdeErrorSampler<'a> {
    pub model: &'a ForwardModel,
    pub m_prior: &'a GaussianFieldPrior,
    pub xi_prior: &'a GaussianFieldPrior,
}

impl ErrorSampler for PdeErrorSampler<'_> {
    fn n_obs(&self) -> usize {
        self.model.n_obs()
    }

    fn error_sample(&self, seed: u64, index: u64) -> Result<Vec<f64>> {
        let m = self.m_prior.sample(&mut stream(seed, BAE_STREAMS.m, index));
        let xi = self.xi_prior.sample(&mut stream(seed, BAE_STREAMS.xi, index));
        let full = self.model.forward_full(&m, &xi)?;
        let approx = self.model.forward_approx(&m)?;
        Ok(full.iter().zip(&approx).map(|(a, b)| a - b).collect())
    }
}

/// Sample mean and covariance of `n_mc` error draws plus `sigma^2 I`.
pub fn estimate_bae(
    sampler: &dyn ErrorSampler,
    n_mc: usize,
    master_seed: u64,
    sigma: f64,
) -> Result<ErrorModel> {
    if n_mc < 2 {
        return Err(invalid(format!("n_mc must be at least 2, got {n_mc}")));
    }
    let samples = (0..n_mc as u64)
        .into_par_iter()
        .map(|i| sampler.error_sample(master_seed, i))
        .collect::<Result<Vec<_>>>()?;
    ErrorModel::from_samples(&samples, sigma, Some(master_seed))
}
