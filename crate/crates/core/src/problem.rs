//! The assembled experiment: mesh, sensors, priors and forward model.

use std::sync::Arc;

use crate::config::RunConfig;
use crate::error::Result;
use crate::forward_bae::{
    draw_samples, estimate_bae, make_training_set, ErrorModel, ForwardModel, PdeErrorSampler,
    TrainingSet, VALIDATION_STREAMS,
};
use crate::mesh_fem::{build_box_mesh, Mesh, SensorGrid};
use crate::numkit::SolveLedger;
use crate::prior::{make_m_prior_with, make_xi_prior_with, GaussianFieldPrior};

#[derive(Debug)]
pub struct Problem {
    pub mesh: Arc<Mesh>,
    pub model: ForwardModel,
    pub m_prior: GaussianFieldPrior,
    pub xi_prior: GaussianFieldPrior,
    pub sigma: f64,
    pub ledger: Arc<SolveLedger>,
}

impl Problem {
    /// Builds the mesh, sensors, priors and forward model of a configuration.
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        cfg.validate()?;
        let ledger = SolveLedger::new();
        let mesh = Arc::new(build_box_mesh(cfg.mesh.nx, cfg.mesh.ny, cfg.mesh.nz)?);
        let sensors = SensorGrid::regular(&mesh, cfg.sensors.per_side, cfg.sensors.margin)?;
        let m_prior = make_m_prior_with(&mesh, &cfg.m_prior, Some(ledger.clone()))?;
        let xi_prior = make_xi_prior_with(&mesh, &cfg.xi_prior, Some(ledger.clone()))?;
        let model = ForwardModel::new(mesh.clone(), sensors, xi_prior.mean().clone(), ledger.clone())?;
        Ok(Self {
            mesh,
            model,
            m_prior,
            xi_prior,
            sigma: cfg.sigma,
            ledger,
        })
    }

    /// The 20x20x4 reference problem.
    pub fn reference() -> Result<Self> {
        Self::from_config(&RunConfig::default())
    }

    pub fn n_s(&self) -> usize {
        self.model.n_obs()
    }

    pub fn error_sampler(&self) -> PdeErrorSampler<'_> {
        PdeErrorSampler {
            model: &self.model,
            m_prior: &self.m_prior,
            xi_prior: &self.xi_prior,
        }
    }

    pub fn estimate_bae(&self, n_mc: usize, seed: u64) -> Result<ErrorModel> {
        estimate_bae(&self.error_sampler(), n_mc, seed, self.sigma)
    }

    pub fn unaware_error_model(&self) -> Result<ErrorModel> {
        ErrorModel::unaware(self.n_s(), self.sigma)
    }

    pub fn training_set(&self, n_d: usize, seed: u64, reuse_bae_samples: bool) -> Result<TrainingSet> {
        make_training_set(
            &self.model,
            &self.m_prior,
            &self.xi_prior,
            self.sigma,
            n_d,
            seed,
            reuse_bae_samples,
        )
    }

    pub fn validation_set(&self, n_v: usize, seed: u64) -> Result<TrainingSet> {
        draw_samples(
            &self.model,
            &self.m_prior,
            &self.xi_prior,
            self.sigma,
            n_v,
            seed,
            VALIDATION_STREAMS,
        )
    }
}
