use rayon::prelude::*;

use super::model::ForwardModel;
use crate::error::{invalid, Result};
use crate::mesh_fem::Field;
use crate::numkit::{gaussian_vector, stream};
use crate::prior::GaussianFieldPrior;

/// Purpose labels of the three random streams behind a set of draws.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StreamLabels {
    pub m: &'static str,
    pub xi: &'static str,
    pub eta: &'static str,
}

pub const BAE_STREAMS: StreamLabels = StreamLabels {
    m: "bae-m",
    xi: "bae-xi",
    eta: "bae-eta",
};

pub const TRAINING_STREAMS: StreamLabels = StreamLabels {
    m: "train-m",
    xi: "train-xi",
    eta: "train-eta",
};

/// Training draws that share `(m, xi)` with the BAE samples.
pub const TRAINING_REUSE_STREAMS: StreamLabels = StreamLabels {
    m: "bae-m",
    xi: "bae-xi",
    eta: "train-eta",
};

pub const VALIDATION_STREAMS: StreamLabels = StreamLabels {
    m: "valid-m",
    xi: "valid-xi",
    eta: "valid-eta",
};

/// One synthetic observation `y = G(m, xi) + eta` with its ingredients.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSample {
    pub index: u64,
    pub m: Field,
    pub xi: Field,
    pub eta: Vec<f64>,
    pub y: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainingSet {
    pub seed: u64,
    pub labels: StreamLabels,
    pub samples: Vec<TrainingSample>,
}

impl TrainingSet {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

/// Draw `index` of the `(m, xi, eta)` triple and its data vector.
pub fn draw_sample(
    model: &ForwardModel,
    m_prior: &GaussianFieldPrior,
    xi_prior: &GaussianFieldPrior,
    sigma: f64,
    seed: u64,
    labels: StreamLabels,
    index: u64,
) -> Result<TrainingSample> {
    let m = m_prior.sample(&mut stream(seed, labels.m, index));
    let xi = xi_prior.sample(&mut stream(seed, labels.xi, index));
    let eta: Vec<f64> = gaussian_vector(&mut stream(seed, labels.eta, index), model.n_obs())
        .into_iter()
        .map(|z| sigma * z)
        .collect();
    let g = model.forward_full(&m, &xi)?;
    let y = g.iter().zip(&eta).map(|(a, b)| a + b).collect();
    Ok(TrainingSample { index, m, xi, eta, y })
}

/// `n` independent draws, computed in parallel and returned in index order.
#[allow(clippy::too_many_arguments)]
pub fn draw_samples(
    model: &ForwardModel,
    m_prior: &GaussianFieldPrior,
    xi_prior: &GaussianFieldPrior,
    sigma: f64,
    n: usize,
    seed: u64,
    labels: StreamLabels,
) -> Result<TrainingSet> {
    let samples = (0..n as u64)
        .into_par_iter()
        .map(|i| draw_sample(model, m_prior, xi_prior, sigma, seed, labels, i))
        .collect::<Result<Vec<_>>>()?;
    Ok(TrainingSet {
        seed,
        labels,
        samples,
    })
}

pub fn make_training_set(
    model: &ForwardModel,
    m_prior: &GaussianFieldPrior,
    xi_prior: &GaussianFieldPrior,
    sigma: f64,
    n_d: usize,
    seed: u64,
    reuse_bae_samples: bool,
) -> Result<TrainingSet> {
    if n_d < 1 {
        return Err(invalid("training set needs n_d >= 1"));
    }
    let labels = if reuse_bae_samples {
        TRAINING_REUSE_STREAMS
    } else {
        TRAINING_STREAMS
    };
    draw_samples(model, m_prior, xi_prior, sigma, n_d, seed, labels)
}
