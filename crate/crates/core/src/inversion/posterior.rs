//! Low-rank Gaussian approximation of the posterior at the MAP point.
//!
//! The eigenpairs solve `H s = lambda W s` with `W` the prior precision, so
//! the `s` are orthonormal in the Cameron-Martin inner product and
//! `(H + W)^{-1} = Gamma - sum_k lambda_k / (1 + lambda_k) s_k s_k^T`.

use super::map::{InverseProblem, MapResult};
use crate::error::{invalid, Result};
use crate::numkit::{lanczos_eigs, EigPairs, FnOperator, LanczosOptions, Metric};
use crate::prior::GaussianFieldPrior;

/// The Cameron-Martin metric `W = A M^{-1} A` of a prior.
pub struct PriorMetric<'a>(pub &'a GaussianFieldPrior);

impl Metric for PriorMetric<'_> {
    fn apply(&self, x: &[f64]) -> Vec<f64> {
        self.0.precision_dual(x)
    }
}

#[derive(Debug, Clone)]
pub struct LowRankPosterior {
    pub map: MapResult,
    pub eigpairs: EigPairs,
    pub rank_used: usize,
}

impl LowRankPosterior {
    /// `sum_k lambda_k / (1 + lambda_k) <s_k, s_k>_M`
    pub fn trace_reduction(&self, prior: &GaussianFieldPrior) -> f64 {
        self.eigpairs
            .values
            .iter()
            .zip(&self.eigpairs.vectors)
            .map(|(l, s)| l / (1.0 + l) * prior.mass_inner(s, s))
            .sum()
    }

    /// `tr(C_post)` by the low-rank update of `tr(C_pr)`.
    pub fn posterior_trace(&self, prior: &GaussianFieldPrior) -> f64 {
        prior.trace() - self.trace_reduction(prior)
    }

    /// Pointwise posterior variance of the nodal coefficients.
    pub fn variance_field(&self, prior: &GaussianFieldPrior) -> Vec<f64> {
        let mut var = prior.pointwise_variance().to_vec();
        for (l, s) in self.eigpairs.values.iter().zip(&self.eigpairs.vectors) {
            let c = l / (1.0 + l);
            for (v, si) in var.iter_mut().zip(s) {
                *v -= c * si * si;
            }
        }
        var
    }
}

/// Leading `r` eigenpairs of the prior-preconditioned Gauss-Newton Hessian at
/// the MAP point, by Lanczos on `Gamma H` in the `W` inner product.
pub fn posterior_lowrank(
    problem: &InverseProblem,
    map: &MapResult,
    r: usize,
) -> Result<LowRankPosterior> {
    let prior = problem.prior();
    let n = prior.dim();
    if r == 0 {
        return Err(invalid("posterior rank must be at least 1"));
    }
    let r = r.min(n);
    let eigpairs = if problem.likelihood().n_act() == 0 {
        EigPairs::default()
    } else {
        let op = FnOperator::new(n, |x: &[f64]| {
            prior.cov_coeff(&problem.hessian_apply(&map.state, x))
        });
        let opts = LanczosOptions {
            symmetry_probe: false,
            ..LanczosOptions::default()
        };
        lanczos_eigs(&op, &PriorMetric(prior), r, &opts)?
    };
    let rank_used = eigpairs.nonzero();
    Ok(LowRankPosterior {
        map: map.clone(),
        eigpairs,
        rank_used,
    })
}
