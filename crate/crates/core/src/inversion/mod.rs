//! The design-dependent Bayesian inverse problem.

mod design;
mod likelihood;
mod map;
mod posterior;

pub use design::Design;
pub use likelihood::RestrictedLikelihood;
pub use map::{gauss_newton, GaussNewtonProblem, GnOutcome, InverseProblem, MapOptions, MapResult};
pub use posterior::{posterior_lowrank, LowRankPosterior, PriorMetric};
