//! Shared numerical kernels: sparse symmetric matrices, a sparse Cholesky
//! factorization, preconditioned conjugate gradients, a Lanczos eigensolver
//! with full reorthogonalization, seeded Gaussian streams and the solve ledger.

mod cg;
mod cholesky;
mod lanczos;
mod ledger;
mod rng;
mod sparse;

pub use cg::{cg_iterate, cg_solve, CgNorm, CgOptions, CgSolution};
pub use cholesky::{reverse_cuthill_mckee, SparseCholesky};
pub use lanczos::{lanczos_eigs, EigPairs, Euclidean, LanczosOptions, Metric};
pub use ledger::SolveLedger;
pub use rng::{gaussian_vector, stream, StreamRng};
pub use sparse::{CsrMatrix, FnOperator, LinearOperator, TripletBuilder};

/// Default relative tolerance for forward/adjoint CG solves.
pub const FORWARD_RTOL: f64 = 1e-10;
/// Default relative tolerance for inner Newton-CG solves.
pub const INNER_RTOL: f64 = 1e-8;
/// Eigenvalues below this fraction of the largest one are set to zero.
pub const EIG_TRUNCATION: f64 = 1e-12;

#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// y += alpha * x
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn scaled(alpha: f64, x: &[f64]) -> Vec<f64> {
    x.iter().map(|v| alpha * v).collect()
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

pub fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}
