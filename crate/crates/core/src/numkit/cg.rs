//! Preconditioned conjugate gradients.

use super::ledger::SolveLedger;
use super::sparse::LinearOperator;
use super::{axpy, dot};
use crate::error::{Error, Result};

/// Norm used for the stopping test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CgNorm {
    /// `||b - A x||_2 <= rtol * ||b||_2`
    Residual,
    /// `sqrt(r^T P r) <= rtol * sqrt(b^T P b)` with `P` the preconditioner
    Preconditioned,
}

#[derive(Debug, Clone, Copy)]
pub struct CgOptions {
    pub rtol: f64,
    pub maxiter: usize,
    pub norm: CgNorm,
}

impl Default for CgOptions {
    fn default() -> Self {
        Self {
            rtol: super::FORWARD_RTOL,
            maxiter: 10_000,
            norm: CgNorm::Residual,
        }
    }
}

#[derive(Debug, Clone)]
pub struct CgSolution {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// Final residual relative to the right-hand side, in the chosen norm.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Runs PCG from `x = 0` and reports how far it got; never fails.
pub fn cg_iterate(
    a: &dyn LinearOperator,
    precond: Option<&dyn LinearOperator>,
    b: &[f64],
    opts: &CgOptions,
) -> CgSolution {
    let n = a.dim();
    assert_eq!(b.len(), n, "rhs length mismatch");
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let precondition = |r: &[f64]| -> Vec<f64> {
        match precond {
            Some(p) => p.apply(r),
            None => r.to_vec(),
        }
    };
    let mut z = precondition(&r);
    let mut rz = dot(&r, &z);
    let measure = |r: &[f64], rz: f64| match opts.norm {
        CgNorm::Residual => dot(r, r).sqrt(),
        CgNorm::Preconditioned => rz.max(0.0).sqrt(),
    };
    let b_norm = measure(&r, rz);
    if b_norm == 0.0 {
        return CgSolution {
            x,
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }

    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rel = 1.0;
    for it in 0..opts.maxiter {
        a.apply_into(&p, &mut ap);
        let curvature = dot(&p, &ap);
        if curvature <= 0.0 || !curvature.is_finite() {
            return CgSolution {
                x,
                iterations: it,
                relative_residual: rel,
                converged: false,
            };
        }
        let alpha = rz / curvature;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        z = precondition(&r);
        let rz_new = dot(&r, &z);
        rel = measure(&r, rz_new) / b_norm;
        if rel <= opts.rtol {
            return CgSolution {
                x,
                iterations: it + 1,
                relative_residual: rel,
                converged: true,
            };
        }
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    CgSolution {
        x,
        iterations: opts.maxiter,
        relative_residual: rel,
        converged: false,
    }
}

/// Solves `A x = b` to `||A x - b|| <= rtol ||b||` and charges one solve to
/// `tag` in the ledger.
pub fn cg_solve(
    a: &dyn LinearOperator,
    precond: Option<&dyn LinearOperator>,
    b: &[f64],
    rtol: f64,
    maxiter: usize,
    ledger: Option<&SolveLedger>,
    tag: &str,
) -> Result<Vec<f64>> {
    if !(rtol > 0.0 && rtol < 1.0) {
        return Err(Error::InvalidArgument(format!("rtol {rtol} not in (0, 1)")));
    }
    if let Some(l) = ledger {
        l.record(tag);
    }
    let sol = cg_iterate(
        a,
        precond,
        b,
        &CgOptions {
            rtol,
            maxiter,
            norm: CgNorm::Residual,
        },
    );
    if sol.converged {
        Ok(sol.x)
    } else {
        Err(Error::IterationLimit {
            solver: "cg",
            iterations: sol.iterations,
            residual: sol.relative_residual,
        })
    }
}
