//! Shared fixtures and dense reference computations for the integration
//! tests.
#![allow(dead_code)]

use bae_oed::config::RunConfig;
use bae_oed::inversion::Design;
use bae_oed::mesh_fem::{Field, Support};
use bae_oed::problem::Problem;
use bae_oed::forward_bae::ErrorModel;
use nalgebra::{DMatrix, DVector, SymmetricEigen};

pub fn small_config(nx: usize, ny: usize, nz: usize, per_side: usize) -> RunConfig {
    let mut cfg = RunConfig::default();
    cfg.mesh.nx = nx;
    cfg.mesh.ny = ny;
    cfg.mesh.nz = nz;
    cfg.sensors.per_side = per_side;
    cfg.sensors.margin = 0.1;
    cfg.oed.k = 1;
    cfg
}

pub fn small_problem(nx: usize, ny: usize, nz: usize, per_side: usize) -> Problem {
    Problem::from_config(&small_config(nx, ny, nz, per_side)).unwrap()
}

/// `F(m)` through a full sparse solve at the nominal secondary field.
pub fn forward_full_nominal(p: &Problem, m: &[f64]) -> Vec<f64> {
    let mf = Field::from_values(Support::Bottom, m.to_vec());
    p.model.forward_full(&mf, p.model.xi_bar()).unwrap()
}

/// Central-difference Jacobian of the full-solve forward map.
pub fn fd_jacobian(p: &Problem, m: &[f64], h: f64) -> DMatrix<f64> {
    let n = m.len();
    let mut jac = DMatrix::zeros(p.n_s(), n);
    for j in 0..n {
        let mut a = m.to_vec();
        let mut b = m.to_vec();
        a[j] += h;
        b[j] -= h;
        let fa = forward_full_nominal(p, &a);
        let fb = forward_full_nominal(p, &b);
        for i in 0..p.n_s() {
            jac[(i, j)] = (fa[i] - fb[i]) / (2.0 * h);
        }
    }
    jac
}

/// `P_w^T (P_w Gamma_nu P_w^T)^{-1} P_w` by dense inversion.
pub fn dense_sigma(em: &ErrorModel, design: &Design) -> DMatrix<f64> {
    let n = design.n_s();
    let act = design.active();
    let mut out = DMatrix::zeros(n, n);
    if act.is_empty() {
        return out;
    }
    let g = DMatrix::from_fn(act.len(), act.len(), |i, j| em.gamma_nu()[(act[i], act[j])]);
    let inv = g.try_inverse().unwrap();
    for (a, &i) in act.iter().enumerate() {
        for (b, &j) in act.iter().enumerate() {
            out[(i, j)] = inv[(a, b)];
        }
    }
    out
}

/// Prior precision `A M^{-1} A` as a dense matrix.
pub fn dense_precision(p: &Problem) -> DMatrix<f64> {
    let a = p.m_prior.a().to_dense();
    let m = p.m_prior.mass().to_dense();
    let w = &a * m.try_inverse().unwrap() * &a;
    (&w + w.transpose()) * 0.5
}

/// `tr((J^T Sigma J + W)^{-1} M)` for a given Jacobian.
pub fn dense_posterior_trace(p: &Problem, jac: &DMatrix<f64>, sigma: &DMatrix<f64>) -> f64 {
    let h = jac.transpose() * sigma * jac + dense_precision(p);
    let cov = ((&h + h.transpose()) * 0.5).try_inverse().unwrap();
    (cov * p.m_prior.mass().to_dense()).trace()
}

/// `tr(A^{-1} M A^{-1} M)` by dense inversion.
pub fn dense_prior_trace(p: &Problem) -> f64 {
    let cov = dense_precision(p).try_inverse().unwrap();
    (cov * p.m_prior.mass().to_dense()).trace()
}

/// Eigenvalues of `H v = lambda W v`, decreasing.
pub fn dense_generalized_eigenvalues(h: &DMatrix<f64>, w: &DMatrix<f64>) -> Vec<f64> {
    let l = w.clone().cholesky().unwrap().l();
    let li = l.clone().try_inverse().unwrap();
    let t = &li * h * li.transpose();
    let mut ev: Vec<f64> = SymmetricEigen::new((&t + t.transpose()) * 0.5)
        .eigenvalues
        .iter()
        .copied()
        .collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

pub fn dvec(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
