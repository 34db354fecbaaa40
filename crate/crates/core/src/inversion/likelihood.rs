use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use super::design::Design;
use crate::error::{invalid, Error, Result};
use crate::forward_bae::ErrorModel;

/// The total-error likelihood restricted to the active sensors of a design.
#[derive(Debug, Clone)]
pub struct RestrictedLikelihood {
    design: Design,
    gamma_w: DMatrix<f64>,
    chol: Option<Cholesky<f64, Dyn>>,
    eps0_w: Vec<f64>,
}

impl RestrictedLikelihood {
    pub fn restrict(em: &ErrorModel, design: &Design) -> Result<Self> {
        if em.n_s() != design.n_s() {
            return Err(invalid(format!(
                "design over {} sensors used with an error model over {}",
                design.n_s(),
                em.n_s()
            )));
        }
        let act = design.active();
        let nu = em.gamma_nu();
        let gamma_w = DMatrix::from_fn(act.len(), act.len(), |i, j| nu[(act[i], act[j])]);
        let chol = if act.is_empty() {
            None
        } else {
            Some(Cholesky::new(gamma_w.clone()).ok_or_else(|| {
                Error::Factorization("restricted noise covariance is not positive definite".into())
            })?)
        };
        Ok(Self {
            design: design.clone(),
            gamma_w,
            chol,
            eps0_w: act.iter().map(|&i| em.eps0[i]).collect(),
        })
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn n_act(&self) -> usize {
        self.design.n_act()
    }

    pub fn gamma_w(&self) -> &DMatrix<f64> {
        &self.gamma_w
    }

    pub fn eps0_w(&self) -> &[f64] {
        &self.eps0_w
    }

    /// `P_w v`
    pub fn select(&self, v: &[f64]) -> Vec<f64> {
        self.design.active().iter().map(|&i| v[i]).collect()
    }

    /// `P_w^T v`
    pub fn expand(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.design.n_s()];
        for (k, &i) in self.design.active().iter().enumerate() {
            out[i] = v[k];
        }
        out
    }

    /// `Gamma_w^{-1} r` for a restricted vector.
    pub fn whiten(&self, r: &[f64]) -> Vec<f64> {
        match &self.chol {
            Some(c) => c.solve(&DVector::from_column_slice(r)).as_slice().to_vec(),
            None => Vec::new(),
        }
    }

    /// `y_w - eps0_w - P_w F(m)` from full-length data and predictions.
    pub fn residual(&self, y: &[f64], obs: &[f64]) -> Vec<f64> {
        self.design
            .active()
            .iter()
            .zip(&self.eps0_w)
            .map(|(&i, e)| y[i] - e - obs[i])
            .collect()
    }

    /// `1/2 r^T Gamma_w^{-1} r`
    pub fn misfit(&self, y: &[f64], obs: &[f64]) -> f64 {
        let r = self.residual(y, obs);
        0.5 * r.iter().zip(self.whiten(&r)).map(|(a, b)| a * b).sum::<f64>()
    }

    /// `Sigma(w) = P_w^T Gamma_w^{-1} P_w` as a dense `n_s x n_s` matrix.
    pub fn sigma_matrix(&self) -> DMatrix<f64> {
        let n = self.design.n_s();
        let mut out = DMatrix::zeros(n, n);
        if let Some(c) = &self.chol {
            let inv = c.inverse();
            let act = self.design.active();
            for (a, &i) in act.iter().enumerate() {
                for (b, &j) in act.iter().enumerate() {
                    out[(i, j)] = inv[(a, b)];
                }
            }
        }
        out
    }
}
