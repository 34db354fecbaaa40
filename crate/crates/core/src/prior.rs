//! Gaussian priors with covariance built from an elliptic operator `A`.
//!
//! With `M` the mass matrix of the support, a nodal field `f` is mapped by the
//! covariance operator to `C f = A^{-1} M A^{-1} M f`, which is self-adjoint in
//! the `M` inner product. Coefficient vectors of samples have covariance
//! `A^{-1} M A^{-1}`, and the Cameron-Martin inner product is
//! `<a, b>_CM = a^T A M^{-1} A b`.

use std::sync::{Arc, OnceLock};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::mesh_fem::{boundary_mass, volume_mass, volume_stiffness, BottomSurface, FaceTag, Field, Mesh, Support};
use crate::numkit::{dot, gaussian_vector, CsrMatrix, SolveLedger, SparseCholesky, StreamRng};

/// Ledger label for solves with prior operators.
pub const PRIOR_TAG: &str = "prior";

/// Prior on the bottom-face field `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MPriorConfig {
    pub mean: f64,
    pub theta: f64,
    pub alpha: f64,
    /// Defaults to `sqrt(theta * alpha) / 1.42`.
    pub robin_beta: Option<f64>,
}

impl Default for MPriorConfig {
    fn default() -> Self {
        Self {
            mean: 1.0,
            theta: 0.1,
            alpha: 1.0,
            robin_beta: None,
        }
    }
}

/// Prior on the volume field `xi`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct XiPriorConfig {
    pub mean: f64,
    #[serde(rename = "Theta_diag")]
    pub theta_diag: [f64; 3],
    pub gamma: f64,
    /// Defaults to `sqrt(min(Theta) * gamma) / 1.42`.
    pub robin_beta: Option<f64>,
}

impl Default for XiPriorConfig {
    fn default() -> Self {
        Self {
            mean: 0.0,
            theta_diag: [0.25, 0.25, 0.0025],
            gamma: 50.0,
            robin_beta: None,
        }
    }
}

#[derive(Debug)]
pub struct GaussianFieldPrior {
    mean: Field,
    a: CsrMatrix,
    mass: CsrMatrix,
    a_chol: SparseCholesky,
    mass_chol: SparseCholesky,
    diffusion: Vec<f64>,
    gamma: f64,
    robin_beta: f64,
    trace: OnceLock<f64>,
    variance: OnceLock<Vec<f64>>,
}

impl GaussianFieldPrior {
    /// Builds the prior from `A = stiffness + gamma M + beta M_boundary`.
    #[allow(clippy::too_many_arguments)]
    fn build(
        mean: Field,
        stiffness: CsrMatrix,
        mass: CsrMatrix,
        boundary: CsrMatrix,
        diffusion: Vec<f64>,
        gamma: f64,
        robin_beta: f64,
        ledger: Option<Arc<SolveLedger>>,
    ) -> Result<Self> {
        if !(gamma > 0.0) || diffusion.iter().any(|d| !(*d > 0.0)) || !(robin_beta >= 0.0) {
            return Err(Error::Config(format!(
                "prior needs positive diffusion and reaction and nonnegative Robin term \
                 (diffusion {diffusion:?}, gamma {gamma}, beta {robin_beta})"
            )));
        }
        let a = stiffness
            .add_scaled(gamma, &mass)?
            .add_scaled(robin_beta, &boundary)?
            .with_tag(PRIOR_TAG);
        let mass = mass.with_tag(PRIOR_TAG);
        let factor = |m: &CsrMatrix, l| {
            SparseCholesky::factor(m, l).map_err(|e| Error::Config(format!("prior operator: {e}")))
        };
        let a_chol = factor(&a, ledger.clone())?;
        let mass_chol = factor(&mass, None)?;
        Ok(Self {
            mean,
            a,
            mass,
            a_chol,
            mass_chol,
            diffusion,
            gamma,
            robin_beta,
            trace: OnceLock::new(),
            variance: OnceLock::new(),
        })
    }

    pub fn support(&self) -> Support {
        self.mean.support()
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn mean(&self) -> &Field {
        &self.mean
    }

    pub fn a(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn mass(&self) -> &CsrMatrix {
        &self.mass
    }

    pub fn diffusion(&self) -> &[f64] {
        &self.diffusion
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn robin_beta(&self) -> f64 {
        self.robin_beta
    }

    fn check(&self, f: &Field) -> Result<()> {
        if f.support() != self.support() || f.len() != self.dim() {
            return Err(invalid(format!(
                "field on {:?} with {} values does not match the prior space",
                f.support(),
                f.len()
            )));
        }
        Ok(())
    }

    /// `mean + A^{-1} G z` with `G G^T = M` and `z` standard normal.
    pub fn sample(&self, rng: &mut StreamRng) -> Field {
        let z = gaussian_vector(rng, self.dim());
        let mut x = self.a_chol.solve(&self.mass_chol.factor_mul(&z));
        for (xi, m) in x.iter_mut().zip(self.mean.values()) {
            *xi += m;
        }
        Field::from_values(self.support(), x)
    }

    /// `A^{-1} M A^{-1} v`: the coefficient covariance, mapping dual vectors
    /// to nodal fields.
    pub fn cov_coeff(&self, v: &[f64]) -> Vec<f64> {
        let t = self.a_chol.solve(v);
        self.a_chol.solve(&self.mass.matvec(&t))
    }

    /// `A M^{-1} A x`: the inverse of [`GaussianFieldPrior::cov_coeff`].
    pub fn precision_dual(&self, x: &[f64]) -> Vec<f64> {
        let t = self.mass_chol.solve(&self.a.matvec(x));
        self.a.matvec(&t)
    }

    /// `C f = A^{-1} M A^{-1} M f`.
    pub fn apply_cov(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let v = self.cov_coeff(&self.mass.matvec(f.values()));
        Ok(Field::from_values(self.support(), v))
    }

    /// `C^{-1} f = M^{-1} A M^{-1} A f`.
    pub fn apply_precision(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let v = self.mass_chol.solve(&self.precision_dual(f.values()));
        Ok(Field::from_values(self.support(), v))
    }

    /// `M^{-1} A f`, the strong form of the operator.
    pub fn apply_operator(&self, f: &Field) -> Result<Field> {
        self.check(f)?;
        let v = self.mass_chol.solve(&self.a.matvec(f.values()));
        Ok(Field::from_values(self.support(), v))
    }

    /// Cameron-Martin inner product `(A a)^T M^{-1} (A b)`.
    pub fn cm_inner(&self, a: &Field, b: &Field) -> Result<f64> {
        self.check(a)?;
        self.check(b)?;
        Ok(self.cm_inner_values(a.values(), b.values()))
    }

    pub fn cm_inner_values(&self, a: &[f64], b: &[f64]) -> f64 {
        let aa = self.a.matvec(a);
        let ab = self.a.matvec(b);
        dot(&aa, &self.mass_chol.solve_uncounted(&ab))
    }

    /// `<a, b>_M`
    pub fn mass_inner(&self, a: &[f64], b: &[f64]) -> f64 {
        self.mass.quad(a, b)
    }

    /// `tr(C) = tr(A^{-1} M A^{-1} M)`, computed once.
    pub fn trace(&self) -> f64 {
        *self.trace.get_or_init(|| {
            let n = self.dim();
            let mut x = DMatrix::zeros(n, n);
            let dense_m = self.mass.to_dense();
            for j in 0..n {
                let col: Vec<f64> = dense_m.column(j).iter().copied().collect();
                let s = self.a_chol.solve_uncounted(&col);
                x.set_column(j, &nalgebra::DVector::from_vec(s));
            }
            // tr(X X) with X = A^{-1} M
            (0..n)
                .map(|i| (0..n).map(|j| x[(i, j)] * x[(j, i)]).sum::<f64>())
                .sum()
        })
    }

    /// Pointwise variance of the coefficients, computed once.
    pub fn pointwise_variance(&self) -> &[f64] {
        self.variance.get_or_init(|| self.dense_cov_coeff().diagonal().as_slice().to_vec())
    }

    /// Dense `A^{-1} M A^{-1}` for small problems and tests.
    pub fn dense_cov_coeff(&self) -> DMatrix<f64> {
        let a_inv = self
            .a
            .to_dense()
            .cholesky()
            .expect("prior operator is positive definite")
            .inverse();
        &a_inv * self.mass.to_dense() * &a_inv
    }
}

pub fn make_m_prior(mesh: &Mesh) -> Result<GaussianFieldPrior> {
    make_m_prior_with(mesh, &MPriorConfig::default(), None)
}

pub fn make_m_prior_with(
    mesh: &Mesh,
    cfg: &MPriorConfig,
    ledger: Option<Arc<SolveLedger>>,
) -> Result<GaussianFieldPrior> {
    let surface = BottomSurface::new(mesh);
    let beta = cfg
        .robin_beta
        .unwrap_or_else(|| (cfg.theta * cfg.alpha).sqrt() / 1.42);
    GaussianFieldPrior::build(
        Field::constant(mesh, Support::Bottom, cfg.mean),
        surface.stiffness([cfg.theta, cfg.theta]),
        surface.mass(),
        surface.perimeter_mass(),
        vec![cfg.theta, cfg.theta],
        cfg.alpha,
        beta,
        ledger,
    )
}

pub fn make_xi_prior(mesh: &Mesh) -> Result<GaussianFieldPrior> {
    make_xi_prior_with(mesh, &XiPriorConfig::default(), None)
}

pub fn make_xi_prior_with(
    mesh: &Mesh,
    cfg: &XiPriorConfig,
    ledger: Option<Arc<SolveLedger>>,
) -> Result<GaussianFieldPrior> {
    let theta_min = cfg.theta_diag.iter().copied().fold(f64::INFINITY, f64::min);
    let beta = cfg
        .robin_beta
        .unwrap_or_else(|| (theta_min * cfg.gamma).sqrt() / 1.42);
    GaussianFieldPrior::build(
        Field::constant(mesh, Support::Volume, cfg.mean),
        volume_stiffness(mesh, None, cfg.theta_diag),
        volume_mass(mesh),
        boundary_mass(mesh, &[FaceTag::Dirichlet, FaceTag::Neumann, FaceTag::Robin], None),
        cfg.theta_diag.to_vec(),
        cfg.gamma,
        beta,
        ledger,
    )
}
