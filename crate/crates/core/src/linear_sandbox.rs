//! The linear model `y = S m + T xi + eta` with Gaussian `m`, `xi` and
//! `eta`, where every posterior quantity has a closed form. Used as an
//! analytic reference for the error model, the marginalization identities and
//! the trace formulas.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{invalid, Error, Result};
use crate::forward_bae::ErrorSampler;
use crate::inversion::{GaussNewtonProblem, MapOptions};
use crate::numkit::{gaussian_vector, stream, EIG_TRUNCATION};

/// Random SPD matrix `Q diag(l) Q^T` with `Q` orthogonal and `log l`
/// uniform on `[log 1e-3, 0]`.
pub fn random_spd<R: Rng + ?Sized>(n: usize, rng: &mut R) -> DMatrix<f64> {
    let g: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(rng));
    let q = g.qr().q();
    let l = DVector::from_fn(n, |_, _| (rng.random::<f64>() * 1e-3f64.ln()).exp());
    let a: DMatrix<f64> = &q * DMatrix::from_diagonal(&l) * q.transpose();
    (&a + a.transpose()) * 0.5
}

pub fn random_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> DMatrix<f64> {
    DMatrix::from_fn(rows, cols, |_, _| StandardNormal.sample(rng))
}

fn spd_inverse(a: &DMatrix<f64>, what: &str) -> Result<DMatrix<f64>> {
    a.clone()
        .cholesky()
        .map(|c| c.inverse())
        .ok_or_else(|| Error::Factorization(format!("{what} is not positive definite")))
}

/// Symmetric square root by eigendecomposition.
pub fn sqrt_spd(a: &DMatrix<f64>) -> DMatrix<f64> {
    let e = SymmetricEigen::new(a.clone());
    let d = e.eigenvalues.map(|l| l.max(0.0).sqrt());
    &e.eigenvectors * DMatrix::from_diagonal(&d) * e.eigenvectors.transpose()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LinearModel {
    /// `d x n`
    pub s: DMatrix<f64>,
    /// `d x p`
    pub t: DMatrix<f64>,
    pub c_pr: DMatrix<f64>,
    pub c_xi: DMatrix<f64>,
    pub m_pr: DVector<f64>,
    /// Mean of the `xi` prior.
    pub xi_mean: DVector<f64>,
    /// Value of `xi` frozen in the approximate model.
    pub xi_bar: DVector<f64>,
    pub sigma2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSpectrum {
    /// Eigenvalues of `T C_xi T^T`, decreasing.
    pub eigenvalues: Vec<f64>,
    /// `Var(nu_i) = sum_j (lambda_j + sigma^2) (e_i^T v_j)^2`
    pub variances: Vec<f64>,
}

impl LinearModel {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        s: DMatrix<f64>,
        t: DMatrix<f64>,
        c_pr: DMatrix<f64>,
        c_xi: DMatrix<f64>,
        m_pr: DVector<f64>,
        xi_mean: DVector<f64>,
        xi_bar: DVector<f64>,
        sigma2: f64,
    ) -> Result<Self> {
        let (d, n, p) = (s.nrows(), s.ncols(), t.ncols());
        if t.nrows() != d
            || c_pr.shape() != (n, n)
            || c_xi.shape() != (p, p)
            || m_pr.len() != n
            || xi_mean.len() != p
            || xi_bar.len() != p
        {
            return Err(invalid("linear model blocks have inconsistent dimensions"));
        }
        if !(sigma2 > 0.0) {
            return Err(invalid("noise variance must be positive"));
        }
        spd_inverse(&c_pr, "prior covariance")?;
        spd_inverse(&c_xi, "secondary covariance")?;
        Ok(Self {
            s,
            t,
            c_pr,
            c_xi,
            m_pr,
            xi_mean,
            xi_bar,
            sigma2,
        })
    }

    /// Gaussian `S`, `T`, random SPD covariances, zero means and
    /// `xi_bar` equal to the `xi` mean.
    pub fn random<R: Rng + ?Sized>(d: usize, n: usize, p: usize, sigma2: f64, rng: &mut R) -> Self {
        let s = random_matrix(d, n, rng);
        let t = random_matrix(d, p, rng);
        let c_pr = random_spd(n, rng);
        let c_xi = random_spd(p, rng);
        Self::new(
            s,
            t,
            c_pr,
            c_xi,
            DVector::zeros(n),
            DVector::zeros(p),
            DVector::zeros(p),
            sigma2,
        )
        .expect("random instance is valid")
    }

    /// `(d, n, p)`
    pub fn dims(&self) -> (usize, usize, usize) {
        (self.s.nrows(), self.s.ncols(), self.t.ncols())
    }

    fn noise(&self) -> DMatrix<f64> {
        let d = self.s.nrows();
        DMatrix::identity(d, d) * self.sigma2
    }

    /// `T C_xi T^T`
    pub fn gamma_eps(&self) -> DMatrix<f64> {
        &self.t * &self.c_xi * self.t.transpose()
    }

    /// `T (xi_mean - xi_bar)`
    pub fn eps0(&self) -> DVector<f64> {
        &self.t * (&self.xi_mean - &self.xi_bar)
    }

    pub fn gamma_nu(&self) -> DMatrix<f64> {
        self.gamma_eps() + self.noise()
    }

    /// `(S^T Gamma_nu^{-1} S + C_pr^{-1})^{-1}`
    pub fn analytic_posterior_cov(&self) -> Result<DMatrix<f64>> {
        let nu_inv = spd_inverse(&self.gamma_nu(), "total error covariance")?;
        let h = self.s.transpose() * nu_inv * &self.s + spd_inverse(&self.c_pr, "prior")?;
        spd_inverse(&h, "posterior precision")
    }

    /// Posterior covariance of `m` after integrating out `xi` from the joint
    /// posterior of `(m, xi)`.
    pub fn marginal_posterior_cov(&self) -> Result<DMatrix<f64>> {
        let (d, _, p) = self.dims();
        let gn_inv = DMatrix::identity(d, d) / self.sigma2;
        let st_g = self.s.transpose() * &gn_inv;
        let mut h = spd_inverse(&self.c_pr, "prior")? + &st_g * &self.s;
        if p > 0 {
            let inner = spd_inverse(&self.c_xi, "secondary")? + self.t.transpose() * &gn_inv * &self.t;
            let inner_inv = spd_inverse(&inner, "secondary posterior precision")?;
            let cross = &st_g * &self.t;
            h -= &cross * inner_inv * cross.transpose();
        }
        spd_inverse(&((&h + h.transpose()) * 0.5), "marginal posterior precision")
    }

    /// Posterior mean of `m` under the total-error model.
    pub fn posterior_mean(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        let nu_inv = spd_inverse(&self.gamma_nu(), "total error covariance")?;
        let r = y - &self.s * &self.m_pr - &self.t * &self.xi_bar - self.eps0();
        Ok(&self.m_pr + self.analytic_posterior_cov()? * self.s.transpose() * nu_inv * r)
    }

    /// Largest entry of the difference between `(T C_xi T^T + s^2 I)^{-1}`
    /// and its Woodbury form.
    pub fn smw_check(&self) -> Result<f64> {
        let (d, _, p) = self.dims();
        let direct = spd_inverse(&self.gamma_nu(), "total error covariance")?;
        let s2 = self.sigma2;
        let mut woodbury = DMatrix::identity(d, d) / s2;
        if p > 0 {
            let inner = spd_inverse(&self.c_xi, "secondary")? + self.t.transpose() * &self.t / s2;
            let inner_inv = spd_inverse(&inner, "Woodbury core")?;
            woodbury -= &self.t * inner_inv * self.t.transpose() / (s2 * s2);
        }
        Ok((direct - woodbury).amax())
    }

    pub fn error_spectrum_report(&self) -> ErrorSpectrum {
        let d = self.s.nrows();
        let eig = SymmetricEigen::new(self.gamma_eps());
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let lead = order.first().map_or(0.0, |&j| eig.eigenvalues[j].max(0.0));
        let eigenvalues: Vec<f64> = order
            .iter()
            .map(|&j| eig.eigenvalues[j])
            .map(|l| if l <= EIG_TRUNCATION * lead { 0.0 } else { l })
            .collect();
        let variances = (0..d)
            .map(|i| {
                order
                    .iter()
                    .zip(&eigenvalues)
                    .map(|(&j, l)| (l + self.sigma2) * eig.eigenvectors[(i, j)].powi(2))
                    .sum()
            })
            .collect();
        ErrorSpectrum {
            eigenvalues,
            variances,
        }
    }

    /// Draw of `xi` from its prior.
    pub fn sample_xi<R: Rng + ?Sized>(&self, rng: &mut R) -> DVector<f64> {
        gaussian_sample(&self.c_xi, &self.xi_mean, rng)
    }

    /// Draw of `(m, xi, y)` from the full model.
    pub fn draw<R: Rng + ?Sized>(&self, rng: &mut R) -> (DVector<f64>, DVector<f64>, DVector<f64>) {
        let m = gaussian_sample(&self.c_pr, &self.m_pr, rng);
        let xi = self.sample_xi(rng);
        let d = self.s.nrows();
        let eta = DVector::from_vec(gaussian_vector(rng, d)) * self.sigma2.sqrt();
        let y = &self.s * &m + &self.t * &xi + eta;
        (m, xi, y)
    }
}

/// `mean + L z` with `L L^T = cov`.
pub fn gaussian_sample<R: Rng + ?Sized>(
    cov: &DMatrix<f64>,
    mean: &DVector<f64>,
    rng: &mut R,
) -> DVector<f64> {
    let n = mean.len();
    if n == 0 {
        return DVector::zeros(0);
    }
    let l = cov.clone().cholesky().expect("covariance is positive definite").l();
    mean + l * DVector::from_vec(gaussian_vector(rng, n))
}

/// Error draws `T (xi - xi_bar)` for [`crate::forward_bae::estimate_bae`].
pub struct LinearErrorSampler<'a>(pub &'a LinearModel);

impl ErrorSampler for LinearErrorSampler<'_> {
    fn n_obs(&self) -> usize {
        self.0.s.nrows()
    }

    fn error_sample(&self, seed: u64, index: u64) -> Result<Vec<f64>> {
        let xi = self.0.sample_xi(&mut stream(seed, "bae-xi", index));
        Ok((&self.0.t * (xi - &self.0.xi_bar)).as_slice().to_vec())
    }
}

/// The sandbox inverse problem under the total-error model, in the form
/// taken by the Gauss-Newton-CG kernel.
pub struct LinearInverse<'a> {
    model: &'a LinearModel,
    y: DVector<f64>,
    nu_inv: DMatrix<f64>,
    prior_inv: DMatrix<f64>,
    m_pr: Vec<f64>,
}

impl<'a> LinearInverse<'a> {
    pub fn new(model: &'a LinearModel, y: &DVector<f64>) -> Result<Self> {
        if y.len() != model.s.nrows() {
            return Err(invalid("data length does not match the model"));
        }
        Ok(Self {
            model,
            y: y - &model.t * &model.xi_bar - model.eps0(),
            nu_inv: spd_inverse(&model.gamma_nu(), "total error covariance")?,
            prior_inv: spd_inverse(&model.c_pr, "prior")?,
            m_pr: model.m_pr.as_slice().to_vec(),
        })
    }

    fn residual(&self, m: &[f64]) -> DVector<f64> {
        &self.y - &self.model.s * DVector::from_column_slice(m)
    }

    pub fn solve_map(&self, opts: &MapOptions) -> Result<DVector<f64>> {
        let out = crate::inversion::gauss_newton(self, None, opts)?;
        if !out.converged {
            return Err(Error::IterationLimit {
                solver: "gauss-newton",
                iterations: out.iterations,
                residual: out.final_gradient_norm,
            });
        }
        Ok(DVector::from_vec(out.state))
    }
}

impl GaussNewtonProblem for LinearInverse<'_> {
    type State = Vec<f64>;

    fn dim(&self) -> usize {
        self.m_pr.len()
    }

    fn n_act(&self) -> usize {
        self.model.s.nrows()
    }

    fn prior_mean(&self) -> &[f64] {
        &self.m_pr
    }

    fn point<'s>(&self, st: &'s Vec<f64>) -> &'s [f64] {
        st
    }

    fn linearize(&self, m: &[f64]) -> Result<Vec<f64>> {
        Ok(m.to_vec())
    }

    fn cost_at(&self, m: &Vec<f64>) -> (f64, f64) {
        let r = self.residual(m);
        let d = DVector::from_column_slice(m) - &self.model.m_pr;
        (
            0.5 * r.dot(&(&self.nu_inv * &r)),
            0.5 * d.dot(&(&self.prior_inv * &d)),
        )
    }

    fn gradient_at(&self, m: &Vec<f64>) -> Vec<f64> {
        let r = self.residual(m);
        let d = DVector::from_column_slice(m) - &self.model.m_pr;
        let g = &self.prior_inv * d - self.model.s.transpose() * (&self.nu_inv * r);
        g.as_slice().to_vec()
    }

    fn hessian_apply(&self, _: &Vec<f64>, dm: &[f64]) -> Vec<f64> {
        let s = &self.model.s;
        let h = s.transpose() * (&self.nu_inv * (s * DVector::from_column_slice(dm)));
        h.as_slice().to_vec()
    }

    fn prior_precision(&self, x: &[f64]) -> Vec<f64> {
        (&self.prior_inv * DVector::from_column_slice(x)).as_slice().to_vec()
    }

    fn prior_cov(&self, g: &[f64]) -> Vec<f64> {
        (&self.model.c_pr * DVector::from_column_slice(g)).as_slice().to_vec()
    }
}

/// `tr(C K)` and `tr(C^{1/2} K C^{1/2})`.
pub fn trace_pair(c: &DMatrix<f64>, k: &DMatrix<f64>) -> (f64, f64) {
    let half = sqrt_spd(c);
    ((c * k).trace(), (&half * k * &half).trace())
}

/// Individual terms `z_j^T K z_j` with `z_j ~ N(0, C)`.
pub fn quadratic_form_samples<R: Rng + ?Sized>(
    c: &DMatrix<f64>,
    k: &DMatrix<f64>,
    n: usize,
    rng: &mut R,
) -> Vec<f64> {
    let zero = DVector::zeros(c.nrows());
    (0..n)
        .map(|_| {
            let z = gaussian_sample(c, &zero, rng);
            z.dot(&(k * &z))
        })
        .collect()
}

/// `tr(C (I + A)^{-1})` directly and by `tr(C) - sum_k l_k/(1+l_k) v_k^T C v_k`
/// over the eigenpairs of `A`.
pub fn lowrank_trace_pair(c: &DMatrix<f64>, a: &DMatrix<f64>) -> Result<(f64, f64)> {
    let n = c.nrows();
    let ia = DMatrix::identity(n, n) + a;
    let direct = (c * ia.try_inverse().ok_or_else(|| Error::Factorization("I + A singular".into()))?)
        .trace();
    let eig = SymmetricEigen::new((a + a.transpose()) * 0.5);
    let update: f64 = (0..n)
        .map(|k| {
            let l = eig.eigenvalues[k];
            let v = eig.eigenvectors.column(k);
            l / (1.0 + l) * v.dot(&(c * v))
        })
        .sum();
    Ok((direct, c.trace() - update))
}
