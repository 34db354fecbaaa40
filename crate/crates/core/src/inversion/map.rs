//! Cost, adjoint gradient, Gauss-Newton Hessian action and the inexact
//! Gauss-Newton-CG solver for the MAP point.
//!
//! Gradients and Hessian actions are dual vectors on the bottom surface: for
//! a direction `dm` the derivative of the cost is `g^T dm`. The prior term in
//! that form is `W (m - m_pr)` with `W = A M^{-1} A`.

use log::debug;

use super::likelihood::RestrictedLikelihood;
use crate::error::{invalid, Result};
use crate::forward_bae::{ForwardModel, LinearizedState, ADJOINT_TAG, INC_ADJOINT_TAG};
use crate::mesh_fem::{Field, Support};
use crate::numkit::{axpy, cg_iterate, dot, sub, CgNorm, CgOptions, FnOperator};
use crate::prior::GaussianFieldPrior;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapOptions {
    pub rtol: f64,
    pub atol: f64,
    pub max_iter: usize,
    pub armijo_c: f64,
    pub backtrack: f64,
    pub max_backtracks: usize,
    /// Inner CG is capped at `n_act + cg_extra` iterations.
    pub cg_extra: usize,
}

impl Default for MapOptions {
    fn default() -> Self {
        Self {
            rtol: 1e-6,
            atol: 1e-9,
            max_iter: 100,
            armijo_c: 1e-4,
            backtrack: 0.5,
            max_backtracks: 25,
            cg_extra: 10,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MapResult {
    pub m_map: Field,
    pub iterations: usize,
    /// Gradient norm at the prior mean, the reference for the relative test.
    pub initial_gradient_norm: f64,
    pub final_gradient_norm: f64,
    /// `(misfit, prior)`
    pub cost_terms: (f64, f64),
    pub converged: bool,
    pub cg_iterations: usize,
    /// Linearization at `m_map`.
    pub state: LinearizedState,
}

/// The design-restricted inverse problem for one data vector.
pub struct InverseProblem<'a> {
    model: &'a ForwardModel,
    prior: &'a GaussianFieldPrior,
    likelihood: &'a RestrictedLikelihood,
    y: &'a [f64],
}

impl<'a> InverseProblem<'a> {
    pub fn new(
        model: &'a ForwardModel,
        prior: &'a GaussianFieldPrior,
        likelihood: &'a RestrictedLikelihood,
        y: &'a [f64],
    ) -> Result<Self> {
        if y.len() != model.n_obs() || likelihood.design().n_s() != model.n_obs() {
            return Err(invalid(format!(
                "data of length {} and design over {} sensors for a model with {}",
                y.len(),
                likelihood.design().n_s(),
                model.n_obs()
            )));
        }
        if prior.support() != Support::Bottom || prior.dim() != model.reduced().n_surface() {
            return Err(invalid("prior does not live on the bottom surface"));
        }
        Ok(Self {
            model,
            prior,
            likelihood,
            y,
        })
    }

    pub fn model(&self) -> &ForwardModel {
        self.model
    }

    pub fn prior(&self) -> &GaussianFieldPrior {
        self.prior
    }

    pub fn likelihood(&self) -> &RestrictedLikelihood {
        self.likelihood
    }

    fn check(&self, m: &Field) -> Result<()> {
        m.check(self.model.mesh(), Support::Bottom)
    }

    pub fn linearize(&self, m: &[f64]) -> Result<LinearizedState> {
        self.model.linearize(m)
    }

    /// `(misfit, prior)` at a linearization.
    pub fn cost_at(&self, st: &LinearizedState) -> (f64, f64) {
        let misfit = self.likelihood.misfit(self.y, &st.obs);
        let d = sub(&st.m, self.prior.mean().values());
        (misfit, 0.5 * self.prior.cm_inner_values(&d, &d))
    }

    pub fn cost(&self, m: &Field) -> Result<(f64, f64)> {
        self.check(m)?;
        Ok(self.cost_at(&self.linearize(m.values())?))
    }

    /// Gradient as a dual vector, one adjoint solve.
    pub fn gradient_at(&self, st: &LinearizedState) -> Vec<f64> {
        let d = sub(&st.m, self.prior.mean().values());
        let mut g = self.prior.precision_dual(&d);
        if self.likelihood.n_act() > 0 {
            let r = self.likelihood.residual(self.y, &st.obs);
            let v = self.likelihood.expand(&self.likelihood.whiten(&r));
            let jt = self.model.reduced().jacobian_transpose(st, &v, ADJOINT_TAG);
            axpy(-1.0, &jt, &mut g);
        }
        g
    }

    pub fn gradient(&self, m: &Field) -> Result<Field> {
        self.check(m)?;
        let st = self.linearize(m.values())?;
        Ok(Field::from_values(Support::Bottom, self.gradient_at(&st)))
    }

    /// Data-misfit Gauss-Newton Hessian `J_w^T Gamma_w^{-1} J_w dm`: one
    /// incremental state and one incremental adjoint solve.
    pub fn hessian_apply(&self, st: &LinearizedState, dm: &[f64]) -> Vec<f64> {
        if self.likelihood.n_act() == 0 {
            return vec![0.0; dm.len()];
        }
        let reduced = self.model.reduced();
        let jd = self.likelihood.select(&reduced.jacobian_apply(st, dm));
        let v = self.likelihood.expand(&self.likelihood.whiten(&jd));
        reduced.jacobian_transpose(st, &v, INC_ADJOINT_TAG)
    }

    /// Hessian of the Gauss-Newton model including the prior precision.
    pub fn hessian_apply_with_prior(&self, st: &LinearizedState, dm: &[f64]) -> Vec<f64> {
        let mut h = self.hessian_apply(st, dm);
        axpy(1.0, &self.prior.precision_dual(dm), &mut h);
        h
    }

    /// Inexact Gauss-Newton-CG from `init` (the prior mean when `None`).
    pub fn solve_map(&self, init: Option<&Field>, opts: &MapOptions) -> Result<MapResult> {
        if let Some(f) = init {
            self.check(f)?;
        }
        let out = gauss_newton(self, init.map(Field::values), opts)?;
        Ok(MapResult {
            m_map: Field::from_values(Support::Bottom, out.state.m.clone()),
            iterations: out.iterations,
            initial_gradient_norm: out.initial_gradient_norm,
            final_gradient_norm: out.final_gradient_norm,
            cost_terms: out.cost_terms,
            converged: out.converged,
            cg_iterations: out.cg_iterations,
            state: out.state,
        })
    }
}

impl GaussNewtonProblem for InverseProblem<'_> {
    type State = LinearizedState;

    fn dim(&self) -> usize {
        self.prior.dim()
    }

    fn n_act(&self) -> usize {
        self.likelihood.n_act()
    }

    fn prior_mean(&self) -> &[f64] {
        self.prior.mean().values()
    }

    fn point<'s>(&self, st: &'s LinearizedState) -> &'s [f64] {
        &st.m
    }

    fn linearize(&self, m: &[f64]) -> Result<LinearizedState> {
        self.model.linearize(m)
    }

    fn cost_at(&self, st: &LinearizedState) -> (f64, f64) {
        InverseProblem::cost_at(self, st)
    }

    fn gradient_at(&self, st: &LinearizedState) -> Vec<f64> {
        InverseProblem::gradient_at(self, st)
    }

    fn hessian_apply(&self, st: &LinearizedState, dm: &[f64]) -> Vec<f64> {
        InverseProblem::hessian_apply(self, st, dm)
    }

    fn prior_precision(&self, x: &[f64]) -> Vec<f64> {
        self.prior.precision_dual(x)
    }

    fn prior_cov(&self, g: &[f64]) -> Vec<f64> {
        self.prior.cov_coeff(g)
    }
}

/// What the Gauss-Newton-CG kernel needs from a problem with a Gaussian
/// prior: linearizations, the split cost, the gradient and the data-misfit
/// Gauss-Newton Hessian as dual vectors, and the prior precision and
/// covariance.
pub trait GaussNewtonProblem: Sync {
    type State: Sync;

    fn dim(&self) -> usize;
    /// Number of observations; bounds the inner CG iterations.
    fn n_act(&self) -> usize;
    fn prior_mean(&self) -> &[f64];
    fn point<'s>(&self, st: &'s Self::State) -> &'s [f64];
    fn linearize(&self, m: &[f64]) -> Result<Self::State>;
    /// `(misfit, prior)`
    fn cost_at(&self, st: &Self::State) -> (f64, f64);
    fn gradient_at(&self, st: &Self::State) -> Vec<f64>;
    fn hessian_apply(&self, st: &Self::State, dm: &[f64]) -> Vec<f64>;
    fn prior_precision(&self, x: &[f64]) -> Vec<f64>;
    fn prior_cov(&self, g: &[f64]) -> Vec<f64>;

    /// `sqrt(g^T C g)`
    fn gradient_norm(&self, g: &[f64]) -> f64 {
        dot(g, &self.prior_cov(g)).max(0.0).sqrt()
    }
}

#[derive(Debug, Clone)]
pub struct GnOutcome<S> {
    pub state: S,
    pub iterations: usize,
    pub initial_gradient_norm: f64,
    pub final_gradient_norm: f64,
    pub cost_terms: (f64, f64),
    pub converged: bool,
    pub cg_iterations: usize,
}

/// Inexact Gauss-Newton-CG with Armijo backtracking.
///
/// The relative stopping test uses the gradient norm at the prior mean, so a
/// warm start does not tighten it.
pub fn gauss_newton<P: GaussNewtonProblem>(
    p: &P,
    init: Option<&[f64]>,
    opts: &MapOptions,
) -> Result<GnOutcome<P::State>> {
    let mean = p.prior_mean();
    let start = init.unwrap_or(mean);
    if start.len() != p.dim() {
        return Err(invalid("initial point has the wrong length"));
    }
    let mut st = p.linearize(start)?;
    let mut g = p.gradient_at(&st);
    let mut g_norm = p.gradient_norm(&g);
    let g_ref = if start == mean {
        g_norm
    } else {
        p.gradient_norm(&p.gradient_at(&p.linearize(mean)?))
    };
    let tol = opts.atol.max(opts.rtol * g_ref);
    let mut cost = p.cost_at(&st);
    let n = p.dim();
    let mut iterations = 0;
    let mut cg_total = 0;
    let mut converged = g_norm <= tol;

    while !converged && iterations < opts.max_iter {
        let forcing = 0.5f64.min((g_norm / g_ref.max(f64::MIN_POSITIVE)).sqrt());
        let op = FnOperator::new(n, |x: &[f64]| {
            let mut h = p.hessian_apply(&st, x);
            axpy(1.0, &p.prior_precision(x), &mut h);
            h
        });
        let pre = FnOperator::new(n, |x: &[f64]| p.prior_cov(x));
        let rhs: Vec<f64> = g.iter().map(|v| -v).collect();
        let sol = cg_iterate(
            &op,
            Some(&pre),
            &rhs,
            &CgOptions {
                rtol: forcing,
                maxiter: p.n_act() + opts.cg_extra,
                norm: CgNorm::Preconditioned,
            },
        );
        cg_total += sol.iterations;
        let mut dir = sol.x;
        let mut slope = dot(&g, &dir);
        if !(slope < 0.0) {
            dir = p.prior_cov(&rhs);
            slope = dot(&g, &dir);
        }

        let total = cost.0 + cost.1;
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..=opts.max_backtracks {
            let mut trial = p.point(&st).to_vec();
            axpy(step, &dir, &mut trial);
            if let Ok(ts) = p.linearize(&trial) {
                let c = p.cost_at(&ts);
                if c.0 + c.1 <= total + opts.armijo_c * step * slope {
                    accepted = Some((ts, c));
                    break;
                }
            }
            step *= opts.backtrack;
        }
        let Some((ts, c)) = accepted else {
            debug!("line search failed after {} backtracks", opts.max_backtracks);
            break;
        };
        iterations += 1;
        st = ts;
        cost = c;
        g = p.gradient_at(&st);
        g_norm = p.gradient_norm(&g);
        converged = g_norm <= tol;
        debug!(
            "gn {iterations}: cost {:.6e} |g| {g_norm:.3e} step {step} cg {}",
            cost.0 + cost.1,
            sol.iterations
        );
    }

    Ok(GnOutcome {
        state: st,
        iterations,
        initial_gradient_norm: g_ref,
        final_gradient_norm: g_norm,
        cost_terms: cost,
        converged,
        cg_iterations: cg_total,
    })
}
