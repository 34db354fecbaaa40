//! OED objectives and the greedy sensor-selection loop.

use log::{info, warn};
use rand::seq::index::sample as index_sample;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::forward_bae::{ErrorModel, ForwardModel, TrainingSet};
use crate::inversion::{
    posterior_lowrank, Design, InverseProblem, MapOptions, MapResult, RestrictedLikelihood,
};
use crate::mesh_fem::Field;
use crate::numkit::{cg_iterate, stream, CgNorm, CgOptions, FnOperator, INNER_RTOL};
use crate::prior::GaussianFieldPrior;

/// Stream label of the trace-estimator probes.
pub const PROBE_STREAM: &str = "trace-probe";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    Eig,
    Trace,
}

impl std::str::FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "eig" => Ok(Self::Eig),
            "trace" => Ok(Self::Trace),
            other => Err(invalid(format!("unknown objective {other:?} (eig or trace)"))),
        }
    }
}

impl std::fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            ObjectiveKind::Eig => "eig",
            ObjectiveKind::Trace => "trace",
        })
    }
}

/// Rank of the low-rank posterior used by the eigenvalue objective.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RankPolicy {
    /// `r = n_act`
    Active,
    Fixed(usize),
}

impl RankPolicy {
    pub fn rank(self, n_act: usize) -> usize {
        match self {
            RankPolicy::Active => n_act,
            RankPolicy::Fixed(r) => r,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OedSettings {
    pub kind: ObjectiveKind,
    pub r_policy: RankPolicy,
    pub n_tr: usize,
    pub probe_seed: u64,
    /// Start each MAP solve of a greedy step at the previous step's MAP.
    pub warm_start: bool,
    pub map: MapOptions,
}

impl Default for OedSettings {
    fn default() -> Self {
        Self {
            kind: ObjectiveKind::Eig,
            r_policy: RankPolicy::Active,
            n_tr: 30,
            probe_seed: 0,
            warm_start: true,
            map: MapOptions::default(),
        }
    }
}

/// One objective evaluation and the MAP points behind it.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub value: f64,
    pub maps: Vec<Field>,
}

/// The Monte Carlo OED objective over a training set.
pub struct OedObjective<'a> {
    model: &'a ForwardModel,
    prior: &'a GaussianFieldPrior,
    error_model: &'a ErrorModel,
    training: &'a TrainingSet,
    settings: OedSettings,
    probes: Vec<Vec<f64>>,
}

impl<'a> OedObjective<'a> {
    pub fn new(
        model: &'a ForwardModel,
        prior: &'a GaussianFieldPrior,
        error_model: &'a ErrorModel,
        training: &'a TrainingSet,
        settings: OedSettings,
    ) -> Result<Self> {
        if training.is_empty() {
            return Err(invalid("objective needs at least one training sample"));
        }
        if error_model.n_s() != model.n_obs() {
            return Err(invalid("error model and forward model disagree on n_s"));
        }
        if settings.kind == ObjectiveKind::Trace && settings.n_tr == 0 {
            return Err(invalid("trace objective needs n_tr >= 1"));
        }
        let probes = match settings.kind {
            ObjectiveKind::Eig => Vec::new(),
            ObjectiveKind::Trace => draw_probes(prior, settings.n_tr, settings.probe_seed),
        };
        Ok(Self {
            model,
            prior,
            error_model,
            training,
            settings,
            probes,
        })
    }

    pub fn settings(&self) -> &OedSettings {
        &self.settings
    }

    pub fn n_s(&self) -> usize {
        self.model.n_obs()
    }

    pub fn n_d(&self) -> usize {
        self.training.len()
    }

    /// The trace-estimator probes `z_j ~ N(0, Gamma)`, shared by all designs.
    pub fn probes(&self) -> &[Vec<f64>] {
        &self.probes
    }

    pub fn evaluate(&self, design: &Design, warm: Option<&[Field]>) -> Result<Evaluation> {
        let rl = RestrictedLikelihood::restrict(self.error_model, design)?;
        let mut total = 0.0;
        let mut maps = Vec::with_capacity(self.n_d());
        for (i, s) in self.training.samples.iter().enumerate() {
            let problem = InverseProblem::new(self.model, self.prior, &rl, &s.y)?;
            let init = if self.settings.warm_start {
                warm.and_then(|w| w.get(i))
            } else {
                None
            };
            let map = problem.solve_map(init, &self.settings.map)?;
            if !map.converged {
                return Err(Error::IterationLimit {
                    solver: "gauss-newton",
                    iterations: map.iterations,
                    residual: map.final_gradient_norm / map.initial_gradient_norm,
                });
            }
            total += match self.settings.kind {
                ObjectiveKind::Eig => {
                    let r = self.settings.r_policy.rank(design.n_act()).max(1);
                    -posterior_lowrank(&problem, &map, r)?.trace_reduction(self.prior)
                }
                ObjectiveKind::Trace => self.trace_estimate(&problem, &map)?,
            };
            maps.push(map.m_map);
        }
        Ok(Evaluation {
            value: total / self.n_d() as f64,
            maps,
        })
    }

    /// `(1/n_tr) sum_j <c_j, z_j>_M` with `(H + W) c_j = W z_j`.
    fn trace_estimate(&self, problem: &InverseProblem, map: &MapResult) -> Result<f64> {
        let n = self.prior.dim();
        let op = FnOperator::new(n, |x: &[f64]| problem.hessian_apply_with_prior(&map.state, x));
        let pre = FnOperator::new(n, |x: &[f64]| self.prior.cov_coeff(x));
        let opts = CgOptions {
            rtol: INNER_RTOL,
            maxiter: 2 * problem.likelihood().n_act() + 20,
            norm: CgNorm::Preconditioned,
        };
        let mut sum = 0.0;
        for z in &self.probes {
            let sol = cg_iterate(&op, Some(&pre), &self.prior.precision_dual(z), &opts);
            if !sol.converged {
                return Err(Error::IterationLimit {
                    solver: "trace cg",
                    iterations: sol.iterations,
                    residual: sol.relative_residual,
                });
            }
            sum += self.prior.mass_inner(&sol.x, z);
        }
        Ok(sum / self.probes.len() as f64)
    }

    pub fn value(&self, design: &Design) -> Result<f64> {
        Ok(self.evaluate(design, None)?.value)
    }
}

/// A design objective the greedy loop can minimize.
pub trait DesignObjective: Sync {
    fn n_s(&self) -> usize;

    /// Value at `design`, optionally warm-started from the MAP points of the
    /// previous greedy step.
    fn evaluate(&self, design: &Design, warm: Option<&[Field]>) -> Result<Evaluation>;
}

impl DesignObjective for OedObjective<'_> {
    fn n_s(&self) -> usize {
        OedObjective::n_s(self)
    }

    fn evaluate(&self, design: &Design, warm: Option<&[Field]>) -> Result<Evaluation> {
        OedObjective::evaluate(self, design, warm)
    }
}

/// Zero-mean prior draws from the probe stream.
pub fn draw_probes(prior: &GaussianFieldPrior, n_tr: usize, seed: u64) -> Vec<Vec<f64>> {
    (0..n_tr as u64)
        .map(|j| {
            let s = prior.sample(&mut stream(seed, PROBE_STREAM, j));
            s.values().iter().zip(prior.mean().values()).map(|(a, b)| a - b).collect()
        })
        .collect()
}

/// `phi_eig(w)`; see [`OedObjective::value`].
pub fn phi_eig(objective: &OedObjective, design: &Design) -> Result<f64> {
    if objective.settings.kind != ObjectiveKind::Eig {
        return Err(invalid("phi_eig called on a trace objective"));
    }
    objective.value(design)
}

pub fn phi_trace(objective: &OedObjective, design: &Design) -> Result<f64> {
    if objective.settings.kind != ObjectiveKind::Trace {
        return Err(invalid("phi_trace called on an eigenvalue objective"));
    }
    objective.value(design)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GreedyTrace {
    pub picks: Vec<usize>,
    pub objective_values: Vec<f64>,
    pub evaluations: usize,
    /// Candidate evaluations skipped because a solve failed.
    pub invalid_evaluations: usize,
}

impl GreedyTrace {
    pub fn design(&self, n_s: usize) -> Result<Design> {
        Design::from_active(n_s, &self.picks)
    }
}

/// Greedy selection of `k` sensors, one per step, each minimizing the
/// objective over the remaining candidates. Ties go to the lowest index.
pub fn greedy(objective: &dyn DesignObjective, k: usize) -> Result<GreedyTrace> {
    let n_s = objective.n_s();
    if k < 1 || k > n_s {
        return Err(invalid(format!("greedy needs 1 <= K <= {n_s}, got {k}")));
    }
    let mut design = Design::empty(n_s);
    let mut warm: Option<Vec<Field>> = None;
    let mut trace = GreedyTrace {
        picks: Vec::with_capacity(k),
        objective_values: Vec::with_capacity(k),
        evaluations: 0,
        invalid_evaluations: 0,
    };
    for step in 0..k {
        let candidates: Vec<usize> = (0..n_s).filter(|&j| !design.contains(j)).collect();
        let results: Vec<(usize, Result<Evaluation>)> = candidates
            .par_iter()
            .map(|&j| (j, design.with(j).and_then(|d| objective.evaluate(&d, warm.as_deref()))))
            .collect();
        trace.evaluations += candidates.len();
        let mut best: Option<(usize, Evaluation)> = None;
        for (j, res) in results {
            match res {
                Ok(ev) => {
                    if best.as_ref().is_none_or(|(_, b)| ev.value < b.value) {
                        best = Some((j, ev));
                    }
                }
                Err(e) => {
                    trace.invalid_evaluations += 1;
                    warn!("greedy step {step}: candidate {j} skipped: {e}");
                }
            }
        }
        let (j, ev) = best.ok_or(Error::NoValidCandidate { step })?;
        info!("greedy step {step}: sensor {j}, objective {:.8e}", ev.value);
        design = design.with(j)?;
        trace.picks.push(j);
        trace.objective_values.push(ev.value);
        warm = Some(ev.maps);
    }
    Ok(trace)
}

/// `eps0 = 0`, `Gamma_eps = 0`: noise only.
pub fn unaware_error_model(n_s: usize, sigma: f64) -> Result<ErrorModel> {
    ErrorModel::unaware(n_s, sigma)
}

/// Uniform `k`-subset of the `n_s` sensors.
pub fn random_design<R: Rng + ?Sized>(k: usize, n_s: usize, rng: &mut R) -> Result<Design> {
    if k > n_s {
        return Err(invalid(format!("cannot pick {k} of {n_s} sensors")));
    }
    let idx = index_sample(rng, n_s, k).into_vec();
    Design::from_active(n_s, &idx)
}
