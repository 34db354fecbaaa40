//! Design-quality diagnostics on held-out validation draws: expected
//! posterior variance and expected relative MAP error.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::InversionMode;
use crate::error::{invalid, Result};
use crate::forward_bae::{ErrorModel, TrainingSample, TrainingSet};
use crate::inversion::{
    posterior_lowrank, Design, InverseProblem, MapOptions, RestrictedLikelihood,
};
use crate::numkit::{stream, sub};
use crate::oed::{greedy, OedObjective, OedSettings};
use crate::problem::Problem;

/// Reports with a larger share of failed MAP solves are flagged untrusted.
pub const MAX_FAILURE_FRACTION: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRow {
    pub index: u64,
    /// Posterior trace; NaN for a failed solve.
    pub trace: f64,
    pub rel_error: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub design: Vec<usize>,
    pub v_bar: f64,
    pub e_map_bar: f64,
    /// Standard error of `v_bar`.
    pub v_se: f64,
    pub e_map_se: f64,
    pub n_v: usize,
    pub n_failed: usize,
    pub trusted: bool,
    pub inversion_mode: InversionMode,
    pub per_sample: Vec<SampleRow>,
}

impl ValidationReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("index,trace,rel_error,converged\n");
        for r in &self.per_sample {
            let _ = writeln!(out, "{},{:.16e},{:.16e},{}", r.index, r.trace, r.rel_error, r.converged);
        }
        out
    }

    /// Summary without the per-sample rows.
    pub fn summary_json(&self) -> Result<String> {
        let mut s = self.clone();
        s.per_sample.clear();
        serde_json::to_string_pretty(&s).map_err(|e| crate::Error::Parse(e.to_string()))
    }

    pub fn write(&self, dir: &Path, stem: &str) -> Result<()> {
        fs::create_dir_all(dir)?;
        fs::write(dir.join(format!("{stem}.csv")), self.to_csv())?;
        fs::write(dir.join(format!("{stem}.json")), self.summary_json()?)?;
        Ok(())
    }
}

/// Relative mass-norm distance `||a - b||_M / ||b||_M`.
fn relative_error(problem: &Problem, estimate: &[f64], truth: &[f64]) -> f64 {
    let p = &problem.m_prior;
    let d = sub(estimate, truth);
    (p.mass_inner(&d, &d) / p.mass_inner(truth, truth)).sqrt()
}

/// MAP and posterior trace for one validation draw.
pub fn validate_sample(
    problem: &Problem,
    rl: &RestrictedLikelihood,
    sample: &TrainingSample,
    opts: &MapOptions,
) -> Result<SampleRow> {
    let inv = InverseProblem::new(&problem.model, &problem.m_prior, rl, &sample.y)?;
    let map = inv.solve_map(None, opts)?;
    let n_act = rl.n_act();
    let trace = if n_act == 0 {
        problem.m_prior.trace()
    } else {
        posterior_lowrank(&inv, &map, n_act)?.posterior_trace(&problem.m_prior)
    };
    Ok(SampleRow {
        index: sample.index,
        trace,
        rel_error: relative_error(problem, map.m_map.values(), sample.m.values()),
        converged: map.converged,
    })
}

fn mean_and_se(v: &[f64]) -> (f64, f64) {
    let n = v.len() as f64;
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let mean = v.iter().sum::<f64>() / n;
    if v.len() < 2 {
        return (mean, f64::NAN);
    }
    let var = v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs the diagnostics of `design` on every validation draw, inverting with
/// `error_model`.
pub fn validate(
    problem: &Problem,
    design: &Design,
    error_model: &ErrorModel,
    mode: InversionMode,
    validation: &TrainingSet,
    opts: &MapOptions,
) -> Result<ValidationReport> {
    if validation.is_empty() {
        return Err(invalid("validation needs n_v >= 1"));
    }
    let rl = RestrictedLikelihood::restrict(error_model, design)?;
    let per_sample: Vec<SampleRow> = validation
        .samples
        .par_iter()
        .map(|s| match validate_sample(problem, &rl, s, opts) {
            Ok(row) => row,
            Err(e) => {
                warn!("validation sample {} failed: {e}", s.index);
                SampleRow {
                    index: s.index,
                    trace: f64::NAN,
                    rel_error: f64::NAN,
                    converged: false,
                }
            }
        })
        .collect();
    let ok: Vec<&SampleRow> = per_sample.iter().filter(|r| r.converged).collect();
    let n_failed = per_sample.len() - ok.len();
    let (v_bar, v_se) = mean_and_se(&ok.iter().map(|r| r.trace).collect::<Vec<_>>());
    let (e_map_bar, e_map_se) = mean_and_se(&ok.iter().map(|r| r.rel_error).collect::<Vec<_>>());
    Ok(ValidationReport {
        design: design.active().to_vec(),
        v_bar,
        e_map_bar,
        v_se,
        e_map_se,
        n_v: per_sample.len(),
        n_failed,
        trusted: (n_failed as f64) <= MAX_FAILURE_FRACTION * per_sample.len() as f64,
        inversion_mode: mode,
        per_sample,
    })
}

/// One point of the design-quality cloud.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CloudPoint {
    pub design_kind: String,
    pub k: usize,
    pub v_bar: f64,
    pub e_map_bar: f64,
}

pub fn cloud_csv(points: &[CloudPoint]) -> String {
    let mut out = String::from("design_kind,K,V_bar,E_map_bar\n");
    for p in points {
        let _ = writeln!(out, "{},{},{:.16e},{:.16e}", p.design_kind, p.k, p.v_bar, p.e_map_bar);
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NdRow {
    pub n_d: usize,
    pub picks: Vec<usize>,
    pub v_bar: f64,
    pub v_se: f64,
    pub e_map_bar: f64,
}

pub fn nd_table_csv(rows: &[NdRow]) -> String {
    let mut out = String::from("n_d,V_bar,V_se,E_map_bar,picks\n");
    for r in rows {
        let picks: Vec<String> = r.picks.iter().map(|p| p.to_string()).collect();
        let _ = writeln!(
            out,
            "{},{:.16e},{:.16e},{:.16e},{}",
            r.n_d,
            r.v_bar,
            r.v_se,
            r.e_map_bar,
            picks.join(" ")
        );
    }
    out
}

/// Seed of the training set used for `n_d` in a sweep.
pub fn nd_training_seed(seed: u64, n_d: usize) -> u64 {
    use rand::RngCore;
    stream(seed, "nd-study", n_d as u64).next_u64()
}

/// For each `n_d`, a greedy `k`-sensor design from a fresh training set,
/// validated on the common validation set.
pub fn nd_study(
    problem: &Problem,
    error_model: &ErrorModel,
    settings: &OedSettings,
    nd_values: &[usize],
    k: usize,
    seed: u64,
    validation: &TrainingSet,
) -> Result<Vec<NdRow>> {
    if nd_values.is_empty() {
        return Err(invalid("nd_study needs at least one n_d value"));
    }
    let mut rows = Vec::with_capacity(nd_values.len());
    for &n_d in nd_values {
        let training = problem.training_set(n_d, nd_training_seed(seed, n_d), false)?;
        let objective =
            OedObjective::new(&problem.model, &problem.m_prior, error_model, &training, *settings)?;
        let trace = greedy(&objective, k)?;
        let design = trace.design(problem.n_s())?;
        let report = validate(
            problem,
            &design,
            error_model,
            InversionMode::Aware,
            validation,
            &settings.map,
        )?;
        rows.push(NdRow {
            n_d,
            picks: trace.picks,
            v_bar: report.v_bar,
            v_se: report.v_se,
            e_map_bar: report.e_map_bar,
        });
    }
    Ok(rows)
}
