//! Command-line driver for the sensor-placement pipeline.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use bae_oed::config::{InversionMode, RunConfig};
use bae_oed::forward_bae::ErrorModel;
use bae_oed::inversion::{posterior_lowrank, Design, InverseProblem, MapOptions, RestrictedLikelihood};
use bae_oed::linear_sandbox::{lowrank_trace_pair, random_matrix, random_spd, trace_pair, LinearModel};
use bae_oed::mesh_fem::io::{read_field_csv, write_field_csv};
use bae_oed::mesh_fem::{Field, Support};
use bae_oed::numkit::{stream, sub};
use bae_oed::oed::{greedy, random_design, ObjectiveKind, OedObjective, OedSettings, RankPolicy};
use bae_oed::problem::Problem;
use bae_oed::validation::{cloud_csv, nd_study, nd_table_csv, validate, CloudPoint};
use bae_oed::{Error, Result};
use clap::{Args, Parser, Subcommand};
use log::info;
use rand::Rng;
use serde_json::json;

#[derive(Parser)]
#[command(name = "bae-oed", version, about = "Sensor placement under model uncertainty")]
struct Cli {
    #[command(flatten)]
    common: Common,

    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// TOML run configuration; defaults apply to missing keys.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Overrides the seed of the command's main random step.
    #[arg(long, global = true)]
    seed: Option<u64>,

    /// Worker threads (default: available parallelism).
    #[arg(long, global = true)]
    workers: Option<usize>,

    /// Use the noise-only error model.
    #[arg(long, global = true)]
    unaware: bool,

    #[arg(long, global = true, value_parser = ["eig", "trace"])]
    objective: Option<String>,

    /// Output directory (overrides `out_dir`).
    #[arg(long, global = true)]
    out: Option<PathBuf>,

    /// Directory holding the error model (default: `<out>/bae`).
    #[arg(long, global = true)]
    bae_dir: Option<PathBuf>,

    /// Estimate the error model in-process instead of reading it.
    #[arg(long, global = true)]
    inline_bae: bool,
}

#[derive(Subcommand)]
enum Command {
    /// Estimate the approximation-error statistics.
    Bae,
    /// Greedy sensor selection.
    Oed,
    /// MAP point and low-rank posterior for one design and data vector.
    Invert {
        #[arg(long)]
        design: PathBuf,
        /// Data vector, one value per line. Without it a synthetic draw is
        /// generated and written next to the results.
        #[arg(long)]
        data: Option<PathBuf>,
        /// Parameter field used to report the relative MAP error.
        #[arg(long)]
        truth: Option<PathBuf>,
    },
    /// Validation reports for designs plus random designs of equal size.
    Validate {
        #[arg(long = "design", required = true)]
        designs: Vec<PathBuf>,
        /// Number of random designs (default: `validation.n_random`).
        #[arg(long)]
        random: Option<usize>,
    },
    /// Optimal-design quality against the training-set size.
    NdStudy,
    /// Dense identity checks on random linear models.
    SandboxCheck {
        #[arg(long, default_value_t = 20)]
        instances: u64,
    },
}

struct Ctx {
    cfg: RunConfig,
    common: Common,
    out: PathBuf,
}

impl Ctx {
    fn mode(&self) -> InversionMode {
        if self.common.unaware {
            InversionMode::Unaware
        } else {
            self.cfg.validation.inversion_mode
        }
    }

    fn error_model(&self, p: &Problem) -> Result<ErrorModel> {
        if self.mode() == InversionMode::Unaware {
            return p.unaware_error_model();
        }
        if self.common.inline_bae {
            return p.estimate_bae(self.cfg.bae.n_mc, self.cfg.bae.seed);
        }
        let dir = self.common.bae_dir.clone().unwrap_or_else(|| self.out.join("bae"));
        let expected = dir.join("eps0.csv");
        if !expected.exists() {
            return Err(Error::Config(format!(
                "error model not found: expected {} (run `bae` first or pass --inline-bae)",
                expected.display()
            )));
        }
        let em = ErrorModel::read_dir(&dir)?;
        if em.n_s() != p.n_s() {
            return Err(Error::Config(format!(
                "error model in {} has {} sensors, configuration has {}",
                dir.display(),
                em.n_s(),
                p.n_s()
            )));
        }
        Ok(em)
    }

    fn settings(&self) -> OedSettings {
        OedSettings {
            kind: self.cfg.oed.objective,
            r_policy: self.cfg.oed.rank.map_or(RankPolicy::Active, RankPolicy::Fixed),
            n_tr: self.cfg.oed.n_tr,
            probe_seed: self.cfg.oed.seed,
            warm_start: self.cfg.oed.warm_start,
            map: MapOptions::default(),
        }
    }

    fn subdir(&self, name: &str) -> Result<PathBuf> {
        let dir = self.out.join(name);
        fs::create_dir_all(&dir)?;
        Ok(dir)
    }
}

fn write_json(path: &Path, value: &serde_json::Value) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    fs::write(path, text + "\n")?;
    Ok(())
}

fn read_vector(path: &Path) -> Result<Vec<f64>> {
    let text = fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
    let mut out = Vec::new();
    for line in text.lines().map(str::trim) {
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        for tok in line.split(',').map(str::trim).filter(|t| !t.is_empty()) {
            out.push(tok.parse().map_err(|_| Error::Parse(format!("{}: bad number {tok}", path.display())))?);
        }
    }
    Ok(out)
}

fn write_vector(path: &Path, header: &str, v: &[f64]) -> Result<()> {
    let mut text = format!("# {header}\n");
    for x in v {
        text.push_str(&format!("{x:.16e}\n"));
    }
    fs::write(path, text)?;
    Ok(())
}

fn print_ledger(p: &Problem) {
    println!("PDE solves: total {}", p.ledger.total());
    for (k, v) in p.ledger.snapshot() {
        println!("  {k}: {v}");
    }
}

fn cmd_bae(ctx: &Ctx) -> Result<()> {
    let p = Problem::from_config(&ctx.cfg)?;
    let em = p.estimate_bae(ctx.cfg.bae.n_mc, ctx.cfg.bae.seed)?;
    let dir = ctx.subdir("bae")?;
    em.write_dir(&dir)?;
    let max_std = em.eps_std().into_iter().fold(0.0f64, f64::max);
    println!(
        "error model: n_s {}, n_mc {}, max std {max_std:.4e}, max correlation {:.4} -> {}",
        em.n_s(),
        em.n_mc_used,
        em.max_offdiag_correlation(),
        dir.display()
    );
    print_ledger(&p);
    Ok(())
}

fn cmd_oed(ctx: &Ctx) -> Result<()> {
    let p = Problem::from_config(&ctx.cfg)?;
    let em = ctx.error_model(&p)?;
    let o = &ctx.cfg.oed;
    if o.reuse_bae_samples && o.seed != ctx.cfg.bae.seed {
        log::warn!("reuse_bae_samples only shares draws when oed.seed equals bae.seed");
    }
    let training = p.training_set(o.n_d, o.seed, o.reuse_bae_samples)?;
    let settings = ctx.settings();
    let objective = OedObjective::new(&p.model, &p.m_prior, &em, &training, settings)?;
    p.ledger.reset();
    let trace = greedy(&objective, o.k)?;
    let mode = ctx.mode();
    let dir = ctx.subdir(&format!("oed_{mode}"))?;
    let n_s = p.n_s();
    write_json(
        &dir.join("design.json"),
        &json!({
            "mode": mode,
            "objective": settings.kind,
            "n_s": n_s,
            "k": o.k,
            "n_d": o.n_d,
            "picks": trace.picks,
            "objective_values": trace.objective_values,
            "evaluations": trace.evaluations,
            "expected_evaluations": o.k * n_s - o.k * (o.k - 1) / 2,
            "invalid_evaluations": trace.invalid_evaluations,
            "solves": p.ledger.snapshot(),
        }),
    )?;
    let mut steps = String::from("step,sensor,objective\n");
    for (i, (s, v)) in trace.picks.iter().zip(&trace.objective_values).enumerate() {
        steps.push_str(&format!("{},{s},{v:.16e}\n", i + 1));
    }
    fs::write(dir.join("steps.csv"), steps)?;
    trace.design(n_s)?.write(&dir.join("design.txt"))?;
    println!("{mode} design ({} objective): {:?}", settings.kind, trace.picks);
    println!("objective evaluations: {}", trace.evaluations);
    print_ledger(&p);
    Ok(())
}

fn cmd_invert(ctx: &Ctx, design: &Path, data: Option<&Path>, truth: Option<&Path>) -> Result<()> {
    let p = Problem::from_config(&ctx.cfg)?;
    let design = Design::read(design, p.n_s())?;
    let em = ctx.error_model(&p)?;
    let mode = ctx.mode();
    let dir = ctx.subdir(&format!("invert_{mode}"))?;
    let (y, truth) = match data {
        Some(path) => {
            let y = read_vector(path)?;
            if y.len() != p.n_s() {
                return Err(Error::Config(format!(
                    "{} has {} values, expected {}",
                    path.display(),
                    y.len(),
                    p.n_s()
                )));
            }
            let t = truth
                .map(|t| read_field_csv(t, &p.mesh, Support::Bottom))
                .transpose()?;
            (y, t)
        }
        None => {
            let s = p.validation_set(1, ctx.cfg.validation.seed)?.samples.remove(0);
            write_vector(&dir.join("data.csv"), "synthetic data", &s.y)?;
            write_field_csv(&dir.join("truth_m.csv"), &p.mesh, &s.m)?;
            (s.y, Some(s.m))
        }
    };
    let rl = RestrictedLikelihood::restrict(&em, &design)?;
    let ip = InverseProblem::new(&p.model, &p.m_prior, &rl, &y)?;
    let map = ip.solve_map(None, &MapOptions::default())?;
    write_field_csv(&dir.join("m_map.csv"), &p.mesh, &map.m_map)?;
    let prior_var = p.m_prior.pointwise_variance().to_vec();
    let (eigenvalues, variance, trace) = if design.is_empty() {
        (Vec::new(), prior_var.clone(), p.m_prior.trace())
    } else {
        let lr = posterior_lowrank(&ip, &map, design.n_act())?;
        (
            lr.eigpairs.values.clone(),
            lr.variance_field(&p.m_prior),
            lr.posterior_trace(&p.m_prior),
        )
    };
    write_vector(&dir.join("eigenvalues.csv"), "eigenvalues", &eigenvalues)?;
    write_field_csv(&dir.join("variance.csv"), &p.mesh, &Field::from_values(Support::Bottom, variance.clone()))?;
    let rel_error = truth.map(|t| {
        let d = sub(map.m_map.values(), t.values());
        (p.m_prior.mass_inner(&d, &d) / p.m_prior.mass_inner(t.values(), t.values())).sqrt()
    });
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    write_json(
        &dir.join("summary.json"),
        &json!({
            "mode": mode,
            "design": design.active(),
            "converged": map.converged,
            "iterations": map.iterations,
            "posterior_trace": trace,
            "prior_trace": p.m_prior.trace(),
            "mean_posterior_variance": mean(&variance),
            "mean_prior_variance": mean(&prior_var),
            "rel_error": rel_error,
        }),
    )?;
    println!(
        "MAP converged {} in {} iterations; posterior trace {trace:.6e} (prior {:.6e})",
        map.converged,
        map.iterations,
        p.m_prior.trace()
    );
    if let Some(e) = rel_error {
        println!("relative MAP error {e:.6e}");
    }
    print_ledger(&p);
    Ok(())
}

/// File stem, or for `oed_<mode>/design.txt` the mode.
fn design_label(path: &Path) -> String {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "design".into());
    if stem != "design" {
        return stem;
    }
    path.parent()
        .and_then(|d| d.file_name())
        .map(|d| d.to_string_lossy().trim_start_matches("oed_").to_string())
        .filter(|d| !d.is_empty())
        .unwrap_or(stem)
}

fn cmd_validate(ctx: &Ctx, designs: &[PathBuf], n_random: Option<usize>) -> Result<()> {
    let p = Problem::from_config(&ctx.cfg)?;
    let em = ctx.error_model(&p)?;
    let mode = ctx.mode();
    let v = &ctx.cfg.validation;
    let vset = p.validation_set(v.n_v, v.seed)?;
    let dir = ctx.subdir(&format!("validate_{mode}"))?;
    let opts = MapOptions::default();
    let mut runs = Vec::new();
    for path in designs {
        let label = design_label(path);
        if runs.iter().any(|(l, _, _)| *l == label) {
            return Err(Error::Config(format!("two designs share the label {label}")));
        }
        runs.push((label.clone(), label, Design::read(path, p.n_s())?));
    }
    let k = runs[0].2.n_act();
    for j in 0..n_random.unwrap_or(v.n_random) {
        let d = random_design(k, p.n_s(), &mut stream(v.seed, "random-design", j as u64))?;
        runs.push(("random".into(), format!("random_{j:03}"), d));
    }
    let mut cloud = Vec::new();
    for (kind, stem, design) in &runs {
        let rep = validate(&p, design, &em, mode, &vset, &opts)?;
        rep.write(&dir, stem)?;
        info!("{stem}: V {:.6e} E {:.6e}", rep.v_bar, rep.e_map_bar);
        if kind != "random" {
            println!("{stem}: V_bar {:.6e}, E_map_bar {:.6e}, failed {}", rep.v_bar, rep.e_map_bar, rep.n_failed);
        }
        cloud.push(CloudPoint {
            design_kind: kind.clone(),
            k: design.n_act(),
            v_bar: rep.v_bar,
            e_map_bar: rep.e_map_bar,
        });
    }
    fs::write(dir.join("cloud.csv"), cloud_csv(&cloud))?;
    println!("{} reports and cloud.csv -> {}", runs.len(), dir.display());
    print_ledger(&p);
    Ok(())
}

fn cmd_nd_study(ctx: &Ctx) -> Result<()> {
    let p = Problem::from_config(&ctx.cfg)?;
    let em = ctx.error_model(&p)?;
    let v = &ctx.cfg.validation;
    let vset = p.validation_set(v.n_v, v.seed)?;
    let o = &ctx.cfg.oed;
    let rows = nd_study(&p, &em, &ctx.settings(), &o.nd_values, o.k, o.seed, &vset)?;
    let dir = ctx.subdir("nd_study")?;
    fs::write(dir.join("nd_table.csv"), nd_table_csv(&rows))?;
    for r in &rows {
        println!("n_d {:>3}: V_bar {:.6e} +- {:.2e}, E_map_bar {:.6e}", r.n_d, r.v_bar, r.v_se, r.e_map_bar);
    }
    print_ledger(&p);
    Ok(())
}

fn cmd_sandbox_check(ctx: &Ctx, instances: u64) -> Result<()> {
    let seed = ctx.common.seed.unwrap_or(0);
    let (mut smw, mut marg, mut pair, mut update) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for k in 0..instances {
        let mut rng = stream(seed, "sandbox-check", k);
        let (d, n, q) = (rng.random_range(2..=12), rng.random_range(1..=12), rng.random_range(1..=12));
        let lm = LinearModel::random(d, n, q, 0.05, &mut rng);
        smw = smw.max(lm.smw_check()?);
        marg = marg.max((lm.analytic_posterior_cov()? - lm.marginal_posterior_cov()?).norm());
        let c = random_spd(n, &mut rng);
        let g = random_matrix(n, n, &mut rng);
        let kk = &g * g.transpose();
        let (a, b) = trace_pair(&c, &kk);
        pair = pair.max((a - b).abs() / a.abs().max(1.0));
        let (x, y) = lowrank_trace_pair(&c, &kk)?;
        update = update.max((x - y).abs() / x.abs().max(1.0));
    }
    println!("instances: {instances}");
    println!("Woodbury max deviation:        {smw:.3e}");
    println!("marginal posterior deviation:  {marg:.3e}");
    println!("trace pair deviation:          {pair:.3e}");
    println!("low-rank trace deviation:      {update:.3e}");
    let worst = smw.max(marg).max(pair).max(update);
    if worst > 1e-10 {
        return Err(Error::ContractViolation(format!("identity deviation {worst:.3e} exceeds 1e-10")));
    }
    println!("all identities within 1e-10");
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    let mut cfg = match &cli.common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(obj) = &cli.common.objective {
        cfg.oed.objective = obj.parse::<ObjectiveKind>()?;
    }
    if let Some(seed) = cli.common.seed {
        match cli.command {
            Command::Bae => cfg.bae.seed = seed,
            Command::Oed | Command::NdStudy => cfg.oed.seed = seed,
            Command::Invert { .. } | Command::Validate { .. } => cfg.validation.seed = seed,
            Command::SandboxCheck { .. } => {}
        }
    }
    if let Some(workers) = cli.common.workers {
        rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build_global()
            .map_err(|e| Error::Config(format!("cannot start {workers} workers: {e}")))?;
    }
    let out = cli.common.out.clone().unwrap_or_else(|| cfg.out_dir.clone());
    let ctx = Ctx {
        cfg,
        common: cli.common,
        out,
    };
    match &cli.command {
        Command::Bae => cmd_bae(&ctx),
        Command::Oed => cmd_oed(&ctx),
        Command::Invert { design, data, truth } => cmd_invert(&ctx, design, data.as_deref(), truth.as_deref()),
        Command::Validate { designs, random } => cmd_validate(&ctx, designs, *random),
        Command::NdStudy => cmd_nd_study(&ctx),
        Command::SandboxCheck { instances } => cmd_sandbox_check(&ctx, *instances),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_numerical() {
                ExitCode::from(3)
            } else {
                ExitCode::from(2)
            }
        }
    }
}
