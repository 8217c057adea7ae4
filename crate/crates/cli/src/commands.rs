//! Subcommand implementations.
//!
//! Every command builds a [`Report`], writes it to the requested output,
//! and returns the process exit code: 0 for success, 2 when an estimator
//! declines to release, and 1 (via [`CliError`]) for usage or data errors.

use crate::io::{self, FileFormat};
use crate::report::{self, Report};
use clap::Args;
use privmoment::datagen::DistSpec;
use privmoment::estimators::{
    baseline_estimate, dp_min_eigenvalue, precondition, recursive_estimate, BaselineConfig,
    BaselineOutcome, EigminConfig, EigminOutcome, RecursiveConfig,
};
use privmoment::matcore::{eig_sym, loewner_leq, rel_spectral_error, second_moment, spectral_dist};
use privmoment::privacy::approx_to_zcdp_rho;
use privmoment::subsamp::{
    effective_second_moment, plan_sample_sizes, subsamplability_grid, tail_points, PlanBudget,
    PlanOptions, SubsampParams,
};
use privmoment::{Dataset, RngState, SymMat};
use std::path::{Path, PathBuf};
use std::time::Instant;

// Loewner comparisons in ground-truth checks run at this tolerance,
// relative to the spectral norm of the reference moment.
const LOEWNER_TOL_REL: f64 = 1e-9;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    File(#[from] io::FileError),
    #[error(transparent)]
    Core(#[from] privmoment::Error),
    #[error("{0}")]
    Usage(String),
    #[error("cannot write report: {0}")]
    Report(std::io::Error),
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

/// Flags shared by every subcommand.
#[derive(Debug, Clone)]
pub struct Globals {
    pub seed: u64,
    pub output: Option<PathBuf>,
    pub unsafe_diagnostics: bool,
    pub force_zero_noise: bool,
}

fn close(rep: Report, status: &str, exit: u8, g: &Globals) -> Result<u8, CliError> {
    let (text, code) = rep.finish(status, exit);
    report::emit(&text, g.output.as_deref()).map_err(CliError::Report)?;
    Ok(code)
}

fn parse_f64_list(s: &str, what: &str) -> Result<Vec<f64>, CliError> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<f64>()
                .map_err(|_| usage(format!("{what}: {t:?} is not a number")))
        })
        .collect()
}

fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>, CliError> {
    s.split(',')
        .map(|t| {
            let t = t.trim();
            t.parse::<usize>()
                .map_err(|_| usage(format!("{what}: {t:?} is not a count")))
        })
        .collect()
}

fn diag(scales: &[f64]) -> SymMat {
    SymMat::from_fn(scales.len(), |i, j| if i == j { scales[i] } else { 0.0 })
}

/// Resolves the one-budget-family rule: either `--rho`, or `--eps --delta`.
fn parse_budget(
    rho: Option<f64>,
    eps: Option<f64>,
    delta: Option<f64>,
) -> Result<PlanBudget, CliError> {
    match (rho, eps, delta) {
        (Some(rho), None, None) => Ok(PlanBudget::Zcdp { rho }),
        (None, Some(eps), Some(delta)) => Ok(PlanBudget::Approx { eps, delta }),
        _ => Err(usage(
            "pass exactly one budget family: --rho, or --eps together with --delta",
        )),
    }
}

fn report_budget(rep: &mut Report, budget: &PlanBudget) {
    match budget {
        PlanBudget::Zcdp { rho } => {
            rep.kv("budget.family", "zcdp");
            rep.kv("budget.rho", rho);
        }
        PlanBudget::Approx { eps, delta } => {
            rep.kv("budget.family", "approx");
            rep.kv("budget.eps", eps);
            rep.kv("budget.delta", delta);
        }
    }
}

fn report_input(rep: &mut Report, path: &Path, data: &Dataset) {
    rep.kv("input", path.display());
    rep.kv("input.dim", data.dim());
    rep.kv("input.n", data.len());
    rep.kv("input.radius", data.radius());
}

#[allow(clippy::too_many_arguments)]
fn report_plan(
    rep: &mut Report,
    params: &SubsampParams,
    d: usize,
    budget: &PlanBudget,
    gamma: f64,
    xi: f64,
    radius: f64,
    lambda_min: f64,
    opts: &PlanOptions,
    n_actual: usize,
) -> Result<(), CliError> {
    let plan = plan_sample_sizes(params, d, budget, gamma, xi, radius, lambda_min, opts)?;
    rep.kv("plan.t_exact", plan.t_exact);
    rep.kv("plan.levels_hint", plan.levels_hint);
    rep.kv("plan.n_recursive", plan.n_recursive);
    rep.kv("plan.n_baseline", plan.n_baseline);
    rep.kv("plan.eta", plan.eta);
    rep.kv("plan.beta_threshold", plan.beta_threshold);
    rep.kv("plan.beta_ok", plan.beta_ok);
    rep.kv("plan.baseline_m_ok", plan.baseline_m_ok);
    rep.kv("plan.n_actual", n_actual);
    Ok(())
}

/// Ground-truth checks: relative spectral error and distance against the
/// reference moment, plus the two-sided Loewner band at `gamma` with the
/// non-tail moment as the lower anchor.
fn report_truth(
    rep: &mut Report,
    truth_path: &Path,
    input: &Dataset,
    sigma_hat: &SymMat,
    m: usize,
    alpha: f64,
    gamma: f64,
) -> Result<(), CliError> {
    let truth_data = io::read_dataset(truth_path)?;
    if truth_data.dim() != input.dim() {
        return Err(usage(format!(
            "ground truth dimension {} does not match input dimension {}",
            truth_data.dim(),
            input.dim()
        )));
    }
    let truth = second_moment(&truth_data);
    let tol = LOEWNER_TOL_REL * truth.spectral_norm()?;

    let tail = tail_points(input, m, alpha)?;
    let effective = effective_second_moment(input, &tail)?;
    let lower = loewner_leq(&effective.scale(1.0 - gamma), sigma_hat, tol)?;
    let upper = loewner_leq(sigma_hat, &truth.scale(1.0 + gamma), tol)?;
    let verdict = |ok: bool| if ok { "pass" } else { "fail" };

    rep.kv("truth.path", truth_path.display());
    rep.kv("truth.gamma", gamma);
    rep.kv("truth.rel_spectral_error", rel_spectral_error(&truth, sigma_hat)?);
    rep.kv("truth.spectral_dist", spectral_dist(&truth, sigma_hat)?);
    rep.kv("truth.loewner_lower", verdict(lower));
    rep.kv("truth.loewner_upper", verdict(upper));
    rep.kv("truth.loewner", verdict(lower && upper));
    Ok(())
}

// ---------------------------------------------------------------- gen ----

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum DistKind {
    Gaussian,
    Ellipsoid,
    ParetoRadial,
    ParetoConcat,
}

#[derive(Debug, Args)]
pub struct GenArgs {
    /// Dataset file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Distribution family.
    #[arg(long, value_enum)]
    pub dist: DistKind,
    /// Comma-separated diagonal of the second moment (gaussian) or of the
    /// ellipsoid matrix A (ellipsoid).
    #[arg(long)]
    pub scales: Option<String>,
    /// Upper endpoint of the power-law radius (pareto families).
    #[arg(long)]
    pub b: Option<f64>,
    /// Sphere dimension (pareto families).
    #[arg(long)]
    pub dim: Option<usize>,
    /// Number of points.
    #[arg(long)]
    pub n: usize,
    /// Probability of replacing a point with an outlier draw.
    #[arg(long, default_value_t = 0.0)]
    pub outlier_eta: f64,
    /// Outlier point as comma-separated coordinates; repeat for several.
    #[arg(long)]
    pub outlier_point: Vec<String>,
    /// On-disk format.
    #[arg(long, value_enum, default_value_t = FileFormat::Text)]
    pub format: FileFormat,
}

fn build_spec(a: &GenArgs) -> Result<DistSpec, CliError> {
    let scales = |what: &str| -> Result<Vec<f64>, CliError> {
        let s = a
            .scales
            .as_deref()
            .ok_or_else(|| usage(format!("--scales is required for {what}")))?;
        parse_f64_list(s, "--scales")
    };
    let pareto = |what: &str| -> Result<(f64, usize), CliError> {
        let b = a.b.ok_or_else(|| usage(format!("--b is required for {what}")))?;
        let dim = a.dim.ok_or_else(|| usage(format!("--dim is required for {what}")))?;
        Ok((b, dim))
    };
    let base = match a.dist {
        DistKind::Gaussian => DistSpec::Gaussian { sigma: diag(&scales("gaussian")?) },
        DistKind::Ellipsoid => DistSpec::Ellipsoid { a: diag(&scales("ellipsoid")?) },
        DistKind::ParetoRadial => {
            let (b, dim) = pareto("pareto-radial")?;
            DistSpec::ParetoRadial { b, dim }
        }
        DistKind::ParetoConcat => {
            let (b, dim) = pareto("pareto-concat")?;
            DistSpec::ParetoConcat { b, dim }
        }
    };
    if a.outlier_eta == 0.0 {
        return Ok(base);
    }
    if a.outlier_point.is_empty() {
        return Err(usage("--outlier-eta needs at least one --outlier-point"));
    }
    let dim = base.dim();
    let mut points = Vec::with_capacity(a.outlier_point.len());
    for raw in &a.outlier_point {
        let p = parse_f64_list(raw, "--outlier-point")?;
        if p.len() != dim {
            return Err(usage(format!(
                "--outlier-point has {} coordinates, the base family has dimension {dim}",
                p.len()
            )));
        }
        points.push(p);
    }
    Ok(DistSpec::Mixture {
        base: Box::new(base),
        outlier: Box::new(DistSpec::FixedPoints { dim, points }),
        eta: a.outlier_eta,
    })
}

pub fn gen(a: GenArgs, g: &Globals) -> Result<u8, CliError> {
    let spec = build_spec(&a)?;
    let mut rng = RngState::new(g.seed, 0);
    let data = spec.generate(a.n, &mut rng)?;
    io::write_dataset(&data, &a.out, a.format)?;

    let mut rep = Report::new("gen", g.seed);
    rep.kv("out", a.out.display());
    rep.kv(
        "out.format",
        match a.format {
            FileFormat::Text => "text",
            FileFormat::Binary => "binary",
        },
    );
    rep.kv("dist.n", data.len());
    rep.kv("dist.dim", data.dim());
    rep.kv("dist.radius", data.radius());
    rep.kv("dist.outlier_eta", a.outlier_eta);
    if let Ok(pop) = spec.population_second_moment() {
        rep.matrix("population", &pop);
    }
    close(rep, "ok", 0, g)
}

// --------------------------------------------------------------- plan ----

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Subsample size.
    #[arg(long)]
    pub m: usize,
    /// Subsamplability accuracy.
    #[arg(long)]
    pub alpha: f64,
    /// Subsamplability failure rate.
    #[arg(long, default_value_t = 0.05)]
    pub beta: f64,
    /// Data dimension.
    #[arg(long)]
    pub d: usize,
    /// zCDP budget; exclusive with --eps/--delta.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Approximate-DP epsilon; requires --delta.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Approximate-DP delta; requires --eps.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Relative accuracy target.
    #[arg(long)]
    pub gamma: f64,
    /// Failure probability target.
    #[arg(long, default_value_t = 0.05)]
    pub xi: f64,
    /// Norm bound R.
    #[arg(long)]
    pub radius: f64,
    /// Prior lower bound on the smallest eigenvalue.
    #[arg(long, default_value_t = 1.0)]
    pub lambda_min: f64,
    /// Multiplier on the recursive sample bound.
    #[arg(long, default_value_t = 1.0)]
    pub const_c: f64,
    /// Multiplier on the baseline rotation constant.
    #[arg(long, default_value_t = 1.0)]
    pub c_mult: f64,
    /// Base of the otherwise-unspecified logarithms.
    #[arg(long, default_value_t = 2.0)]
    pub log_base: f64,
    /// Delta used when translating between budget families.
    #[arg(long, default_value_t = 1e-6)]
    pub zcdp_delta: f64,
}

pub fn plan(a: PlanArgs, g: &Globals) -> Result<u8, CliError> {
    let budget = parse_budget(a.rho, a.eps, a.delta)?;
    let params = SubsampParams::new(a.m, a.alpha, a.beta)?;
    let opts = PlanOptions {
        const_c: a.const_c,
        c_mult: a.c_mult,
        log_base: a.log_base,
        zcdp_delta: a.zcdp_delta,
    };

    let mut rep = Report::new("plan", g.seed);
    report_budget(&mut rep, &budget);
    rep.kv("config.m", a.m);
    rep.kv("config.alpha", a.alpha);
    rep.kv("config.beta", a.beta);
    rep.kv("config.d", a.d);
    rep.kv("config.gamma", a.gamma);
    rep.kv("config.xi", a.xi);
    rep.kv("config.radius", a.radius);
    rep.kv("config.lambda_min", a.lambda_min);
    rep.kv("config.const_c", a.const_c);
    report_plan(
        &mut rep, &params, a.d, &budget, a.gamma, a.xi, a.radius, a.lambda_min, &opts, 0,
    )?;
    close(rep, "ok", 0, g)
}

// ----------------------------------------------------------- estimate ----

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Input dataset file.
    pub input: PathBuf,
    /// Subsample size the data is assumed subsamplable at.
    #[arg(long)]
    pub m: usize,
    /// Subsamplability accuracy, in (0, 1/2].
    #[arg(long)]
    pub alpha: f64,
    /// Subsamplability failure rate (plan numbers only).
    #[arg(long, default_value_t = 0.05)]
    pub beta: f64,
    /// zCDP budget; exclusive with --eps/--delta.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Approximate-DP epsilon, converted to a zCDP budget; requires --delta.
    #[arg(long)]
    pub eps: Option<f64>,
    /// Approximate-DP delta; requires --eps.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Failure probability target.
    #[arg(long, default_value_t = 0.05)]
    pub xi: f64,
    /// Accuracy target for the plan numbers and ground-truth checks;
    /// defaults to alpha.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Norm bound override; must still cover every point.
    #[arg(long)]
    pub radius: Option<f64>,
    /// Precondition by this prior lower bound on the smallest eigenvalue.
    #[arg(long)]
    pub lambda_min: Option<f64>,
    /// Multiplier on the recursive sample bound (plan numbers only).
    #[arg(long, default_value_t = 1.0)]
    pub const_c: f64,
    /// Dataset file whose second moment serves as ground truth.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
}

pub fn estimate(a: EstimateArgs, g: &Globals) -> Result<u8, CliError> {
    let data = io::read_dataset(&a.input)?;
    let budget = parse_budget(a.rho, a.eps, a.delta)?;
    let rho = match budget {
        PlanBudget::Zcdp { rho } => rho,
        PlanBudget::Approx { eps, delta } => approx_to_zcdp_rho(eps, delta)?,
    };
    let gamma = a.gamma.unwrap_or(a.alpha);
    let lambda = a.lambda_min.unwrap_or(1.0);

    let preconditioned;
    let work: &Dataset = match a.lambda_min {
        Some(l) => {
            preconditioned = precondition(&data, l)?;
            &preconditioned
        }
        None => &data,
    };

    let mut cfg = RecursiveConfig::new(a.m, a.alpha, rho, a.xi);
    cfg.zero_noise = g.force_zero_noise;
    if let Some(r) = a.radius {
        // an override refers to the raw data; rescale it the same way the
        // preconditioner rescaled the points
        cfg.radius = Some(if a.lambda_min.is_some() { r / lambda.sqrt() } else { r });
    }
    let mut rng = RngState::new(g.seed, 0);
    let run = recursive_estimate(work, &cfg, &mut rng)?;
    let sigma_hat =
        if a.lambda_min.is_some() { run.sigma_hat.scale(lambda) } else { run.sigma_hat.clone() };

    let mut rep = Report::new("estimate", g.seed);
    report_input(&mut rep, &a.input, &data);
    report_budget(&mut rep, &budget);
    if !matches!(budget, PlanBudget::Zcdp { .. }) {
        rep.kv("budget.rho", rho);
    }
    rep.kv("config.m", a.m);
    rep.kv("config.alpha", a.alpha);
    rep.kv("config.beta", a.beta);
    rep.kv("config.xi", a.xi);
    rep.kv("config.gamma", gamma);
    if let Some(l) = a.lambda_min {
        rep.kv("config.lambda_min", l);
    }
    if let Some(r) = a.radius {
        rep.kv("config.radius_override", r);
    }
    rep.kv("config.zero_noise", cfg.zero_noise);

    let p = &run.params;
    rep.kv("cascade.kappa", p.kappa);
    rep.kv("cascade.radius", p.radius);
    rep.kv("cascade.t_real", p.t_real);
    rep.kv("cascade.t_used", p.t_used);
    rep.kv("cascade.eta", p.eta);
    rep.kv("cascade.psi", p.psi);
    rep.kv("cascade.c_noise", p.c_noise);
    rep.kv("cascade.c_stop", p.c_stop);

    // the level schedule (kappa, radius, sigma) and the subspace dimension
    // are post-processing of the released noisy moments; noise norms, the
    // benign-event flag, and shrink lists reveal more and stay gated
    if g.unsafe_diagnostics {
        rep.table(
            "levels",
            &["level", "kappa", "radius", "sigma", "subspace_dim", "noise_norm", "event_e", "shrunk_count"],
        );
    } else {
        rep.table("levels", &["level", "kappa", "radius", "sigma", "subspace_dim"]);
    }
    for rec in &run.trace.levels {
        let mut cells = vec![
            rec.level.to_string(),
            rec.kappa.to_string(),
            rec.radius.to_string(),
            rec.sigma.to_string(),
            rec.subspace_dim.to_string(),
        ];
        if g.unsafe_diagnostics {
            cells.push(rec.noise_norm.to_string());
            cells.push(rec.event_e.to_string());
            cells.push(rec.shrunk_indices.len().to_string());
        }
        rep.row("levels", &cells);
    }
    if g.unsafe_diagnostics {
        for rec in &run.trace.levels {
            if !rec.shrunk_indices.is_empty() {
                let list: Vec<String> =
                    rec.shrunk_indices.iter().map(|i| i.to_string()).collect();
                rep.kv(&format!("trace.shrunk.{}", rec.level), list.join(";"));
            }
        }
    }

    rep.table("ledger", &["label", "rho"]);
    for e in run.ledger.entries() {
        rep.row("ledger", &[e.label.clone(), e.rho.to_string()]);
    }
    rep.kv("ledger.total_rho", run.ledger.total_rho());

    rep.matrix("sigma_hat", &sigma_hat);

    let params = SubsampParams::new(a.m, a.alpha, a.beta)?;
    let plan_radius = a.radius.unwrap_or_else(|| data.radius());
    report_plan(
        &mut rep,
        &params,
        data.dim(),
        &PlanBudget::Zcdp { rho },
        gamma,
        a.xi,
        plan_radius,
        lambda,
        &PlanOptions { const_c: a.const_c, ..PlanOptions::default() },
        data.len(),
    )?;

    if let Some(truth_path) = &a.ground_truth {
        report_truth(&mut rep, truth_path, &data, &sigma_hat, a.m, a.alpha, gamma)?;
    }
    close(rep, "ok", 0, g)
}

// ----------------------------------------------------------- baseline ----

#[derive(Debug, Args)]
pub struct BaselineArgs {
    /// Input dataset file.
    pub input: PathBuf,
    /// Group size.
    #[arg(long)]
    pub m: usize,
    /// Subsamplability accuracy.
    #[arg(long)]
    pub alpha: f64,
    /// Subsamplability failure rate.
    #[arg(long, default_value_t = 0.05)]
    pub beta: f64,
    /// Per-stage epsilon; the run pays (2 eps, 4 e^eps delta).
    #[arg(long)]
    pub eps: f64,
    /// Per-stage delta.
    #[arg(long)]
    pub delta: f64,
    /// Failure probability target.
    #[arg(long, default_value_t = 0.05)]
    pub xi: f64,
    /// Accuracy target for the plan numbers and ground-truth checks;
    /// defaults to alpha.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Prior lower bound on the smallest eigenvalue (plan numbers only).
    #[arg(long, default_value_t = 1.0)]
    pub lambda_min: f64,
    /// Multiplier on the rotation denominator constant.
    #[arg(long, default_value_t = 1.0)]
    pub c_mult: f64,
    /// Multiplier on the recursive sample bound (plan numbers only).
    #[arg(long, default_value_t = 1.0)]
    pub const_c: f64,
    /// Dataset file whose second moment serves as ground truth.
    #[arg(long)]
    pub ground_truth: Option<PathBuf>,
}

pub fn baseline(a: BaselineArgs, g: &Globals) -> Result<u8, CliError> {
    let data = io::read_dataset(&a.input)?;
    let gamma = a.gamma.unwrap_or(a.alpha);
    let mut cfg = BaselineConfig::new(a.m, a.alpha, a.beta, a.xi, a.eps, a.delta);
    cfg.c_mult = a.c_mult;
    cfg.zero_noise = g.force_zero_noise;
    let mut rng = RngState::new(g.seed, 0);
    let outcome = baseline_estimate(&data, &cfg, &mut rng)?;

    let mut rep = Report::new("baseline", g.seed);
    report_input(&mut rep, &a.input, &data);
    let budget = PlanBudget::Approx { eps: a.eps, delta: a.delta };
    report_budget(&mut rep, &budget);
    rep.kv("config.m", a.m);
    rep.kv("config.alpha", a.alpha);
    rep.kv("config.beta", a.beta);
    rep.kv("config.xi", a.xi);
    rep.kv("config.gamma", gamma);
    rep.kv("config.c_mult", a.c_mult);
    rep.kv("config.zero_noise", cfg.zero_noise);

    let stats = match &outcome {
        BaselineOutcome::Estimate { stats, .. } => stats,
        BaselineOutcome::Aborted { stats, .. } => stats,
    };
    let cost = match &outcome {
        BaselineOutcome::Estimate { cost, .. } => cost,
        BaselineOutcome::Aborted { cost, .. } => cost,
    };
    rep.kv("groups.count", stats.groups);
    // q_noisy is the epsilon-DP consensus release; the raw scores and the
    // averaging weights derived from them are data, so they stay gated
    rep.kv("groups.q_noisy", stats.q_noisy);
    rep.kv("groups.abort_threshold", stats.abort_threshold);
    rep.kv("groups.eta", stats.eta);
    rep.kv("groups.m_condition_ok", stats.m_condition_ok);
    rep.kv("cost.eps", cost.eps());
    rep.kv("cost.delta", cost.delta());
    if g.unsafe_diagnostics {
        rep.kv("groups.q_mean", stats.q_mean);
        rep.table("groups", &["group", "q", "weight"]);
        for (i, (q, w)) in stats.q.iter().zip(&stats.weights).enumerate() {
            rep.row("groups", &[i.to_string(), q.to_string(), w.to_string()]);
        }
    }

    let params = SubsampParams::new(a.m, a.alpha, a.beta)?;
    report_plan(
        &mut rep,
        &params,
        data.dim(),
        &budget,
        gamma,
        a.xi,
        data.radius(),
        a.lambda_min,
        &PlanOptions { const_c: a.const_c, c_mult: a.c_mult, ..PlanOptions::default() },
        data.len(),
    )?;

    match outcome {
        BaselineOutcome::Estimate { sigma_hat, .. } => {
            rep.matrix("sigma_hat", &sigma_hat);
            if let Some(truth_path) = &a.ground_truth {
                report_truth(&mut rep, truth_path, &data, &sigma_hat, a.m, a.alpha, gamma)?;
            }
            close(rep, "ok", 0, g)
        }
        BaselineOutcome::Aborted { .. } => close(rep, "failure", 2, g),
    }
}

// ------------------------------------------------------------- eigmin ----

#[derive(Debug, Args)]
pub struct EigminArgs {
    /// Input dataset file.
    pub input: PathBuf,
    /// Subsample size.
    #[arg(long)]
    pub m: usize,
    /// Grid band: bucket edges grow by 1/(1-alpha).
    #[arg(long)]
    pub alpha: f64,
    /// Per-release epsilon.
    #[arg(long)]
    pub eps: f64,
    /// Per-release delta.
    #[arg(long)]
    pub delta: f64,
    /// Smallest grid edge; everything below lands in the catch-all bucket.
    #[arg(long, default_value_t = 1e-9)]
    pub lambda_floor: f64,
    /// Largest grid edge; defaults to the squared file radius.
    #[arg(long)]
    pub lambda_cap: Option<f64>,
}

pub fn eigmin(a: EigminArgs, g: &Globals) -> Result<u8, CliError> {
    let data = io::read_dataset(&a.input)?;
    let mut cfg = EigminConfig::new(a.m, a.alpha, a.eps, a.delta);
    cfg.lambda_floor = a.lambda_floor;
    cfg.lambda_cap = a.lambda_cap;
    cfg.zero_noise = g.force_zero_noise;
    let mut rng = RngState::new(g.seed, 0);
    let outcome = dp_min_eigenvalue(&data, &cfg, &mut rng)?;

    let mut rep = Report::new("eigmin", g.seed);
    report_input(&mut rep, &a.input, &data);
    rep.kv("budget.family", "approx");
    rep.kv("budget.eps", a.eps);
    rep.kv("budget.delta", a.delta);
    rep.kv("config.m", a.m);
    rep.kv("config.alpha", a.alpha);
    rep.kv("config.lambda_floor", a.lambda_floor);
    if let Some(cap) = a.lambda_cap {
        rep.kv("config.lambda_cap", cap);
    }
    rep.kv("config.zero_noise", cfg.zero_noise);
    rep.kv("grid.release_threshold", 1.0 + 2.0 * (2.0 / a.delta).ln() / a.eps);

    let cost = outcome.cost();
    rep.kv("cost.eps", cost.eps());
    rep.kv("cost.delta", cost.delta());

    match outcome {
        EigminOutcome::Released { value, bucket, groups, .. } => {
            rep.kv("groups.count", groups);
            rep.kv("eigmin.value", value);
            rep.kv("eigmin.bucket.index", bucket.index);
            rep.kv("eigmin.bucket.lower", bucket.lower);
            rep.kv("eigmin.bucket.upper", bucket.upper);
            if g.unsafe_diagnostics {
                rep.kv("eigmin.bucket.count", bucket.count);
                rep.kv("eigmin.bucket.noisy_count", bucket.noisy_count);
            }
            close(rep, "ok", 0, g)
        }
        EigminOutcome::NoStableBucket { groups, .. } => {
            rep.kv("groups.count", groups);
            close(rep, "failure", 2, g)
        }
    }
}

// ------------------------------------------------------ check-subsamp ----

#[derive(Debug, Args)]
pub struct CheckArgs {
    /// Input dataset file.
    pub input: PathBuf,
    /// Base subsample size.
    #[arg(long)]
    pub m: usize,
    /// Subsamplability accuracy.
    #[arg(long)]
    pub alpha: f64,
    /// Subsample draws per grid cell.
    #[arg(long, default_value_t = 200)]
    pub trials: usize,
    /// Comma-separated multipliers for the subsample-size grid.
    #[arg(long, default_value = "1,2,4")]
    pub factors: String,
}

pub fn check_subsamp(a: CheckArgs, g: &Globals) -> Result<u8, CliError> {
    let data = io::read_dataset(&a.input)?;
    let factors = parse_usize_list(&a.factors, "--factors")?;
    let rng = RngState::new(g.seed, 0);
    let grid = subsamplability_grid(&data, a.m, a.alpha, a.trials, &factors, &rng)?;

    let mut rep = Report::new("check-subsamp", g.seed);
    report_input(&mut rep, &a.input, &data);
    rep.kv("config.m", a.m);
    rep.kv("config.alpha", a.alpha);
    rep.kv("config.trials", a.trials);
    rep.kv("config.factors", factors.iter().map(|f| f.to_string()).collect::<Vec<_>>().join(";"));

    rep.table(
        "grid",
        &["m", "trials", "failures", "rate", "wilson_low", "wilson_high", "tail_fraction"],
    );
    for (m_prime, check) in &grid {
        let tail = tail_points(&data, *m_prime, a.alpha)?;
        rep.row(
            "grid",
            &[
                m_prime.to_string(),
                check.trials.to_string(),
                check.failures.to_string(),
                check.failure_rate.to_string(),
                check.wilson_low.to_string(),
                check.wilson_high.to_string(),
                tail.fraction().to_string(),
            ],
        );
    }

    let full = second_moment(&data);
    let tail = tail_points(&data, a.m, a.alpha)?;
    let effective = effective_second_moment(&data, &tail)?;
    rep.kv("moment.tail_threshold", tail.threshold);
    rep.kv("moment.lambda_min", eig_sym(&full)?.min_value());
    rep.kv("moment.lambda_min_effective", eig_sym(&effective)?.min_value());
    close(rep, "ok", 0, g)
}

// -------------------------------------------------------------- bench ----

#[derive(Debug, Args)]
pub struct BenchArgs {
    /// Points generated per cell.
    #[arg(long)]
    pub n: usize,
    /// Comma-separated diagonal of the base Gaussian second moment.
    #[arg(long)]
    pub scales: String,
    /// Comma-separated outlier rates to sweep.
    #[arg(long, default_value = "0,1e-3,1e-2")]
    pub eta_list: String,
    /// Outlier point for nonzero rates; repeat for several.
    #[arg(long)]
    pub outlier_point: Vec<String>,
    /// Subsample size for both estimators.
    #[arg(long)]
    pub m: usize,
    /// Subsamplability accuracy.
    #[arg(long)]
    pub alpha: f64,
    /// Subsamplability failure rate.
    #[arg(long, default_value_t = 0.05)]
    pub beta: f64,
    /// Failure probability target.
    #[arg(long, default_value_t = 0.05)]
    pub xi: f64,
    /// Per-stage epsilon; the recursive arm converts it to a zCDP budget.
    #[arg(long)]
    pub eps: f64,
    /// Per-stage delta.
    #[arg(long)]
    pub delta: f64,
    /// Worker threads for the sweep; defaults to all cores.
    #[arg(long)]
    pub jobs: Option<usize>,
    /// Repetitions per cell, each with its own stream.
    #[arg(long, default_value_t = 1)]
    pub reps: usize,
    /// Add wall-clock milliseconds per cell. Timing breaks byte-level
    /// report determinism, so it is opt-in.
    #[arg(long)]
    pub timings: bool,
}

struct BenchCell {
    idx: usize,
    eta_idx: usize,
    arm: BenchArm,
    rep: usize,
}

#[derive(Clone, Copy, PartialEq)]
enum BenchArm {
    Recursive,
    Baseline,
}

struct BenchCtx {
    seed: u64,
    n: usize,
    // one (spec, population moment) pair per swept eta
    specs: Vec<(f64, DistSpec, SymMat)>,
    clean: SymMat,
    rec_cfg: RecursiveConfig,
    base_cfg: BaselineConfig,
    timings: bool,
}

fn bench_cell(c: &BenchCell, ctx: &BenchCtx) -> Result<Vec<String>, CliError> {
    let (eta, spec, truth) = &ctx.specs[c.eta_idx];
    let mut rng = RngState::new(ctx.seed, 0).substream_named("bench-cell", c.idx as u64);
    let data = spec.generate(ctx.n, &mut rng)?;

    let started = Instant::now();
    let (status, sigma_hat) = match c.arm {
        BenchArm::Recursive => {
            let run = recursive_estimate(&data, &ctx.rec_cfg, &mut rng)?;
            ("ok", Some(run.sigma_hat))
        }
        BenchArm::Baseline => match baseline_estimate(&data, &ctx.base_cfg, &mut rng)? {
            BaselineOutcome::Estimate { sigma_hat, .. } => ("ok", Some(sigma_hat)),
            BaselineOutcome::Aborted { .. } => ("abort", None),
        },
    };
    let elapsed_ms = started.elapsed().as_secs_f64() * 1e3;

    let (rel, dist, rel_clean) = match &sigma_hat {
        Some(s) => (
            rel_spectral_error(truth, s)?,
            spectral_dist(truth, s)?,
            rel_spectral_error(&ctx.clean, s)?,
        ),
        None => (f64::NAN, f64::NAN, f64::NAN),
    };

    let arm = match c.arm {
        BenchArm::Recursive => "recursive",
        BenchArm::Baseline => "baseline",
    };
    let mut cells = vec![
        eta.to_string(),
        arm.to_string(),
        c.rep.to_string(),
        status.to_string(),
        rel.to_string(),
        dist.to_string(),
        rel_clean.to_string(),
    ];
    if ctx.timings {
        cells.push(format!("{elapsed_ms:.3}"));
    }
    Ok(cells)
}

pub fn bench(a: BenchArgs, g: &Globals) -> Result<u8, CliError> {
    let scales = parse_f64_list(&a.scales, "--scales")?;
    let etas = parse_f64_list(&a.eta_list, "--eta-list")?;
    if etas.is_empty() {
        return Err(usage("--eta-list must name at least one rate"));
    }
    let base = DistSpec::Gaussian { sigma: diag(&scales) };
    let dim = base.dim();

    let outlier = if etas.iter().any(|&e| e > 0.0) {
        if a.outlier_point.is_empty() {
            return Err(usage("nonzero --eta-list rates need at least one --outlier-point"));
        }
        let mut points = Vec::with_capacity(a.outlier_point.len());
        for raw in &a.outlier_point {
            let p = parse_f64_list(raw, "--outlier-point")?;
            if p.len() != dim {
                return Err(usage(format!(
                    "--outlier-point has {} coordinates, the base family has dimension {dim}",
                    p.len()
                )));
            }
            points.push(p);
        }
        Some(DistSpec::FixedPoints { dim, points })
    } else {
        None
    };

    let mut specs = Vec::with_capacity(etas.len());
    for &eta in &etas {
        let spec = if eta > 0.0 {
            DistSpec::Mixture {
                base: Box::new(base.clone()),
                outlier: Box::new(outlier.clone().expect("checked above")),
                eta,
            }
        } else {
            base.clone()
        };
        let truth = spec.population_second_moment()?;
        specs.push((eta, spec, truth));
    }
    let clean = base.population_second_moment()?;

    let rho = approx_to_zcdp_rho(a.eps, a.delta)?;
    let mut rec_cfg = RecursiveConfig::new(a.m, a.alpha, rho, a.xi);
    rec_cfg.zero_noise = g.force_zero_noise;
    let mut base_cfg = BaselineConfig::new(a.m, a.alpha, a.beta, a.xi, a.eps, a.delta);
    base_cfg.zero_noise = g.force_zero_noise;

    let ctx = BenchCtx {
        seed: g.seed,
        n: a.n,
        specs,
        clean,
        rec_cfg,
        base_cfg,
        timings: a.timings,
    };

    if a.reps == 0 {
        return Err(usage("--reps must be at least 1"));
    }
    let mut cells = Vec::new();
    for eta_idx in 0..etas.len() {
        for arm in [BenchArm::Recursive, BenchArm::Baseline] {
            for rep in 0..a.reps {
                cells.push(BenchCell { idx: cells.len(), eta_idx, arm, rep });
            }
        }
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(a.jobs.unwrap_or(0))
        .build()
        .map_err(|e| usage(format!("cannot build the worker pool: {e}")))?;
    let rows: Result<Vec<Vec<String>>, CliError> = pool.install(|| {
        use rayon::prelude::*;
        cells.par_iter().map(|c| bench_cell(c, &ctx)).collect()
    });
    let rows = rows?;

    let mut rep = Report::new("bench", g.seed);
    rep.kv("budget.family", "approx");
    rep.kv("budget.eps", a.eps);
    rep.kv("budget.delta", a.delta);
    rep.kv("budget.rho", rho);
    rep.kv("config.n", a.n);
    rep.kv("config.dim", dim);
    rep.kv("config.m", a.m);
    rep.kv("config.alpha", a.alpha);
    rep.kv("config.beta", a.beta);
    rep.kv("config.xi", a.xi);
    rep.kv("config.reps", a.reps);
    rep.kv("config.zero_noise", g.force_zero_noise);
    rep.kv(
        "config.eta_list",
        etas.iter().map(|e| e.to_string()).collect::<Vec<_>>().join(";"),
    );

    let mut columns =
        vec!["eta", "estimator", "rep", "status", "rel_err", "spectral_dist", "rel_err_clean"];
    if a.timings {
        columns.push("elapsed_ms");
    }
    rep.table("cells", &columns);
    for row in &rows {
        rep.row("cells", row);
    }
    close(rep, "ok", 0, g)
}
