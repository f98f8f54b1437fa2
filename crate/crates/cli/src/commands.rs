use std::path::{Path, PathBuf};

use pucci_core::classify::{
    self, classify_p_with, critical_exponent_with, exterior_nonexistence_check, gamma_seed, singular_catalog, sweep,
    upsilon_seed, ClassifyError,
};
use pucci_core::field::{self, dulac_line_integral, dulac_phi, region_of, FieldError, PhasePoint, Region};
use pucci_core::flow::{find_periodic_orbit, trace, Budget, Direction, FlowError, Verdict};
use pucci_core::params::{ExponentSet, Operator, ParamError, ProblemParams};
use pucci_core::radial::{max_residual, shoot_regular, RadialError, ShootOptions};
use serde::Serialize;
use thiserror::Error;

use crate::config::RunConfig;
use crate::output::{emit, events_json, json, radial_csv, sweep_csv, trajectory_csv};
use crate::{svg, Cli, Command, DirArg};

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Numerical(String),
}

impl CliError {
    pub fn code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl From<ParamError> for CliError {
    fn from(e: ParamError) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<ClassifyError> for CliError {
    fn from(e: ClassifyError) -> Self {
        match e {
            ClassifyError::SaddleUnavailable { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<FlowError> for CliError {
    fn from(e: FlowError) -> Self {
        match e {
            FlowError::OutsideDomain { .. } | FlowError::InvalidSectionStart { .. } => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<RadialError> for CliError {
    fn from(e: RadialError) -> Self {
        match e {
            RadialError::NonPositiveGamma(_) => CliError::Usage(e.to_string()),
            _ => CliError::Numerical(e.to_string()),
        }
    }
}

impl From<FieldError> for CliError {
    fn from(e: FieldError) -> Self {
        CliError::Numerical(e.to_string())
    }
}

struct Ctx {
    cfg: RunConfig,
    params: ProblemParams,
}

impl Ctx {
    fn p(&self) -> Result<f64, CliError> {
        let p = self.cfg.p.ok_or_else(|| CliError::Usage("--p is required".to_string()))?;
        if !(p > 1.0) || !p.is_finite() {
            return Err(ParamError::PBelowOne(p).into());
        }
        Ok(p)
    }

    fn budget(&self) -> Budget {
        Budget {
            horizon: self.cfg.horizon.unwrap_or(Budget::default().horizon),
            ..Budget::default()
        }
    }

    fn out(&self) -> Option<&Path> {
        self.cfg.out.as_deref()
    }
}

fn build_params(cfg: &RunConfig) -> Result<ProblemParams, CliError> {
    let op = match cfg.op.as_deref().unwrap_or("plus") {
        "plus" => Operator::MPlus,
        "minus" => Operator::MMinus,
        other => return Err(CliError::Usage(format!("unknown operator `{other}` (plus|minus)"))),
    };
    Ok(ProblemParams::new(
        cfg.lambda.unwrap_or(1.0),
        cfg.big_lambda.unwrap_or(1.0),
        op,
        cfg.n.unwrap_or(3),
        cfg.a.unwrap_or(0.0),
    )?)
}

fn parse_grid(grid: &str) -> Result<(usize, usize), CliError> {
    let bad = || CliError::Usage(format!("--grid expects WxH, got `{grid}`"));
    let (w, h) = grid.split_once(['x', 'X']).ok_or_else(bad)?;
    let (w, h): (usize, usize) = (w.trim().parse().map_err(|_| bad())?, h.trim().parse().map_err(|_| bad())?);
    if w == 0 || h == 0 {
        return Err(bad());
    }
    Ok((w, h))
}

fn parse_seed(seed: &[String], p: f64, params: &ProblemParams) -> Result<PhasePoint, CliError> {
    match seed {
        [k] if k == "gamma" => Ok(gamma_seed(p, params)),
        [k] if k == "upsilon" => Ok(upsilon_seed(p, params)?),
        [k, xz] if k == "point" => {
            let bad = || CliError::Usage(format!("malformed point `{xz}`, expected X,Z"));
            let (x, z) = xz.split_once(',').ok_or_else(bad)?;
            let (x, z): (f64, f64) = (x.trim().parse().map_err(|_| bad())?, z.trim().parse().map_err(|_| bad())?);
            if !(x.is_finite() && z.is_finite()) {
                return Err(bad());
            }
            Ok(PhasePoint::new(x, z))
        }
        _ => Err(CliError::Usage(format!(
            "malformed seed `{}`, expected gamma, upsilon or point X,Z",
            seed.join(" ")
        ))),
    }
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    cfg.apply_params(&cli.params);
    match &cli.command {
        Command::Exponents { p }
        | Command::Classify { p, .. }
        | Command::Portrait { p, .. }
        | Command::Singular { p, .. }
        | Command::Shoot { p, .. }
        | Command::Dulac { p, .. }
        | Command::Exterior { p, .. }
        | Command::Orbit { p, .. } => RunConfig::set(&mut cfg.p, *p),
        Command::Critical { .. } | Command::Sweep { .. } | Command::Config => {}
    }
    match &cli.command {
        Command::Orbit { horizon, out, .. } | Command::Sweep { horizon, out, .. } | Command::Singular { horizon, out, .. } => {
            RunConfig::set(&mut cfg.horizon, *horizon);
            RunConfig::set(&mut cfg.out, out.clone());
        }
        Command::Classify { horizon, .. } | Command::Exterior { horizon, .. } => {
            RunConfig::set(&mut cfg.horizon, *horizon)
        }
        Command::Critical { tol, horizon } => {
            RunConfig::set(&mut cfg.tol, *tol);
            RunConfig::set(&mut cfg.horizon, *horizon);
        }
        Command::Portrait { out, .. } | Command::Shoot { out, .. } => RunConfig::set(&mut cfg.out, out.clone()),
        Command::Exponents { .. } | Command::Dulac { .. } | Command::Config => {}
    }
    if let Command::Sweep { jobs, .. } = &cli.command {
        RunConfig::set(&mut cfg.jobs, *jobs);
    }
    if let Command::Config = cli.command {
        return emit(None, &cfg.to_toml());
    }
    let params = build_params(&cfg)?;
    let ctx = Ctx { cfg, params };
    log::info!("{:?} with {:?}", cli.command, ctx.params);
    match cli.command {
        Command::Exponents { .. } => exponents(&ctx),
        Command::Orbit { seed, direction, .. } => orbit(&ctx, &seed, direction),
        Command::Classify { .. } => classify(&ctx),
        Command::Critical { .. } => critical(&ctx),
        Command::Sweep { p_from, p_to, steps, .. } => run_sweep(&ctx, p_from, p_to, steps),
        Command::Portrait { grid, .. } => portrait(&ctx, &grid),
        Command::Singular { .. } => singular(&ctx),
        Command::Shoot { gamma, r_max, .. } => shoot(&ctx, gamma, r_max),
        Command::Dulac { line_integral, .. } => dulac(&ctx, line_integral),
        Command::Exterior { .. } => exterior(&ctx),
        Command::Config => unreachable!(),
    }
}

#[derive(Serialize)]
struct ExponentReport {
    operator: Operator,
    lambda: f64,
    #[serde(rename = "Lambda")]
    big_lambda: f64,
    #[serde(rename = "N")]
    n: u32,
    a: f64,
    n_tilde_plus: f64,
    n_tilde_minus: f64,
    n_tilde: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    alpha: Option<f64>,
    p_serrin: f64,
    p_pseudo: f64,
    p_sobolev: f64,
    ordering: &'static str,
    ordering_holds: bool,
}

fn exponents(ctx: &Ctx) -> Result<(), CliError> {
    let pr = &ctx.params;
    let p = match ctx.cfg.p {
        Some(_) => Some(ctx.p()?),
        None => None,
    };
    let set = ExponentSet {
        operator: pr.operator(),
        n_tilde_plus: pr.n_tilde_plus(),
        n_tilde_minus: pr.n_tilde_minus(),
        n_tilde: pr.n_tilde(),
        alpha: p.map_or(f64::NAN, |p| pr.alpha(p)),
        p_serrin: pr.p_serrin(),
        p_pseudo: pr.p_pseudo(),
        p_sobolev: pr.p_sobolev(),
    };
    let report = ExponentReport {
        operator: pr.operator(),
        lambda: pr.lambda(),
        big_lambda: pr.big_lambda(),
        n: pr.n(),
        a: pr.a(),
        n_tilde_plus: set.n_tilde_plus,
        n_tilde_minus: set.n_tilde_minus,
        n_tilde: set.n_tilde,
        p,
        alpha: p.map(|_| set.alpha),
        p_serrin: set.p_serrin,
        p_pseudo: set.p_pseudo,
        p_sobolev: set.p_sobolev,
        ordering: match pr.operator() {
            Operator::MPlus => "max(p_serrin, p_sobolev) <= p_pseudo",
            Operator::MMinus => "p_serrin <= p_pseudo <= p_sobolev",
        },
        ordering_holds: set.ordering_holds(),
    };
    emit(None, &json(&report))
}

#[derive(Serialize)]
struct FateReport {
    seed: PhasePoint,
    direction: &'static str,
    verdict: String,
    t_end: f64,
    blowup_time: Option<f64>,
    certificate: pucci_core::flow::Certificate,
    samples: usize,
    events: usize,
    csv: String,
    events_file: String,
}

fn orbit(ctx: &Ctx, seed: &[String], direction: DirArg) -> Result<(), CliError> {
    let p = ctx.p()?;
    let start = parse_seed(seed, p, &ctx.params)?;
    let dir = match direction {
        DirArg::Forward => Direction::Forward,
        DirArg::Backward => Direction::Backward,
    };
    let traced = trace(start, p, &ctx.params, dir, &ctx.budget())?;
    let prefix = ctx.out().map_or_else(|| PathBuf::from("orbit"), Path::to_path_buf);
    let csv = prefix.with_extension("csv");
    let events = prefix.with_extension("events.json");
    emit(Some(&csv), &trajectory_csv(&traced.trajectory))?;
    emit(Some(&events), &events_json(&traced.trajectory))?;
    let fate = &traced.fate;
    let report = FateReport {
        seed: start,
        direction: dir.name(),
        verdict: fate.verdict.name(),
        t_end: fate.t_end,
        blowup_time: fate.blowup_time,
        certificate: fate.certificate.clone(),
        samples: traced.trajectory.samples.len(),
        events: traced.trajectory.events.len(),
        csv: csv.display().to_string(),
        events_file: events.display().to_string(),
    };
    emit(None, &json(&report))?;
    if fate.verdict == Verdict::Undetermined {
        return Err(CliError::Numerical(format!("fate unresolved: {}", fate.certificate.note)));
    }
    Ok(())
}

#[derive(Serialize)]
struct ClassReport {
    p: f64,
    class: &'static str,
    verdict: String,
    detail: String,
    wall_radius: Option<f64>,
    concavity_crossings: usize,
    t_end: f64,
    blowup_time: Option<f64>,
    certificate: pucci_core::flow::Certificate,
}

fn classify(ctx: &Ctx) -> Result<(), CliError> {
    let p = ctx.p()?;
    let c = classify_p_with(p, &ctx.params, &ctx.budget())?;
    let report = ClassReport {
        p,
        class: c.class.name(),
        verdict: c.evidence.verdict.name(),
        detail: c.detail(),
        wall_radius: c.wall_radius,
        concavity_crossings: c.concavity_crossings,
        t_end: c.evidence.t_end,
        blowup_time: c.evidence.blowup_time,
        certificate: c.evidence.certificate.clone(),
    };
    emit(None, &json(&report))
}

fn critical(ctx: &Ctx) -> Result<(), CliError> {
    let tol = ctx.cfg.tol.unwrap_or(classify::DEFAULT_TOL);
    if !(tol > 0.0) {
        return Err(CliError::Usage(format!("--tol must be positive, got {tol}")));
    }
    let res = critical_exponent_with(&ctx.params, tol, &ctx.budget())?;
    emit(None, &json(&res))
}

fn run_sweep(ctx: &Ctx, from: f64, to: f64, steps: usize) -> Result<(), CliError> {
    if steps == 0 || !(from > 1.0) || !(to >= from) {
        return Err(CliError::Usage(format!(
            "sweep needs 1 < p-from <= p-to and steps >= 1 (got {from}, {to}, {steps})"
        )));
    }
    let ps: Vec<f64> = if steps == 1 {
        vec![from]
    } else {
        (0..steps).map(|k| from + (to - from) * k as f64 / (steps - 1) as f64).collect()
    };
    let jobs = ctx
        .cfg
        .jobs
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let rows = sweep(&ctx.params, &ps, jobs, &ctx.budget());
    emit(ctx.out(), &sweep_csv(&rows))
}

fn portrait(ctx: &Ctx, grid: &str) -> Result<(), CliError> {
    let p = ctx.p()?;
    let grid = parse_grid(grid)?;
    let out = ctx.out().map_or_else(|| PathBuf::from("portrait.svg"), Path::to_path_buf);
    emit(Some(&out), &svg::portrait(p, &ctx.params, grid))?;
    println!("{}", out.display());
    Ok(())
}

fn singular(ctx: &Ctx) -> Result<(), CliError> {
    let p = ctx.p()?;
    let cat = singular_catalog(p, &ctx.params, &ctx.budget())?;
    emit(ctx.out(), &json(&cat))
}

#[derive(Serialize)]
struct ShootReport {
    gamma: f64,
    p: f64,
    decay: Option<pucci_core::radial::DecayClass>,
    wall_radius: Option<f64>,
    samples: usize,
    max_residual: f64,
    concavity_changes: usize,
}

fn shoot(ctx: &Ctx, gamma: f64, r_max: Option<f64>) -> Result<(), CliError> {
    let p = ctx.p()?;
    let opts = ShootOptions {
        r_max,
        ..ShootOptions::default()
    };
    let sol = shoot_regular(gamma, p, &ctx.params, &opts)?;
    let out = ctx.out().map_or_else(|| PathBuf::from("shoot.csv"), Path::to_path_buf);
    emit(Some(&out), &radial_csv(&sol))?;
    let report = ShootReport {
        gamma,
        p,
        decay: sol.decay,
        wall_radius: sol.wall_radius,
        samples: sol.samples.len(),
        max_residual: max_residual(&sol, p, &ctx.params),
        concavity_changes: sol.concavity_changes.len(),
    };
    emit(None, &json(&report))
}

#[derive(Debug, Default, Serialize)]
struct SignCount {
    positive: usize,
    negative: usize,
    zero: usize,
    max_abs: f64,
}

impl SignCount {
    fn add(&mut self, v: f64) {
        if v.abs() <= DULAC_ZERO {
            self.zero += 1;
        } else if v > 0.0 {
            self.positive += 1;
        } else {
            self.negative += 1;
        }
        self.max_abs = self.max_abs.max(v.abs());
    }

    fn verdict(&self) -> &'static str {
        match (self.positive, self.negative, self.zero) {
            (0, 0, 0) => "no samples",
            (0, 0, _) => "=0",
            (_, 0, 0) => ">0",
            (0, _, 0) => "<0",
            _ => " changes sign",
        }
    }
}

/// Absolute threshold below which the weighted divergence counts as zero.
const DULAC_ZERO: f64 = 1e-12;

#[derive(Serialize)]
struct DulacReport {
    p: f64,
    exponents: (f64, f64),
    summary: String,
    r_plus: SignCount,
    r_minus: SignCount,
    #[serde(skip_serializing_if = "Option::is_none")]
    cycle_line_integral: Option<f64>,
}

fn dulac(ctx: &Ctx, line_integral: bool) -> Result<(), CliError> {
    let p = ctx.p()?;
    let pr = &ctx.params;
    let (mut plus, mut minus) = (SignCount::default(), SignCount::default());
    const GRID: usize = 60;
    for i in 1..GRID {
        for j in 1..GRID {
            let q = PhasePoint::new(
                i as f64 / GRID as f64 * pr.wall(),
                j as f64 / GRID as f64 * pr.n0_height(),
            );
            match region_of(q, pr) {
                Region::RPlus => plus.add(dulac_phi(q, p, pr)?),
                Region::RMinus => minus.add(dulac_phi(q, p, pr)?),
                _ => {}
            }
        }
    }
    let summary = format!("Φ{} in R+; Φ{} in R-", plus.verdict(), minus.verdict());
    let cycle_line_integral = if line_integral {
        let orbit = find_periodic_orbit(p, pr, None)?;
        let mut pts = orbit.points.clone();
        if let Some(&first) = pts.first() {
            pts.push(first);
        }
        Some(dulac_line_integral(&pts, p, pr)?)
    } else {
        None
    };
    let report = DulacReport {
        p,
        exponents: field::dulac_exponents(p),
        summary: summary.clone(),
        r_plus: plus,
        r_minus: minus,
        cycle_line_integral,
    };
    println!("{summary}");
    emit(None, &json(&report))
}

fn exterior(ctx: &Ctx) -> Result<(), CliError> {
    let p = ctx.p()?;
    let report = exterior_nonexistence_check(p, &ctx.params, None, &ctx.budget())?;
    println!("{:?}", report.verdict);
    emit(None, &json(&report))
}
