//! Configuration-driven experiment runner behind the `vccm` binary.

mod config;

use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;

pub use config::{
    load_user_systems, CertificateSource, ControllerKind, ExperimentConfig, RegionConfig, RunMode, Scenario,
    SynthesisConfig,
};

use crate::lpv_baselines::{
    fd_closed_loop_jacobian, instability_region, CompensatedLaw, GainSchedule, GlpvLaw, NaiveLaw, ParamSource,
};
use crate::model::{check_embedding, registry, EmbeddingReport, System};
use crate::realization::{Controller, RealizationOptions, RefSample, VccmController};
use crate::sim::{
    decay_fit, error_norms, gain_run, l2_gain_estimate, simulate, DecayFit, Reference, SimOptions, Trajectory,
};
use crate::synthesis::{
    fixed_gain_constraints, reference_design, synthesize, validate, BasisParam, Certificate, GridSpec, Mode,
    SolveError, SynthesisError, ValidationReport,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_INFEASIBLE: i32 = 2;
pub const EXIT_INVALID: i32 = 3;

pub const DEFAULT_SEED: u64 = 7;
pub const DEFAULT_OUT: &str = "vccm-out";
pub const OUT_ENV: &str = "VCCM_OUT";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error at `{path}`: {message}")]
    Schema { path: String, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    Infeasible,
    ValidationFailed,
}

impl Status {
    pub fn exit_code(self) -> i32 {
        match self {
            Status::Ok => EXIT_OK,
            Status::Infeasible => EXIT_INFEASIBLE,
            Status::ValidationFailed => EXIT_INVALID,
        }
    }
}

/// Output directory: `VCCM_OUT`, then `--out`, then the config, then the default.
pub fn resolve_output_dir(env: Option<&str>, cli: Option<&Path>, cfg: &ExperimentConfig) -> PathBuf {
    env.filter(|s| !s.is_empty())
        .map(PathBuf::from)
        .or_else(|| cli.map(Path::to_path_buf))
        .or_else(|| cfg.output.clone())
        .unwrap_or_else(|| PathBuf::from(DEFAULT_OUT))
}

/// Registry entries followed by user systems, as `(name, description)`.
pub fn list_systems(user_dir: Option<&Path>) -> Result<Vec<(String, String)>, CliError> {
    let mut specs = registry();
    if let Some(dir) = user_dir {
        specs.extend(load_user_systems(dir)?);
    }
    Ok(specs.into_iter().map(|s| (s.name, s.description)).collect())
}

#[derive(Debug, Clone)]
pub struct RunOptions {
    pub mode: RunMode,
    pub out: PathBuf,
    pub workers: Option<usize>,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunSummary {
    pub id: String,
    pub controller: ControllerKind,
    pub reference: usize,
    pub x0: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub disturbance: Option<usize>,
    pub csv: Option<String>,
    pub samples: usize,
    pub blowup_time: Option<f64>,
    pub final_state: Vec<f64>,
    pub final_reference: Vec<f64>,
    pub final_error: f64,
    pub max_error: f64,
    /// Fit of log|x − x*|.
    pub decay: Option<DecayFit>,
    /// Fit of log|χ* − x*| for controllers with a target generator.
    pub vtr_decay: Option<DecayFit>,
    /// RMS of each error component over the second half of the run.
    pub tail_rms: Vec<f64>,
    /// ‖z − z*‖₂ / ‖w − w*‖₂ of a disturbed run.
    pub l2_ratio: Option<f64>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct GainSummary {
    pub controller: ControllerKind,
    pub runs: usize,
    pub alpha_hat: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionSummary {
    pub controller: ControllerKind,
    pub parameter: f64,
    pub csv: String,
    pub cells: usize,
    pub unstable_fraction: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ControllerInfo {
    pub controller: ControllerKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub feedforward: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub a2_residual: Option<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct Summary {
    pub system: String,
    pub mode: RunMode,
    pub seed: u64,
    pub status: Status,
    pub embedding: EmbeddingReport,
    pub certificate: Option<Certificate>,
    pub validation: Option<ValidationReport>,
    pub synthesis_error: Option<String>,
    pub controllers: Vec<ControllerInfo>,
    pub runs: Vec<RunSummary>,
    pub gains: Vec<GainSummary>,
    pub regions: Vec<RegionSummary>,
}

#[derive(Debug, Clone)]
pub struct Outcome {
    pub summary: Summary,
    pub out_dir: PathBuf,
}

impl Outcome {
    pub fn exit_code(&self) -> i32 {
        self.summary.status.exit_code()
    }
}

enum CertOutcome {
    Ready(Box<Certificate>, ValidationReport),
    Infeasible(String),
    Invalid(Option<Box<Certificate>>, Option<ValidationReport>, String),
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn matrices(rows: &[Vec<f64>], what: &str) -> Result<nalgebra::DMatrix<f64>, CliError> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if r == 0 || rows.iter().any(|row| row.len() != c) {
        return Err(CliError::Config(format!("{what}: ragged or empty matrix")));
    }
    Ok(nalgebra::DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

fn certificate(sys: &System, syn: &SynthesisConfig) -> Result<CertOutcome, CliError> {
    let sd = sys
        .scheduled()
        .map_err(|e| CliError::Config(format!("scheduled dynamics: {e}")))?;
    let grid = GridSpec {
        dense_multiplier: syn.dense_multiplier,
        ..GridSpec::from_map(&sys.sched, syn.grid_points)
    };
    let source = match &syn.certificate {
        Some(s) => s.clone(),
        None => match reference_design(sys) {
            Ok(Some(_)) => CertificateSource::Reference,
            _ => CertificateSource::Synthesize,
        },
    };
    let cert = match source {
        CertificateSource::Reference => match reference_design(sys) {
            Ok(Some((c, _))) => c,
            Ok(None) => return Err(CliError::Config(format!("system `{}` has no built-in design", sys.name))),
            Err(e) => return Ok(CertOutcome::Invalid(None, None, e.to_string())),
        },
        CertificateSource::Inline(c) => *c,
        CertificateSource::File(path) => {
            let text = std::fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
            let de = &mut serde_json::Deserializer::from_str(&text);
            match serde_path_to_error::deserialize::<_, Certificate>(de) {
                Ok(c) => c,
                Err(e) => {
                    return Ok(CertOutcome::Invalid(
                        None,
                        None,
                        format!("certificate {} at `{}`: {}", path.display(), e.path(), e.inner()),
                    ))
                }
            }
        }
        CertificateSource::Synthesize => {
            let d = sys.dims;
            let basis = BasisParam::with_degrees(d.n, d.m, sys.sched.len(), syn.w_degree, syn.y_degree);
            let mode = match syn.alpha {
                Some(alpha) => Mode::Robust { alpha },
                None => Mode::Stabilization { lambda: syn.lambda },
            };
            let constraints = match &syn.gains {
                None => Vec::new(),
                Some(g) => {
                    let terms = g
                        .iter()
                        .map(|k| matrices(k, "synthesis.gains"))
                        .collect::<Result<Vec<_>, _>>()?;
                    fixed_gain_constraints(&basis, &terms).map_err(|e| CliError::Config(e.to_string()))?
                }
            };
            match synthesize(&sd, &basis, &grid, mode, &constraints, &syn.solver) {
                Ok(c) => c,
                Err(SynthesisError::Solve(e @ SolveError::Infeasible(_))) => return Ok(CertOutcome::Infeasible(e.to_string())),
                Err(SynthesisError::Solve(e @ SolveError::InconsistentConstraints(_))) => {
                    return Ok(CertOutcome::Infeasible(e.to_string()))
                }
                Err(e) => return Err(CliError::Config(format!("synthesis: {e}"))),
            }
        }
    };
    let shape_ok = cert.check_shape().is_ok()
        && cert.basis.n == sys.dims.n
        && cert.basis.m == sys.dims.m
        && cert.basis.w.n_vars == sys.sched.len();
    if !shape_ok {
        return Ok(CertOutcome::Invalid(
            Some(Box::new(cert)),
            None,
            "certificate does not match the system".into(),
        ));
    }
    match validate(&cert, &sd, &grid) {
        Ok(rep) if rep.accepted => Ok(CertOutcome::Ready(Box::new(cert), rep)),
        Ok(rep) => {
            let msg = format!("dense validation margin {:.6e} at `{}`", rep.margin, rep.worst_block);
            Ok(CertOutcome::Invalid(Some(Box::new(cert)), Some(rep), msg))
        }
        Err(e) => Ok(CertOutcome::Invalid(Some(Box::new(cert)), None, e.to_string())),
    }
}

fn build_controller(
    kind: ControllerKind,
    sys: &System,
    cert: Option<&Certificate>,
    opts: &RealizationOptions,
) -> Result<(Box<dyn Controller>, ControllerInfo), CliError> {
    let need_cert = || cert.cloned().ok_or_else(|| CliError::Config(format!("{} needs a certificate", kind.as_str())));
    let schedule = || GainSchedule::from_system(sys).map_err(|e| CliError::Config(format!("{}: {e}", kind.as_str())));
    let cfg = |e: &dyn std::fmt::Display| CliError::Config(format!("{}: {e}", kind.as_str()));
    let mut info = ControllerInfo {
        controller: kind,
        feedforward: None,
        a2_residual: None,
    };
    let ctrl: Box<dyn Controller> = match kind {
        ControllerKind::Vccm => {
            let c = VccmController::new(sys, need_cert()?, opts.clone()).map_err(|e| cfg(&e))?;
            info.feedforward = Some(format!("{:?}", c.mode()).to_lowercase());
            info.a2_residual = Some(c.a2_residual());
            Box::new(c)
        }
        ControllerKind::Glpv => Box::new(GlpvLaw::new(sys, need_cert()?).map_err(|e| cfg(&e))?),
        ControllerKind::Gsc1 => Box::new(NaiveLaw::new(sys, schedule()?, ParamSource::Exogenous).map_err(|e| cfg(&e))?),
        ControllerKind::Gsc2 => Box::new(CompensatedLaw::new(sys, schedule()?).map_err(|e| cfg(&e))?),
    };
    Ok((ctrl, info))
}

fn default_controllers(mode: RunMode, sys: &System) -> Vec<ControllerKind> {
    match mode {
        RunMode::Compare if sys.lpv.is_some() => vec![
            ControllerKind::Vccm,
            ControllerKind::Gsc1,
            ControllerKind::Gsc2,
            ControllerKind::Glpv,
        ],
        RunMode::Compare => vec![ControllerKind::Vccm, ControllerKind::Glpv],
        _ => vec![ControllerKind::Vccm],
    }
}

struct Job {
    ctrl: usize,
    reference: usize,
    x0: Vec<f64>,
    disturbance: Option<usize>,
    id: String,
}

fn tail_rms(tr: &Trajectory) -> Vec<f64> {
    let Some(&t_end) = tr.t.last() else {
        return Vec::new();
    };
    let n = tr.x.first().map_or(0, Vec::len);
    let mut acc = vec![0.0; n];
    let mut k = 0usize;
    for ((t, x), xs) in tr.t.iter().zip(&tr.x).zip(&tr.x_star) {
        if *t >= 0.5 * t_end {
            for i in 0..n {
                acc[i] += (x[i] - xs[i]).powi(2);
            }
            k += 1;
        }
    }
    acc.into_iter().map(|a| (a / k.max(1) as f64).sqrt()).collect()
}

fn summarize(job: &Job, kind: ControllerKind, tr: &Trajectory, sc: &Scenario, csv: Option<String>) -> RunSummary {
    let e = error_norms(tr);
    let mut notes = Vec::new();
    let decay = if job.disturbance.is_some() {
        None
    } else {
        decay_fit(&tr.t, &e, sc.fit_window)
            .map_err(|err| notes.push(format!("decay fit: {err}")))
            .ok()
    };
    let vtr_decay = if tr.chi_star.len() == tr.len() && job.disturbance.is_none() {
        let ev: Vec<f64> = tr
            .chi_star
            .iter()
            .zip(&tr.x_star)
            .map(|(c, s)| c.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
            .collect();
        decay_fit(&tr.t, &ev, sc.fit_window)
            .map_err(|err| notes.push(format!("target generator fit: {err}")))
            .ok()
    } else {
        None
    };
    let l2_ratio = job.disturbance.map(|_| l2_gain_estimate(&[gain_run(tr)]));
    if let Some(tb) = tr.blowup_time {
        notes.push(format!("state left the bound at t = {tb}"));
    }
    RunSummary {
        id: job.id.clone(),
        controller: kind,
        reference: job.reference,
        x0: job.x0.clone(),
        disturbance: job.disturbance,
        csv,
        samples: tr.len(),
        blowup_time: tr.blowup_time,
        final_state: tr.final_state().to_vec(),
        final_reference: tr.x_star.last().cloned().unwrap_or_default(),
        final_error: e.last().copied().unwrap_or(f64::NAN),
        max_error: e.iter().copied().fold(0.0, f64::max),
        decay,
        vtr_decay,
        tail_rms: tail_rms(tr),
        l2_ratio,
        notes,
    }
}

fn failed_run(job: &Job, kind: ControllerKind, err: String) -> RunSummary {
    RunSummary {
        id: job.id.clone(),
        controller: kind,
        reference: job.reference,
        x0: job.x0.clone(),
        disturbance: job.disturbance,
        csv: None,
        samples: 0,
        blowup_time: None,
        final_state: Vec::new(),
        final_reference: Vec::new(),
        final_error: f64::NAN,
        max_error: f64::NAN,
        decay: None,
        vtr_decay: None,
        tail_rms: Vec::new(),
        l2_ratio: None,
        notes: vec![format!("simulation failed: {err}")],
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| io_err(parent, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| io_err(path, e))
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, CliError> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        if w == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }
        b = b.num_threads(w);
    }
    b.build().map_err(|e| CliError::Config(e.to_string()))
}

fn run_scenario(
    sys: &System,
    controllers: &[(ControllerKind, Box<dyn Controller>)],
    sc: &Scenario,
    out: &Path,
    workers: Option<usize>,
) -> Result<(Vec<RunSummary>, Vec<GainSummary>), CliError> {
    let references = sc
        .references
        .iter()
        .map(|r| Reference::new(sys, r).map_err(|e| CliError::Config(format!("scenario.references: {e}"))))
        .collect::<Result<Vec<_>, _>>()?;
    let disturbances = sc.all_disturbances();
    if sc.x0.is_empty() && disturbances.is_empty() {
        return Err(CliError::Config("scenario needs `x0` entries or disturbances".into()));
    }
    if let Some(bad) = sc.x0.iter().position(|x| x.len() != sys.dims.n) {
        return Err(CliError::Config(format!(
            "scenario.x0[{bad}] has {} entries, system has n = {}",
            sc.x0[bad].len(),
            sys.dims.n
        )));
    }
    if let Some(bad) = disturbances.iter().position(|d| d.channel() >= sys.dims.p) {
        return Err(CliError::Config(format!("disturbance {bad} uses channel {} of p = {}", disturbances[bad].channel(), sys.dims.p)));
    }
    let mut jobs = Vec::new();
    for (ci, (kind, _)) in controllers.iter().enumerate() {
        for (ri, reference) in references.iter().enumerate() {
            for (xi, x0) in sc.x0.iter().enumerate() {
                jobs.push(Job {
                    ctrl: ci,
                    reference: ri,
                    x0: x0.clone(),
                    disturbance: None,
                    id: format!("{}_r{ri}_x{xi}", kind.as_str()),
                });
            }
            if !disturbances.is_empty() {
                let start = reference
                    .at(0.0)
                    .map_err(|e| CliError::Config(format!("scenario.references[{ri}]: {e}")))?
                    .x;
                for di in 0..disturbances.len() {
                    jobs.push(Job {
                        ctrl: ci,
                        reference: ri,
                        x0: start.clone(),
                        disturbance: Some(di),
                        id: format!("{}_r{ri}_d{di}", kind.as_str()),
                    });
                }
            }
        }
    }
    let opts = SimOptions {
        t_end: sc.t_end,
        dt: sc.dt,
        hold: sc.hold,
    };
    let results: Vec<Result<(RunSummary, Option<crate::sim::GainRun>), CliError>> = pool(workers)?.install(|| {
        jobs.par_iter()
            .map(|job| {
                let (kind, ctrl) = &controllers[job.ctrl];
                let d = job.disturbance.map(|k| &disturbances[k]);
                match simulate(&sys.plant, ctrl.as_ref(), &references[job.reference], d, &job.x0, &opts) {
                    Ok(tr) => {
                        let name = format!("runs/{}.csv", job.id);
                        let mut buf = Vec::new();
                        tr.write_csv(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
                        write_file(&out.join(&name), &buf)?;
                        let g = job.disturbance.map(|_| gain_run(&tr));
                        Ok((summarize(job, *kind, &tr, sc, Some(name)), g))
                    }
                    Err(e) => Ok((failed_run(job, *kind, e.to_string()), None)),
                }
            })
            .collect()
    });
    let mut runs = Vec::with_capacity(results.len());
    let mut per_ctrl: Vec<Vec<crate::sim::GainRun>> = vec![Vec::new(); controllers.len()];
    for (job, r) in jobs.iter().zip(results) {
        let (s, g) = r?;
        if let Some(g) = g {
            per_ctrl[job.ctrl].push(g);
        }
        runs.push(s);
    }
    let gains = controllers
        .iter()
        .zip(per_ctrl)
        .filter(|(_, g)| !g.is_empty())
        .map(|((kind, _), g)| GainSummary {
            controller: *kind,
            runs: g.len(),
            alpha_hat: l2_gain_estimate(&g),
        })
        .collect();
    Ok((runs, gains))
}

fn run_regions(
    sys: &System,
    rc: &RegionConfig,
    ctrl: &dyn Controller,
    out: &Path,
    workers: Option<usize>,
) -> Result<Vec<RegionSummary>, CliError> {
    if ctrl.state_dim() != 0 {
        return Err(CliError::Config("region maps need a controller without internal state".into()));
    }
    let family = sys
        .family()
        .ok_or_else(|| CliError::Config(format!("system `{}` has no equilibrium family", sys.name)))?;
    if rc.lo.len() != sys.dims.n {
        return Err(CliError::Config(format!("region.lo needs {} entries", sys.dims.n)));
    }
    let pool = pool(workers)?;
    rc.references
        .iter()
        .enumerate()
        .map(|(k, &p)| {
            let e = family.at(p).map_err(|e| CliError::Config(format!("region.references[{k}]: {e}")))?;
            let r = RefSample {
                x: e.x,
                u: e.u,
                w: e.w,
                x_dot: vec![0.0; sys.dims.n],
            };
            let map = pool
                .install(|| instability_region(&rc.lo, &rc.hi, &rc.points, |x| fd_closed_loop_jacobian(&sys.plant, ctrl, x, &r)))
                .map_err(|e| CliError::Config(format!("region: {e}")))?;
            let name = format!("regions/{}_p{k}.csv", rc.controller.as_str());
            let mut buf = Vec::new();
            map.write_csv(&mut buf).map_err(|e| CliError::Io(e.to_string()))?;
            write_file(&out.join(&name), &buf)?;
            Ok(RegionSummary {
                controller: rc.controller,
                parameter: p,
                csv: name,
                cells: map.cells.len(),
                unstable_fraction: map.unstable_fraction(),
            })
        })
        .collect()
}

/// Runs one experiment, writing `summary.json` and the run artifacts into `opts.out`.
pub fn run(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<Outcome, CliError> {
    if let Some(m) = cfg.mode {
        if m != opts.mode {
            return Err(CliError::Config(format!(
                "config mode `{}` does not match command `{}`",
                m.as_str(),
                opts.mode.as_str()
            )));
        }
    }
    let (_, sys) = cfg.resolve_system()?;
    let seed = opts.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let realization = RealizationOptions {
        seed,
        ..cfg.realization.clone()
    };
    let out = opts.out.clone();
    std::fs::create_dir_all(&out).map_err(|e| io_err(&out, e))?;

    let mut summary = Summary {
        system: sys.name.clone(),
        mode: opts.mode,
        seed,
        status: Status::Ok,
        embedding: check_embedding(&sys, cfg.embedding_samples, seed, None),
        certificate: None,
        validation: None,
        synthesis_error: None,
        controllers: Vec::new(),
        runs: Vec::new(),
        gains: Vec::new(),
        regions: Vec::new(),
    };

    let kinds: Vec<ControllerKind> = match opts.mode {
        RunMode::Synth | RunMode::Validate => Vec::new(),
        RunMode::Region => vec![cfg.region.as_ref().map_or(ControllerKind::Gsc1, |r| r.controller)],
        _ if cfg.controllers.is_empty() => default_controllers(opts.mode, &sys),
        _ => cfg.controllers.clone(),
    };
    let needs_cert = matches!(opts.mode, RunMode::Synth | RunMode::Validate)
        || kinds.iter().any(|k| matches!(k, ControllerKind::Vccm | ControllerKind::Glpv));

    let mut cert = None;
    if needs_cert {
        match certificate(&sys, &cfg.synthesis)? {
            CertOutcome::Ready(c, rep) => {
                summary.validation = Some(rep);
                cert = Some(*c);
            }
            CertOutcome::Infeasible(msg) => {
                summary.status = Status::Infeasible;
                summary.synthesis_error = Some(msg);
            }
            CertOutcome::Invalid(c, rep, msg) => {
                summary.status = Status::ValidationFailed;
                summary.synthesis_error = Some(msg);
                summary.validation = rep;
                summary.certificate = c.map(|c| *c);
            }
        }
    }
    if let Some(c) = &cert {
        summary.certificate = Some(c.clone());
        if opts.mode == RunMode::Synth {
            let text = serde_json::to_string_pretty(c).map_err(|e| CliError::Io(e.to_string()))?;
            write_file(&out.join("certificate.json"), (text + "\n").as_bytes())?;
        }
    }

    if summary.status == Status::Ok && !kinds.is_empty() {
        let mut controllers = Vec::new();
        for &k in &kinds {
            let (c, info) = build_controller(k, &sys, cert.as_ref(), &realization)?;
            summary.controllers.push(info);
            controllers.push((k, c));
        }
        match opts.mode {
            RunMode::Region => {
                let rc = cfg
                    .region
                    .as_ref()
                    .ok_or_else(|| CliError::Config("region mode needs a `region` section".into()))?;
                summary.regions = run_regions(&sys, rc, controllers[0].1.as_ref(), &out, opts.workers)?;
            }
            _ => {
                let (runs, gains) = run_scenario(&sys, &controllers, &cfg.scenario, &out, opts.workers)?;
                summary.runs = runs;
                summary.gains = gains;
            }
        }
    }

    let text = serde_json::to_string_pretty(&summary).map_err(|e| CliError::Io(e.to_string()))?;
    write_file(&out.join("summary.json"), (text + "\n").as_bytes())?;
    Ok(Outcome { summary, out_dir: out })
}
