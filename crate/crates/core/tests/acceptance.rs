use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::PathBuf;
use std::process::Command;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use proptest::test_runner::{Config, TestRunner};
use rayon::prelude::*;

use vccm_core::geodesic::{solve_geodesic, ConstantMetric, GeodesicOptions, Path};
use vccm_core::lpv_baselines::{
    fd_closed_loop_jacobian, hidden_coupling, instability_region, CompensatedLaw, GainSchedule, GlpvLaw, NaiveLaw,
    ParamSource, SymbolicClosedLoop,
};
use vccm_core::model::{check_embedding, registry_names, system_by_name, System, SystemSpec};
use vccm_core::realization::{
    quadrature_control_path, Controller, FeedforwardChoice, RealizationOptions, RefSample, VccmController,
};
use vccm_core::sim::{
    decay_fit, error_norms, gain_run, l2_gain_estimate, simulate, Disturbance, Reference, ReferenceSpec, SimOptions,
    Trajectory,
};
use vccm_core::symdyn::eval;
use vccm_core::synthesis::{
    assemble_robust, compose_gain, fixed_gain_constraints, min_gain, reference_design, synthesize, validate,
    BasisParam, Certificate, GridSpec, Mode, Sign, SolveOptions, DEFAULT_A1,
};

type Check = Result<String, String>;

macro_rules! ensure {
    ($cond:expr, $($msg:tt)+) => {
        if !$cond {
            return Err(format!($($msg)+));
        }
    };
}

fn err<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

const PAPER_K: (f64, f64) = (-2.2742, -1.0063);

fn scalar_cert(k0: f64, k1: f64, mode: Mode) -> Certificate {
    Certificate::from_matrices(
        BasisParam::with_degrees(1, 1, 1, 0, 1),
        &[DMatrix::from_element(1, 1, 1.0)],
        &[DMatrix::from_element(1, 1, k0), DMatrix::from_element(1, 1, k1)],
        mode,
        DEFAULT_A1,
    )
}

fn sys(name: &str) -> Result<System, String> {
    system_by_name(name).map_err(err)
}

fn run(
    sys: &System,
    ctrl: &dyn Controller,
    reference: &ReferenceSpec,
    d: Option<&Disturbance>,
    x0: &[f64],
    t_end: f64,
    dt: f64,
) -> Result<Trajectory, String> {
    let r = Reference::new(sys, reference).map_err(err)?;
    let opts = SimOptions {
        t_end,
        dt,
        ..SimOptions::default()
    };
    simulate(&sys.plant, ctrl, &r, d, x0, &opts).map_err(err)
}

fn setpoint(value: f64) -> ReferenceSpec {
    ReferenceSpec::Setpoint { value }
}

fn furnace_ref(r: f64) -> RefSample {
    RefSample {
        x: vec![0.0, r],
        u: vec![(-r).exp() - 1.0],
        w: vec![r],
        x_dot: vec![0.0, 0.0],
    }
}

fn embedding_soundness() -> Check {
    let mut worst = 0.0f64;
    for name in registry_names() {
        let rep = check_embedding(&sys(&name)?, 1000, 7, None);
        ensure!(rep.evaluated > 0, "{name}: no sample evaluated");
        ensure!(rep.max_residual <= 1e-9, "{name}: residual {:.3e}", rep.max_residual);
        worst = worst.max(rep.max_residual);
    }
    Ok(format!("max residual {worst:.1e} over 4 systems"))
}

fn scalar_rate_law() -> Check {
    let s = sys("scalar-cubic")?;
    let (xe, x0) = (0.5, 1.2);
    let mut out = Vec::new();
    for k0 in [0.0, -1.0, -2.2742] {
        let rate = 1.0 - k0;
        let c = VccmController::new(&s, scalar_cert(k0, -1.0, Mode::Stabilization { lambda: rate }), Default::default())
            .map_err(err)?;
        let tr = run(&s, &c, &setpoint(xe), None, &[x0], 4.0, 1e-3)?;
        let lin = tr
            .t
            .iter()
            .zip(&tr.x)
            .map(|(t, x)| (x[0] - xe - (x0 - xe) * (-rate * t).exp()).abs())
            .fold(0.0, f64::max);
        ensure!(lin < 1e-8, "k0={k0}: deviation from linear error dynamics {lin:.2e}");
        let fit = decay_fit(&tr.t, &error_norms(&tr), None).map_err(err)?;
        ensure!((fit.lambda / rate - 1.0).abs() < 0.01, "k0={k0}: fitted {} vs {rate}", fit.lambda);
        out.push(format!("{:.4}", fit.lambda));
    }
    Ok(format!("fitted rates {}", out.join(", ")))
}

fn glpv_setpoint_failure() -> Check {
    let s = sys("scalar-cubic")?;
    let cert = scalar_cert(0.0, -1.0, Mode::Stabilization { lambda: 1.0 });
    let glpv = GlpvLaw::new(&s, cert.clone()).map_err(err)?;
    let tr = run(&s, &glpv, &setpoint(1.0), None, &[1.05], 10.0, 1e-3)?;
    let e = error_norms(&tr);
    let grew = *e.last().unwrap() > 10.0 * e[0];
    ensure!(tr.blowup_time.is_some() || grew, "GLPV stayed near the set-point");
    let vccm = VccmController::new(&s, cert, Default::default()).map_err(err)?;
    let tr = run(&s, &vccm, &setpoint(1.0), None, &[1.05], 10.0, 1e-3)?;
    let fit = decay_fit(&tr.t, &error_norms(&tr), None).map_err(err)?;
    ensure!((fit.lambda - 1.0).abs() < 0.01, "VCCM fitted rate {}", fit.lambda);
    let glpv_note = if grew { "error growth" } else { "blow-up" };
    Ok(format!("GLPV {glpv_note}, VCCM rate {:.4}", fit.lambda))
}

fn paper_gain_equilibria() -> Check {
    let s = sys("scalar-cubic")?;
    let law = GlpvLaw::new(&s, scalar_cert(PAPER_K.0, PAPER_K.1, Mode::Robust { alpha: 1.0 })).map_err(err)?;
    let xe = 1.9;
    let r = RefSample {
        x: vec![xe],
        u: vec![xe - xe * xe * xe],
        w: vec![0.0],
        x_dot: vec![0.0],
    };
    let f = |x: f64| -> Result<f64, String> {
        let u = law.output(0.0, &[x], &[], &r).map_err(err)?.u;
        Ok(s.plant.f(&[x], &u, &[0.0]).map_err(err)?[0])
    };
    let (mut a, mut b) = (-0.5, 0.0);
    ensure!(f(a)? * f(b)? < 0.0, "no sign change on [-0.5, 0]");
    for _ in 0..80 {
        let m = 0.5 * (a + b);
        if f(a)? * f(m)? <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    let root = 0.5 * (a + b);
    ensure!((root + 0.1766).abs() <= 1e-3, "root {root}");
    let tr = run(&s, &law, &setpoint(-2.0), None, &[2.0], 10.0, 1e-3)?;
    let last = tr.final_state()[0];
    ensure!((last - 0.3625).abs() <= 1e-3, "settled at {last}");
    Ok(format!("x_e=1.9 root {root:.5}, x_e=-2 run settles at {last:.5}"))
}

fn robust_feasibility() -> Check {
    let s = sys("scalar-cubic")?;
    let sd = s.scheduled().map_err(err)?;
    let m = sd.eval(&[1.0]).map_err(err)?;
    let q = (m.c.transpose() * &m.c)[(0, 0)];
    let r = (m.d.transpose() * &m.d)[(0, 0)];
    ensure!((q - 1.0).abs() < 1e-12 && (r - 0.01).abs() < 1e-12, "weights Q={q}, R={r}");

    let cert = scalar_cert(PAPER_K.0, PAPER_K.1, Mode::Robust { alpha: 1.0 });
    let x = cert.coefficients().map_err(err)?;
    let mut margin = f64::INFINITY;
    for b in assemble_robust(&sd, &cert.basis, &GridSpec::from_map(&s.sched, 401), 1.0).map_err(err)? {
        let eig = b.eval(&x).symmetric_eigenvalues();
        let m = match b.sign {
            Sign::NegDef => -eig.max(),
            Sign::PosDef => eig.min(),
        };
        margin = margin.min(m);
    }
    ensure!(margin > 0.0, "paper gains margin {margin:.3e} on 401 points");
    // 41 synthesis points refine to a 401-point validation grid
    let rep = validate(&cert, &sd, &GridSpec::from_map(&s.sched, 41)).map_err(err)?;
    ensure!(rep.accepted && rep.points >= 401, "dense validation margin {:.3e}", rep.margin);

    let basis = BasisParam::with_degrees(1, 1, 1, 0, 1);
    let solved = synthesize(&sd, &basis, &GridSpec::from_map(&s.sched, 41), Mode::Robust { alpha: 1.0 }, &[], &SolveOptions::default())
        .map_err(err)?;
    ensure!(solved.margin >= 1e-6, "solver margin {:.3e}", solved.margin);
    Ok(format!("paper gains margin {margin:.3e}, solver margin {:.3e}", solved.margin))
}

fn gsc1_instability_region() -> Check {
    let s = sys("gs-furnace")?;
    let law = NaiveLaw::new(&s, GainSchedule::from_system(&s).map_err(err)?, ParamSource::Exogenous).map_err(err)?;
    let cl = SymbolicClosedLoop::new(&s.plant, law.law_exprs()).map_err(err)?;
    let (lo, hi, step) = (-3.0f64, 1.0, 0.02);
    let n = ((hi - lo) / step).round() as usize + 1;
    let mut out = Vec::new();
    for r in [-1.0, 0.0, 1.0] {
        let map = instability_region(&[0.0, lo], &[0.0, hi], &[2, n], |x| Ok(cl.jacobian(x, &[r])?)).map_err(err)?;
        let boundary = -(4.0 + (-r).exp()).ln();
        let (mut stable, mut unstable) = (0, 0);
        for c in &map.cells {
            if c.hurwitz {
                stable += 1;
            } else {
                unstable += 1;
            }
            if (c.x[1] - boundary).abs() > step {
                ensure!(c.hurwitz == (c.x[1] > boundary), "r={r}: x2={} mislabelled", c.x[1]);
            }
        }
        ensure!(stable > 0 && unstable > 0, "r={r}: no flip");
        out.push(format!("{boundary:.4}"));
    }
    Ok(format!("flips at x2 = {}", out.join(", ")))
}

fn char_poly_is_double_root(j: &DMatrix<f64>, root: f64) -> bool {
    let tr = j.trace();
    let det = j.determinant();
    (tr - 2.0 * root).abs() < 1e-6 && (det - root * root).abs() < 1e-6
}

fn hidden_coupling_and_spectra() -> Check {
    let s = sys("gs-furnace")?;
    let gain = GainSchedule::from_system(&s).map_err(err)?;
    let fam = s.family().ok_or("furnace has no family")?;
    let eqsub = NaiveLaw::new(&s, gain.clone(), ParamSource::State).map_err(err)?;
    let kh = hidden_coupling(fam, &gain, eqsub.law_exprs());
    for i in 0..=50 {
        let p = fam.range[0] + (fam.range[1] - fam.range[0]) * i as f64 / 50.0;
        let v = eval(&kh[0][0], &[("p", p)]).map_err(err)?;
        ensure!((v - 3.0).abs() <= 1e-9, "K_h({p}) = {v}");
    }
    let cl = SymbolicClosedLoop::new(&s.plant, eqsub.law_exprs()).map_err(err)?;
    let gsc2 = CompensatedLaw::new(&s, gain).map_err(err)?;
    let (cert, _) = reference_design(&s).map_err(err)?.ok_or("no furnace design")?;
    let vccm = VccmController::new(&s, cert, Default::default()).map_err(err)?;
    let half = 3f64.sqrt() / 2.0;
    for r in [-0.5, 0.0, 1.0, 1.5] {
        let j = cl.jacobian(&[0.0, r], &[r]).map_err(err)?;
        let mut eig: Vec<(f64, f64)> = j.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect();
        eig.sort_by(|a, b| a.1.total_cmp(&b.1));
        let ok = eig.iter().all(|e| (e.0 + 0.5).abs() < 1e-6) && (eig[0].1 + half).abs() < 1e-6 && (eig[1].1 - half).abs() < 1e-6;
        ensure!(ok, "r={r}: substituted law eigenvalues {eig:?}");
        for (name, law) in [("gsc2", &gsc2 as &dyn Controller), ("vccm", &vccm)] {
            let j = fd_closed_loop_jacobian(&s.plant, law, &[0.0, r], &furnace_ref(r)).map_err(err)?;
            ensure!(char_poly_is_double_root(&j, -2.0), "r={r}: {name} Jacobian {j}");
        }
    }
    Ok("K_h = 3, eigenvalues -0.5±0.8660i and -2 (double) for gsc2 and vccm".into())
}

fn tail_rms(tr: &Trajectory, from: f64) -> f64 {
    let e: Vec<f64> = tr
        .t
        .iter()
        .zip(tr.x.iter().zip(&tr.x_star))
        .filter(|(t, _)| **t >= from)
        .map(|(_, (x, xs))| (x[1] - xs[1]).powi(2))
        .collect();
    (e.iter().sum::<f64>() / e.len() as f64).sqrt()
}

fn gsc2_residual_error() -> Check {
    let s = sys("gs-furnace")?;
    let reference = ReferenceSpec::Expr { p: "sin(t)".into() };
    let gsc2 = CompensatedLaw::new(&s, GainSchedule::from_system(&s).map_err(err)?).map_err(err)?;
    let (cert, _) = reference_design(&s).map_err(err)?.ok_or("no furnace design")?;
    let vccm = VccmController::new(&s, cert, Default::default()).map_err(err)?;
    let g = tail_rms(&run(&s, &gsc2, &reference, None, &[0.5, 1.0], 20.0, 2e-3)?, 10.0);
    let v = tail_rms(&run(&s, &vccm, &reference, None, &[0.5, 1.0], 20.0, 2e-3)?, 10.0);
    ensure!(g > 0.05, "GSC2 tail RMS {g}");
    ensure!(v < 1e-3, "VCCM tail RMS {v}");
    Ok(format!("x2 tail RMS: gsc2 {g:.3}, vccm {v:.1e}"))
}

fn example_two_vtr() -> Check {
    let s = sys("ex2")?;
    let (cert, _) = reference_design(&s).map_err(err)?.ok_or("no ex2 design")?;
    let c = VccmController::new(&s, cert, Default::default()).map_err(err)?;
    let reference = ReferenceSpec::Steps {
        times: vec![0.0],
        values: vec![0.5],
    };
    let tr = run(&s, &c, &reference, None, &[0.3, -0.4], 20.0, 2e-3)?;
    ensure!(tr.chi_star.len() == tr.len(), "no virtual target recorded");
    let fx = decay_fit(&tr.t, &error_norms(&tr), None).map_err(err)?;
    ensure!(fx.lambda > 0.5, "state error rate {}", fx.lambda);
    let e: Vec<f64> = tr.chi_star.iter().zip(&tr.x_star).map(|(c, x)| (c[1] - x[1]).abs()).collect();
    let peak = (0..e.len()).max_by(|&a, &b| e[a].total_cmp(&e[b])).unwrap();
    ensure!(tr.t[peak] < 5.0 && e[e.len() - 1] < 1e-2 * e[peak], "virtual target error peaks late or stalls");
    let fc = decay_fit(&tr.t, &e, Some([10.0, 19.0])).map_err(err)?;
    ensure!(fc.lambda > 0.5, "virtual target error rate {}", fc.lambda);
    Ok(format!("rates: |x-x*| {:.3}, |chi2*-x2*| {:.3}", fx.lambda, fc.lambda))
}

fn disturbed_scalar() -> Result<System, String> {
    let path = workspace().join("configs/systems/scalar-cubic-disturbed.json");
    let text = std::fs::read_to_string(&path).map_err(|e| format!("{}: {e}", path.display()))?;
    let spec: SystemSpec = serde_json::from_str(&text).map_err(err)?;
    spec.build().map_err(err)
}

fn gain_composition() -> Check {
    let s = disturbed_scalar()?;
    let sd = s.scheduled().map_err(err)?;
    let grid = GridSpec::from_map(&s.sched, 41);
    let basis = BasisParam::with_degrees(1, 1, 1, 0, 1);
    let k = [DMatrix::from_element(1, 1, PAPER_K.0), DMatrix::from_element(1, 1, PAPER_K.1)];
    let fixed = fixed_gain_constraints(&basis, &k).map_err(err)?;
    let opts = SolveOptions::default();
    let (alpha, cert) = min_gain(&sd, &basis, &grid, &fixed, &opts, 1e-3).map_err(err)?;
    ensure!(validate(&cert, &sd, &grid).map_err(err)?.accepted, "α certificate rejected");
    let ident = sd.with_identity_output();
    let (alpha_wchi, c2) = min_gain(&ident, &basis, &grid, &fixed, &opts, 1e-3).map_err(err)?;
    ensure!(validate(&c2, &ident, &grid).map_err(err)?.accepted, "α_wχ certificate rejected");
    // output deviation per unit state deviation: |[1, 0.1·K(σ)]|
    let alpha_chizeta = grid
        .validation_grid()
        .iter()
        .map(|sg| (1.0 + (0.1 * cert.gain_at(sg)[(0, 0)]).powi(2)).sqrt())
        .fold(0.0, f64::max);
    let bound = compose_gain(alpha, alpha_wchi, alpha_chizeta);

    let ropts = RealizationOptions {
        feedforward: FeedforwardChoice::Vtr,
        ..RealizationOptions::default()
    };
    let ctrl = VccmController::new(&s, cert, ropts).map_err(err)?;
    let jobs: Vec<(f64, Disturbance)> = [-1.0, 0.0, 1.0]
        .into_iter()
        .flat_map(|p| Disturbance::suite().into_iter().map(move |d| (p, d)))
        .collect();
    let runs = jobs
        .par_iter()
        .map(|(p, d)| run(&s, &ctrl, &setpoint(*p), Some(d), &[*p], 10.0, 5e-3).map(|tr| gain_run(&tr)))
        .collect::<Result<Vec<_>, _>>()?;
    let alpha_hat = l2_gain_estimate(&runs);
    ensure!(alpha_hat > 0.0, "zero simulated gain");
    ensure!(alpha_hat <= bound, "α̂ {alpha_hat} exceeds α̃ {bound}");
    Ok(format!(
        "α̂ {alpha_hat:.3} ≤ α̃ {bound:.3} (α {alpha:.3}, α_wχ {alpha_wchi:.3}, α_χζ {alpha_chizeta:.3}, {} runs)",
        runs.len()
    ))
}

fn path_oracle(k: &dyn Fn(&DVector<f64>) -> DMatrix<f64>, path: &Path, mu: &DVector<f64>, steps: usize) -> DVector<f64> {
    let mut nu = mu.clone();
    let nodes = path.nodes();
    let per = steps / path.segments();
    for seg in nodes.windows(2) {
        let d = &seg[1] - &seg[0];
        for j in 0..per {
            let l = (j as f64 + 0.5) / per as f64;
            nu += k(&(&seg[0] * (1.0 - l) + &seg[1] * l)) * &d / per as f64;
        }
    }
    nu
}

fn geodesic_and_path_oracles() -> Check {
    let mut runner = TestRunner::new(Config {
        cases: 64,
        failure_persistence: None,
        ..Config::default()
    });
    let pts = prop::collection::vec(-2.0f64..2.0, 10);
    let mats = prop::collection::vec(-1.5f64..1.5, 4);
    let worst = std::cell::Cell::new([0.0f64; 3]);
    runner
        .run(&(pts, mats), |(p, m)| {
            let v = |i: usize| DVector::from_column_slice(&p[i..i + 2]);
            let a = DMatrix::from_row_slice(2, 2, &m);
            let metric = a.transpose() * &a + DMatrix::identity(2, 2) * 0.5;
            let (from, to, x) = (v(0), v(2), v(4));
            let g = solve_geodesic(&ConstantMetric(metric.clone()), &x, &from, &to, &GeodesicOptions::default()).unwrap();
            let delta = &to - &from;
            let exact = (delta.transpose() * &metric * &delta)[(0, 0)];
            let e1 = (g.energy - exact).abs() / exact.max(1.0);
            prop_assert!(e1 <= 1e-12, "energy error {e1}");
            prop_assert_eq!(g.path, Path::straight(&from, &to, GeodesicOptions::default().segments).unwrap());

            let wiggly = Path::new(vec![from.clone(), v(4), v(6), v(8), to.clone()]).unwrap();
            let mu = DVector::from_column_slice(&[0.3, -0.7]);
            let kc = a.clone();
            let nu = quadrature_control_path(|_, _| kc.clone(), &wiggly, &x, &mu, 4);
            let e2 = (&nu - (&mu + &a * &delta)).amax();
            prop_assert!(e2 <= 1e-9, "constant-gain error {e2}");

            let kv = |c: &DVector<f64>| {
                DMatrix::from_row_slice(2, 2, &[c[0].sin() + m[0] * c[1], c[1] * c[1], (c[0] * c[1]).cos(), 1.0 + m[3] * c[0] * c[0]])
            };
            let quad = quadrature_control_path(|c, _| kv(c), &wiggly, &x, &mu, 16);
            let oracle = path_oracle(&kv, &wiggly, &mu, 100_000);
            let e3 = (&quad - &oracle).amax();
            prop_assert!(e3 <= 1e-6, "varying-gain error {e3}");
            let mut w = worst.get();
            for (w, e) in w.iter_mut().zip([e1, e2, e3]) {
                *w = w.max(e);
            }
            worst.set(w);
            Ok(())
        })
        .map_err(err)?;
    let w = worst.get();
    Ok(format!("64 cases, worst errors {:.1e} / {:.1e} / {:.1e}", w[0], w[1], w[2]))
}

fn workspace() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../..")
}

fn determinism() -> Check {
    let config = workspace().join("configs/paper_scalar.json");
    let dirs = [tempfile::tempdir().map_err(err)?, tempfile::tempdir().map_err(err)?];
    let outputs = dirs
        .par_iter()
        .map(|d| {
            let out = Command::new(env!("CARGO_BIN_EXE_vccm"))
                .arg("compare")
                .arg("--config")
                .arg(&config)
                .args(["--seed", "7", "--out"])
                .arg(d.path())
                .env_remove("VCCM_OUT")
                .output()
                .map_err(err)?;
            ensure!(out.status.code() == Some(0), "exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr));
            std::fs::read(d.path().join("summary.json")).map_err(err)
        })
        .collect::<Result<Vec<_>, _>>()?;
    ensure!(outputs[0] == outputs[1], "summary.json differs between runs");
    Ok(format!("{} identical bytes", outputs[0].len()))
}

fn main() {
    let checks: [(&str, fn() -> Check); 12] = [
        ("embedding soundness", embedding_soundness),
        ("scalar rate law", scalar_rate_law),
        ("GLPV set-point failure", glpv_setpoint_failure),
        ("paper gain equilibria", paper_gain_equilibria),
        ("robust synthesis feasibility", robust_feasibility),
        ("GSC1 instability region", gsc1_instability_region),
        ("hidden coupling and spectra", hidden_coupling_and_spectra),
        ("GSC2 residual tracking error", gsc2_residual_error),
        ("example 2 virtual target", example_two_vtr),
        ("gain composition", gain_composition),
        ("geodesic and path oracles", geodesic_and_path_oracles),
        ("determinism", determinism),
    ];
    let start = Instant::now();
    let results: Vec<(Check, f64)> = std::thread::scope(|scope| {
        let handles: Vec<_> = checks
            .iter()
            .map(|(_, f)| {
                scope.spawn(move || {
                    let t = Instant::now();
                    let r = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|p| {
                        Err(p.downcast_ref::<String>().cloned().or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
                    });
                    (r, t.elapsed().as_secs_f64())
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().unwrap()).collect()
    });
    let mut failed = 0;
    for (i, ((name, _), (r, secs))) in checks.iter().zip(&results).enumerate() {
        let (tag, detail) = match r {
            Ok(d) => ("pass", d),
            Err(d) => {
                failed += 1;
                ("FAIL", d)
            }
        };
        println!("acceptance {:>2} {name:<30} {tag}  {detail} [{secs:.1}s]", i + 1);
    }
    println!(
        "acceptance: {} passed, {failed} failed in {:.1}s",
        checks.len() - failed,
        start.elapsed().as_secs_f64()
    );
    if failed > 0 {
        std::process::exit(1);
    }
}
