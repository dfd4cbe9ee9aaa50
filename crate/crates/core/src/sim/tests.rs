use super::*;
use crate::lpv_baselines::{GainSchedule, GlpvLaw, NaiveLaw, ParamSource};
use crate::model::{system_by_name, System};
use crate::realization::{RealizationOptions, VccmController};
use crate::synthesis::{reference_design, BasisParam, Certificate, Mode, DEFAULT_A1};
use approx::assert_abs_diff_eq;
use nalgebra::DMatrix;
use proptest::prelude::*;

fn scalar_cert(k0: f64, k1: f64) -> Certificate {
    Certificate::from_matrices(
        BasisParam::with_degrees(1, 1, 1, 0, 1),
        &[DMatrix::from_element(1, 1, 1.0)],
        &[DMatrix::from_element(1, 1, k0), DMatrix::from_element(1, 1, k1)],
        Mode::Stabilization { lambda: 1.0 - k0 },
        DEFAULT_A1,
    )
}

fn setpoint(sys: &System, value: f64) -> Reference {
    Reference::new(sys, &ReferenceSpec::Setpoint { value }).unwrap()
}

fn short(t_end: f64) -> SimOptions {
    SimOptions {
        t_end,
        ..SimOptions::default()
    }
}

#[test]
fn linear_decay_is_accurate_and_fourth_order() {
    let rhs = |_: f64, y: &[f64]| Ok(vec![-y[0]]);
    let sol = integrate(rhs, &[1.0], 1.0, 1e-3).unwrap();
    assert_eq!(sol.t.len(), 1001);
    assert_abs_diff_eq!(sol.y[1000][0], (-1.0f64).exp(), epsilon = 1e-8);
    assert!(sol.blowup_time.is_none());

    let err = |dt: f64| (integrate(rhs, &[1.0], 1.0, dt).unwrap().y.last().unwrap()[0] - (-1.0f64).exp()).abs();
    let ratio = err(0.1) / err(0.05);
    assert!((12.0..20.0).contains(&ratio), "ratio {ratio}");
}

#[test]
fn bad_step_and_blowup_are_reported() {
    assert!(integrate(|_, y: &[f64]| Ok(y.to_vec()), &[1.0], 0.1, 0.0).is_err());
    assert!(integrate(|_, y: &[f64]| Ok(y.to_vec()), &[1.0], 1e-4, 1e-3).is_err());
    let sol = integrate(|_, y: &[f64]| Ok(vec![y[0] * y[0]]), &[1.0], 2.0, 1e-3).unwrap();
    let tb = sol.blowup_time.unwrap();
    assert!(tb > 0.99 && tb < 1.01, "{tb}");
}

#[test]
fn scalar_vccm_error_is_exactly_exponential() {
    let sys = system_by_name("scalar-cubic").unwrap();
    let c = VccmController::new(&sys, scalar_cert(0.0, -1.0), RealizationOptions::default()).unwrap();
    let tr = simulate(&sys.plant, &c, &setpoint(&sys, 1.0), None, &[1.5], &short(3.0)).unwrap();
    assert!(tr.blowup_time.is_none());
    for (t, x) in tr.t.iter().zip(&tr.x) {
        assert_abs_diff_eq!(x[0] - 1.0, 0.5 * (-t).exp(), epsilon = 1e-9);
    }
    let fit = decay_fit(&tr.t, &error_norms(&tr), None).unwrap();
    assert_abs_diff_eq!(fit.lambda, 1.0, epsilon = 1e-6);
    assert_abs_diff_eq!(fit.r, 1.0, epsilon = 1e-6);
}

#[test]
fn scalar_vccm_rate_follows_offset_gain() {
    let sys = system_by_name("scalar-cubic").unwrap();
    let k0 = -2.2742;
    let c = VccmController::new(&sys, scalar_cert(k0, -1.0), RealizationOptions::default()).unwrap();
    let tr = simulate(&sys.plant, &c, &setpoint(&sys, -0.5), None, &[1.0], &short(4.0)).unwrap();
    let fit = decay_fit(&tr.t, &error_norms(&tr), None).unwrap();
    assert_abs_diff_eq!(fit.lambda, 1.0 - k0, epsilon = 1e-3);
}

#[test]
fn glpv_with_zero_offset_diverges_from_near_setpoint() {
    let sys = system_by_name("scalar-cubic").unwrap();
    let law = GlpvLaw::new(&sys, scalar_cert(0.0, -1.0)).unwrap();
    let tr = simulate(&sys.plant, &law, &setpoint(&sys, 1.0), None, &[1.2], &short(10.0)).unwrap();
    let e = error_norms(&tr);
    assert!(tr.blowup_time.is_some() || *e.last().unwrap() > 10.0 * e[0]);
}

#[test]
fn zero_order_hold_converges_to_continuous_run() {
    let sys = system_by_name("scalar-cubic").unwrap();
    let c = VccmController::new(&sys, scalar_cert(-1.0, -1.0), RealizationOptions::default()).unwrap();
    let reference = setpoint(&sys, 0.5);
    let cont = simulate(&sys.plant, &c, &reference, None, &[1.2], &short(1.0)).unwrap();
    let gap = |dt: f64| {
        let opts = SimOptions { t_end: 1.0, dt, hold: Hold::Zoh };
        let z = simulate(&sys.plant, &c, &reference, None, &[1.2], &opts).unwrap();
        (z.final_state()[0] - cont.final_state()[0]).abs()
    };
    let (g1, g2) = (gap(1e-2), gap(5e-3));
    assert!(g1 > 0.0 && g2 < 0.6 * g1, "{g1} {g2}");
}

#[test]
fn vtr_state_tracks_reference_on_ex2() {
    let sys = system_by_name("ex2").unwrap();
    let (cert, _) = reference_design(&sys).unwrap().unwrap();
    let c = VccmController::new(&sys, cert, RealizationOptions::default()).unwrap();
    assert!(c.state_dim() > 0);
    let reference = Reference::new(&sys, &ReferenceSpec::Steps { times: vec![0.0], values: vec![0.5] }).unwrap();
    let tr = simulate(&sys.plant, &c, &reference, None, &[0.3, -0.4], &short(5.0)).unwrap();
    assert_eq!(tr.chi_star.len(), tr.len());
    let fit = decay_fit(&tr.t, &error_norms(&tr), None).unwrap();
    assert!(fit.lambda > 0.0, "{fit:?}");
}

#[test]
fn decay_fit_recovers_synthetic_signals() {
    let t: Vec<f64> = (0..=2000).map(|k| k as f64 * 5e-3).collect();
    for lambda in [0.5, 1.0, 2.0, 4.0] {
        let r = 1.7;
        let e: Vec<f64> = t.iter().map(|&s| r * (-lambda * s).exp()).collect();
        let rel: Vec<f64> = e.iter().map(|v| v / r).collect();
        let fit = decay_fit(&t, &e, None).unwrap();
        assert!((fit.lambda / lambda - 1.0).abs() < 1e-3);
        assert!((fit.r - 1.0).abs() < 1e-3);
        let fit = decay_fit(&t, &rel, Some([0.0, 10.0])).unwrap();
        assert!((fit.lambda / lambda - 1.0).abs() < 1e-3);
    }
}

#[test]
fn decay_fit_truncates_at_the_floor() {
    let t: Vec<f64> = (0..=1000).map(|k| k as f64 * 0.1).collect();
    let e: Vec<f64> = t.iter().map(|&s| (-2.0 * s).exp()).collect();
    let fit = decay_fit(&t, &e, Some([0.0, 100.0])).unwrap();
    assert!(fit.points < 150);
    assert_abs_diff_eq!(fit.lambda, 2.0, epsilon = 1e-9);
    let zero = vec![0.0; t.len()];
    assert!(decay_fit(&t, &zero, None).is_err());
}

fn run(t: &[f64], dw: impl Fn(f64) -> f64, gain: f64) -> GainRun {
    GainRun {
        t: t.to_vec(),
        dw: t.iter().map(|&s| vec![dw(s)]).collect(),
        dz: t.iter().map(|&s| vec![gain * dw(s)]).collect(),
    }
}

#[test]
fn static_map_gain() {
    let t: Vec<f64> = (0..=1000).map(|k| k as f64 * 1e-2).collect();
    let runs = vec![run(&t, |s| s.sin(), 0.5), run(&t, |_| 0.0, 7.0), run(&t, |s| 1.0 - (-s).exp(), 0.5)];
    assert_abs_diff_eq!(l2_gain_estimate(&runs), 0.5, epsilon = 1e-12);
    assert_eq!(l2_gain_estimate(&[]), 0.0);
}

proptest! {
    #[test]
    fn gain_estimate_is_monotone(gains in prop::collection::vec(0.0f64..3.0, 1..6), freq in 0.1f64..5.0) {
        let t: Vec<f64> = (0..=200).map(|k| k as f64 * 0.05).collect();
        let runs: Vec<GainRun> = gains.iter().map(|&g| run(&t, |s| (freq * s).sin(), g)).collect();
        let mut last = 0.0;
        for k in 1..=runs.len() {
            let a = l2_gain_estimate(&runs[..k]);
            prop_assert!(a >= last);
            last = a;
        }
    }
}

#[test]
fn skew_embedding_lyapunov_decay_is_exact() {
    let sys = system_by_name("ex3-skew").unwrap();
    let (cert, _) = reference_design(&sys).unwrap().unwrap();
    let c = VccmController::new(&sys, cert.clone(), RealizationOptions::default()).unwrap();
    let tr = simulate(&sys.plant, &c, &setpoint(&sys, 0.3), None, &[1.0, 2.0], &short(2.0)).unwrap();
    let sd = sys.scheduled().unwrap();
    let jac = virtual_jacobians(&tr, &sd, &sys.sched, &cert).unwrap();
    let m = metrics_along(&tr, &sys.sched, &cert).unwrap();
    let rep = lyapunov_check(&tr.t, &jac, &m, 1.0, &[0.6, -0.8]).unwrap();
    for (t, v) in tr.t.iter().zip(&rep.v) {
        assert_abs_diff_eq!(*v, (-2.0 * t).exp(), epsilon = 1e-10);
    }
    assert!(rep.max_violation.abs() < 1e-9 && !rep.violated);
}

#[test]
fn scalar_vccm_has_no_lyapunov_violation() {
    let sys = system_by_name("scalar-cubic").unwrap();
    let k0 = -1.0;
    let cert = scalar_cert(k0, -1.0);
    let c = VccmController::new(&sys, cert.clone(), RealizationOptions::default()).unwrap();
    let reference = setpoint(&sys, 0.8);
    let tr = simulate(&sys.plant, &c, &reference, None, &[-0.4], &short(2.0)).unwrap();
    let jac = closed_loop_jacobians(&tr, &sys.plant, &c, &reference).unwrap();
    let m = metrics_along(&tr, &sys.sched, &cert).unwrap();
    let rep = lyapunov_check(&tr.t, &jac, &m, 1.0 - k0, &[1.0]).unwrap();
    assert!(rep.max_violation.abs() < 1e-6, "{}", rep.max_violation);
}

#[test]
fn gsc1_run_through_instability_region_violates() {
    let sys = system_by_name("gs-furnace").unwrap();
    let law = NaiveLaw::new(&sys, GainSchedule::from_system(&sys).unwrap(), ParamSource::Exogenous).unwrap();
    let reference = setpoint(&sys, 0.0);
    let tr = simulate(&sys.plant, &law, &reference, None, &[0.0, -2.0], &short(0.3)).unwrap();
    let jac = closed_loop_jacobians(&tr, &sys.plant, &law, &reference).unwrap();
    let m = vec![DMatrix::identity(2, 2); tr.len()];
    let rep = lyapunov_check(&tr.t, &jac, &m, 0.0, &[0.0, 1.0]).unwrap();
    assert!(rep.violated && rep.max_violation > 1.0, "{rep:?}");
    assert!(tr.x[0][1] < -(5.0f64).ln());
}

#[test]
fn trajectory_csv_round_trip() {
    let sys = system_by_name("ex2").unwrap();
    let (cert, _) = reference_design(&sys).unwrap().unwrap();
    let c = VccmController::new(&sys, cert, RealizationOptions::default()).unwrap();
    let reference = setpoint(&sys, 0.2);
    let d = Disturbance::Sine {
        amplitude: 0.1,
        frequency: 2.0,
        channel: 0,
    };
    let tr = simulate(&sys.plant, &c, &reference, Some(&d), &[0.1, 0.0], &short(0.05)).unwrap();
    let mut buf = Vec::new();
    tr.write_csv(&mut buf).unwrap();
    let back = Trajectory::read_csv(buf.as_slice()).unwrap();
    assert_eq!(back.t, tr.t);
    assert_eq!(back.x, tr.x);
    assert_eq!(back.w, tr.w);
    assert_eq!(back.w_star, tr.w_star);
    assert_eq!(back.chi_star, tr.chi_star);
    let mut again = Vec::new();
    back.write_csv(&mut again).unwrap();
    assert_eq!(buf, again);
}

#[test]
fn reference_rates_and_inputs_are_consistent() {
    let sys = system_by_name("scalar-cubic").unwrap();
    let r = Reference::new(&sys, &ReferenceSpec::Expr { p: "sin(t)".into() }).unwrap();
    for t in [0.0, 0.7, 2.1] {
        let s = r.at(t).unwrap();
        assert_abs_diff_eq!(s.x[0], t.sin(), epsilon = 1e-14);
        assert_abs_diff_eq!(s.x_dot[0], t.cos(), epsilon = 1e-14);
        let f = sys.plant.f(&s.x, &s.u, &s.w).unwrap();
        assert_abs_diff_eq!(f[0], s.x_dot[0], epsilon = 1e-10);
    }
    let steps = Reference::new(&sys, &ReferenceSpec::Steps { times: vec![0.0, 1.0], values: vec![0.5, -0.5] }).unwrap();
    assert_eq!(steps.at(0.99).unwrap().x, vec![0.5]);
    assert_eq!(steps.at(1.0).unwrap().x, vec![-0.5]);
    assert!(Reference::new(&sys, &ReferenceSpec::Steps { times: vec![1.0, 0.0], values: vec![0.0, 0.0] }).is_err());
    let mid = Reference::new(&sys, &ReferenceSpec::Target).unwrap();
    assert_eq!(mid.at(3.0).unwrap().x, vec![0.0]);
}

#[test]
fn disturbance_suite_shapes() {
    let s = Disturbance::suite();
    assert_eq!(s.len(), 6);
    let step = &s[5];
    assert_eq!(step.value(0.0), 0.0);
    assert_abs_diff_eq!(step.value(0.5), 1.0 - (-1.0f64).exp(), epsilon = 1e-15);
    let json = serde_json::to_string(&s).unwrap();
    let back: Vec<Disturbance> = serde_json::from_str(&json).unwrap();
    assert_eq!(back, s);
}

#[test]
fn target_generator_restarts_at_reference_jumps() {
    let sys = system_by_name("ex2").unwrap();
    let (cert, _) = reference_design(&sys).unwrap().unwrap();
    let c = VccmController::new(&sys, cert, RealizationOptions::default()).unwrap();
    let spec = ReferenceSpec::Steps {
        times: vec![0.0, 2.0],
        values: vec![0.5, -0.5],
    };
    let reference = Reference::new(&sys, &spec).unwrap();
    assert_eq!(reference.jump_times(), vec![2.0]);
    let tr = simulate(&sys.plant, &c, &reference, None, &[0.5, 0.2], &short(8.0)).unwrap();
    let k = tr.t.iter().position(|&t| t >= 2.0).unwrap();
    assert_eq!(tr.chi_star[k], tr.x_star[k]);
    let e = error_norms(&tr);
    assert!(*e.last().unwrap() < 0.1 * e[k], "{} {}", e[k], e.last().unwrap());
}
