use super::*;
use crate::model::{registry, system_by_name, SystemSpec, TargetSpec};
use crate::realization::{RealizationOptions, VccmController};
use crate::symdyn::parse_free;
use crate::synthesis::{reference_design, BasisParam, Mode, DEFAULT_A1};
use approx::assert_abs_diff_eq;

fn furnace() -> System {
    system_by_name("gs-furnace").unwrap()
}

fn furnace_ref(r: f64) -> RefSample {
    RefSample {
        x: vec![0.0, r],
        u: vec![(-r).exp() - 1.0],
        w: vec![r],
        x_dot: vec![0.0, 0.0],
    }
}

fn spec(name: &str) -> SystemSpec {
    registry().into_iter().find(|s| s.name == name).unwrap()
}

fn constant_furnace() -> System {
    let mut s = spec("gs-furnace");
    s.target = TargetSpec::Equilibrium {
        range: [-1.0, 1.0],
        x_e: vec!["0".into(), "0.5".into()],
        u_e: vec!["exp(-0.5) - 1".into()],
        w_e: Some(vec!["0.5".into()]),
    };
    s.build().unwrap()
}

fn scalar_cert(k0: f64, k1: f64) -> Certificate {
    Certificate::from_matrices(
        BasisParam::with_degrees(1, 1, 1, 0, 1),
        &[DMatrix::from_element(1, 1, 1.0)],
        &[DMatrix::from_element(1, 1, k0), DMatrix::from_element(1, 1, k1)],
        Mode::Stabilization { lambda: 0.5 },
        DEFAULT_A1,
    )
}

#[test]
fn furnace_linearization_along_the_family() {
    let sys = furnace();
    for p in [-1.0, 0.0, 0.7, 2.0] {
        let m = local_linearize(&sys.plant, sys.family().unwrap(), p).unwrap();
        let s = (-p).exp();
        assert_eq!(m.a, DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, 0.0, s]));
        assert_eq!(m.b, DMatrix::from_column_slice(2, 1, &[0.0, 1.0]));
        assert_eq!(m.bw, DMatrix::from_column_slice(2, 1, &[1.0, 0.0]));
    }
    let cubic = system_by_name("scalar-cubic").unwrap();
    for xe in [-1.5, 0.2, 1.9] {
        let m = local_linearize(&cubic.plant, cubic.family().unwrap(), xe).unwrap();
        assert_abs_diff_eq!(m.a[(0, 0)], -1.0 + 3.0 * xe * xe, epsilon = 1e-12);
    }
}

#[test]
fn family_off_equilibrium_is_rejected() {
    let mut s = spec("scalar-cubic");
    if let TargetSpec::Equilibrium { u_e, .. } = &mut s.target {
        u_e[0] = "p".into();
    }
    let sys = s.build().unwrap();
    assert!(matches!(
        local_linearize(&sys.plant, sys.family().unwrap(), 1.0),
        Err(LpvError::Precondition(_))
    ));
}

#[test]
fn gsc1_matches_closed_form() {
    let sys = furnace();
    let law = NaiveLaw::new(&sys, GainSchedule::from_system(&sys).unwrap(), ParamSource::Exogenous).unwrap();
    for (r, x) in [(0.0, [0.3, -0.4]), (1.5, [1.0, 2.0]), (-0.8, [-0.2, 0.0])] {
        let (u, sat) = law.eval(&x, &[r]).unwrap();
        let closed = (-r).exp() - 1.0 + x[0] - (3.0 + (-r).exp()) * (x[1] - r);
        assert_abs_diff_eq!(u[0], closed, epsilon = 1e-12);
        assert!(!sat);
        let (ue, _) = law.eval(&[0.0, r], &[r]).unwrap();
        assert_abs_diff_eq!(ue[0], (-r).exp() - 1.0, epsilon = 1e-14);
    }
    let (_, sat) = law.eval(&[0.0, 0.0], &[5.0]).unwrap();
    assert!(sat);
}

#[test]
fn hidden_coupling_of_substituted_law_is_three() {
    let sys = furnace();
    let gain = GainSchedule::from_system(&sys).unwrap();
    let fam = sys.family().unwrap();
    let eqsub = NaiveLaw::new(&sys, gain.clone(), ParamSource::State).unwrap();
    let kh = hidden_coupling(fam, &gain, eqsub.law_exprs());
    let gsc1 = NaiveLaw::new(&sys, gain.clone(), ParamSource::Exogenous).unwrap();
    let kh1 = hidden_coupling(fam, &gain, gsc1.law_exprs());
    for i in 0..=100 {
        let p = fam.range[0] + (fam.range[1] - fam.range[0]) * i as f64 / 100.0;
        assert_abs_diff_eq!(crate::symdyn::eval(&kh[0][0], &[("p", p)]).unwrap(), 3.0, epsilon = 1e-12);
        assert_abs_diff_eq!(crate::symdyn::eval(&kh1[0][0], &[("p", p)]).unwrap(), 0.0, epsilon = 1e-12);
    }
    // law linearization = K + K_h·∂p/∂x
    let groups = vec![VarGroup::indexed("x", 2), VarGroup::indexed("w", 1)];
    let j = VectorField::new(eqsub.law_exprs().to_vec(), groups).unwrap().jacobian("x").unwrap();
    for p in [-0.5, 0.0, 1.3] {
        let b = [("x1", 0.0), ("x2", p), ("w1", p)];
        let k = gain.at(p).unwrap();
        assert_abs_diff_eq!(crate::symdyn::eval(&j[0][0], &b).unwrap(), k[(0, 0)], epsilon = 1e-12);
        assert_abs_diff_eq!(crate::symdyn::eval(&j[0][1], &b).unwrap(), k[(0, 1)] + 3.0, epsilon = 1e-12);
    }
    let c = constant_furnace();
    let law = NaiveLaw::new(&c, gain.clone(), ParamSource::State).unwrap();
    assert!(hidden_coupling(c.family().unwrap(), &gain, law.law_exprs())[0][0].is_zero());
}

#[test]
fn substituted_law_prints_and_violates_gain_condition() {
    let sys = furnace();
    let gain = GainSchedule::from_system(&sys).unwrap();
    let eqsub = NaiveLaw::new(&sys, gain.clone(), ParamSource::State).unwrap();
    let simplified = crate::symdyn::eval(&eqsub.law_exprs()[0], &[("x1", 0.4), ("x2", -0.3), ("w1", 9.0)]).unwrap();
    assert_abs_diff_eq!(simplified, 0.4 + (0.3f64).exp() - 1.0, epsilon = 1e-12);
    let report = realization_conditions(&sys, &eqsub, 21).unwrap();
    assert!(report.equilibrium_holds && !report.gain_holds);
    let (i, j, _, v) = report.worst_gain_term.unwrap();
    assert_eq!((i, j), (0, 1));
    assert_abs_diff_eq!(v, 3.0, epsilon = 1e-9);
    let gsc1 = NaiveLaw::new(&sys, gain, ParamSource::Exogenous).unwrap();
    let ok = realization_conditions(&sys, &gsc1, 21).unwrap();
    assert!(ok.equilibrium_holds && ok.gain_holds && ok.worst_gain_term.is_none());
}

#[test]
fn compensated_law_is_gsc2() {
    let sys = furnace();
    let law = CompensatedLaw::new(&sys, GainSchedule::from_system(&sys).unwrap()).unwrap();
    for (r, x) in [(0.0, [0.3, -0.4]), (1.5, [1.0, 1.9]), (-0.8, [-0.2, 0.0])] {
        let (u, _) = law.eval(&x, &[r]).unwrap();
        let closed = x[0] + (-x[1]).exp() - 1.0 - 3.0 * (x[1] - r);
        assert_abs_diff_eq!(u[0], closed, epsilon = 1e-12);
    }
    for r in [-0.5, 0.0, 1.0] {
        let j = fd_closed_loop_jacobian(&sys.plant, &law, &[0.0, r], &furnace_ref(r)).unwrap();
        assert!((&j - DMatrix::from_row_slice(2, 2, &[-1.0, -1.0, 1.0, -3.0])).amax() < 1e-7);
        let eig = j.complex_eigenvalues();
        for e in eig.iter() {
            assert_abs_diff_eq!(e.re, -2.0, epsilon = 1e-3);
        }
    }
    // a constant family has no hidden coupling, so compensation changes nothing
    let c = constant_furnace();
    let gain = GainSchedule::from_system(&c).unwrap();
    let comp = CompensatedLaw::new(&c, gain.clone()).unwrap();
    let base = NaiveLaw::new(&c, gain, ParamSource::State).unwrap();
    for x in [[0.1, 0.2], [-1.0, 0.9]] {
        assert_abs_diff_eq!(comp.eval(&x, &[0.3]).unwrap().0[0], base.eval(&x, &[0.3]).unwrap().0[0], epsilon = 1e-14);
    }
}

#[test]
fn glpv_scalar_equilibria() {
    let sys = system_by_name("scalar-cubic").unwrap();
    let zero_offset = GlpvLaw::new(&sys, scalar_cert(0.0, -1.0)).unwrap();
    let r1 = RefSample {
        x: vec![1.0],
        u: vec![0.0],
        w: vec![0.0],
        x_dot: vec![0.0],
    };
    let j = fd_closed_loop_jacobian(&sys.plant, &zero_offset, &[1.0], &r1).unwrap();
    assert_abs_diff_eq!(j[(0, 0)], 1.0, epsilon = 1e-7);
    assert_eq!(zero_offset.output(0.0, &[1.0], &[], &r1).unwrap().u, vec![0.0]);

    let paper = GlpvLaw::new(&sys, scalar_cert(-2.2742, -1.0063)).unwrap();
    let xe = 1.9;
    let r = RefSample {
        x: vec![xe],
        u: vec![xe - xe * xe * xe],
        w: vec![0.0],
        x_dot: vec![0.0],
    };
    let f = |x: f64| {
        let u = paper.output(0.0, &[x], &[], &r).unwrap().u;
        sys.plant.f(&[x], &u, &[0.0]).unwrap()[0]
    };
    let (mut a, mut b) = (-0.5, 0.0);
    assert!(f(a) * f(b) < 0.0);
    for _ in 0..100 {
        let m = 0.5 * (a + b);
        if f(a) * f(m) <= 0.0 {
            b = m;
        } else {
            a = m;
        }
    }
    assert_abs_diff_eq!(0.5 * (a + b), -0.1766, epsilon = 5e-4);
}

#[test]
fn furnace_residual_term_and_drift() {
    let sys = furnace();
    let fam = sys.family().unwrap();
    let gain = GainSchedule::from_system(&sys).unwrap();
    let e = residual_term(&sys.plant, fam, &gain).unwrap();
    let drift = reference_drift(fam);
    for p in [-1.0, 0.0, 1.7] {
        let b = [("p", p)];
        assert_abs_diff_eq!(crate::symdyn::eval(&e[0], &b).unwrap(), 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(crate::symdyn::eval(&e[1], &b).unwrap(), 3.0, epsilon = 1e-12);
        assert_eq!(crate::symdyn::eval(&drift[0], &b).unwrap(), 0.0);
        assert_eq!(crate::symdyn::eval(&drift[1], &b).unwrap(), 1.0);
    }
    let c = constant_furnace();
    assert!(residual_term(&c.plant, c.family().unwrap(), &gain).unwrap().iter().all(Expr::is_zero));
}

#[test]
fn residual_term_matches_finite_differences() {
    let sys = system_by_name("scalar-cubic").unwrap();
    let fam = sys.family().unwrap();
    let gain = GainSchedule::new(vec![vec![parse_free("-1 - p^2 + sin(p)").unwrap()]]).unwrap();
    let e = residual_term(&sys.plant, fam, &gain).unwrap();
    let field = |x: f64, p: f64| {
        let pt = fam.at(p).unwrap();
        let k = gain.at(p).unwrap()[(0, 0)];
        let u = pt.u[0] + k * (x - pt.x[0]);
        sys.plant.f(&[x], &[u], &pt.w).unwrap()[0]
    };
    for p in [-1.7, -0.3, 0.8, 1.6] {
        let x = fam.at(p).unwrap().x[0];
        let h = 1e-6;
        let fd = (field(x, p + h) - field(x, p - h)) / (2.0 * h);
        assert_abs_diff_eq!(crate::symdyn::eval(&e[0], &[("p", p)]).unwrap(), fd, epsilon = 1e-6);
    }
}

#[test]
fn scalar_perturbation_is_product_form() {
    let sys = system_by_name("scalar-cubic").unwrap();
    let sd = sys.scheduled().unwrap();
    let cert = scalar_cert(0.0, -1.0);
    for (x, xe) in [(0.3, 1.2), (-1.1, 0.7), (1.9, -0.4)] {
        let p = glpv_perturbation(&sd, &sys.sched, &cert, &[x], &[xe], &[0.0]).unwrap();
        assert_abs_diff_eq!(p.delta[(0, 0)], xe * (x + xe), epsilon = 1e-12);
        assert_abs_diff_eq!(p.max_eig, -2.0 + 2.0 * xe * (x + xe), epsilon = 1e-12);
        assert_eq!(p.guaranteed(), xe * (x + xe) < 1.0);
    }
    let p = glpv_perturbation(&sd, &sys.sched, &cert, &[1.3], &[0.0], &[0.0]).unwrap();
    assert_eq!(p.delta[(0, 0)], 0.0);
    let p = glpv_perturbation(&sd, &sys.sched, &cert, &[0.5], &[0.5], &[0.0]).unwrap();
    assert_eq!(p.delta[(0, 0)], 0.0);
}

#[test]
fn gsc1_instability_boundary() {
    let sys = furnace();
    let law = NaiveLaw::new(&sys, GainSchedule::from_system(&sys).unwrap(), ParamSource::Exogenous).unwrap();
    let cl = SymbolicClosedLoop::new(&sys.plant, law.law_exprs()).unwrap();
    for r in [-1.0, 0.0, 1.0] {
        let (lo, hi, n) = (-3.0, 1.0, 401);
        let map = instability_region(&[0.0, lo], &[0.0, hi], &[2, n], |x| Ok(cl.jacobian(x, &[r])?)).unwrap();
        let cell = (hi - lo) / (n - 1) as f64;
        let boundary = -(4.0 + (-r).exp()).ln();
        for c in &map.cells {
            if (c.x[1] - boundary).abs() > cell {
                assert_eq!(c.hurwitz, c.x[1] > boundary, "r={r} x2={}", c.x[1]);
            }
        }
        let mut out = Vec::new();
        map.write_csv(&mut out).unwrap();
        assert!(String::from_utf8(out).unwrap().starts_with("x1,x2,max_real,hurwitz\n"));
        assert!(map.unstable_fraction() > 0.0);
    }
}

#[test]
fn equilibrium_spectra_of_the_furnace_laws() {
    let sys = furnace();
    let gain = GainSchedule::from_system(&sys).unwrap();
    let eqsub = NaiveLaw::new(&sys, gain, ParamSource::State).unwrap();
    let cl = SymbolicClosedLoop::new(&sys.plant, eqsub.law_exprs()).unwrap();
    for r in [-1.0, 0.0, 1.5] {
        let j = cl.jacobian(&[0.0, r], &[r]).unwrap();
        let mut eig: Vec<(f64, f64)> = j.complex_eigenvalues().iter().map(|c| (c.re, c.im)).collect();
        eig.sort_by(|a, b| a.1.total_cmp(&b.1));
        assert_abs_diff_eq!(eig[0].0, -0.5, epsilon = 1e-12);
        assert_abs_diff_eq!(eig[1].1, 3f64.sqrt() / 2.0, epsilon = 1e-12);
    }
    let comp = CompensatedLaw::new(&sys, GainSchedule::from_system(&sys).unwrap()).unwrap();
    let map = instability_region(&[-1.0], &[2.0], &[31], |p| {
        fd_closed_loop_jacobian(&sys.plant, &comp, &[0.0, p[0]], &furnace_ref(p[0]))
    })
    .unwrap();
    assert!(map.cells.iter().all(|c| c.hurwitz && (c.max_real + 2.0).abs() < 1e-3));
}

#[test]
fn all_realizations_agree_on_reference() {
    let sys = furnace();
    let gain = GainSchedule::from_system(&sys).unwrap();
    let (cert, _) = reference_design(&sys).unwrap().unwrap();
    let laws: Vec<Box<dyn Controller>> = vec![
        Box::new(NaiveLaw::new(&sys, gain.clone(), ParamSource::Exogenous).unwrap()),
        Box::new(CompensatedLaw::new(&sys, gain).unwrap()),
        Box::new(GlpvLaw::new(&sys, cert.clone()).unwrap()),
        Box::new(VccmController::new(&sys, cert, RealizationOptions::default()).unwrap()),
    ];
    for p in [-1.0, 0.0, 0.5, 2.0] {
        let r = furnace_ref(p);
        for law in &laws {
            let u = law.output(0.0, &r.x, &r.x, &r).unwrap().u;
            assert_abs_diff_eq!(u[0], r.u[0], epsilon = 1e-10);
        }
    }
}

#[test]
fn missing_schedule_is_reported() {
    let sys = system_by_name("ex2").unwrap();
    assert!(matches!(GainSchedule::from_system(&sys), Err(LpvError::NoSchedule(_))));
}
