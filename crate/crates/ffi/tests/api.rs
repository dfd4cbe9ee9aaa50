use std::ffi::{CStr, CString};
use std::ptr;

use vccm_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(vccm_last_error()) }.to_string_lossy().into_owned()
}

fn system(name: &str) -> *mut VccmSystem {
    let name = CString::new(name).unwrap();
    let mut sys = ptr::null_mut();
    assert_eq!(unsafe { vccm_system_from_name(name.as_ptr(), &mut sys) }, VccmStatus::Ok);
    sys
}

#[test]
fn scalar_round_trip() {
    unsafe {
        let sys = system("scalar-cubic");
        let (mut n, mut m, mut p, mut q) = (0, 0, 0, 0);
        assert_eq!(vccm_system_dims(sys, &mut n, &mut m, &mut p, &mut q), VccmStatus::Ok);
        assert_eq!((n, m), (1, 1));

        let mut cert = ptr::null_mut();
        assert_eq!(vccm_certificate_reference(sys, &mut cert), VccmStatus::Ok);
        let mut margin = f64::NAN;
        assert_eq!(vccm_certificate_validate(sys, cert, 41, &mut margin), VccmStatus::Ok);
        assert!(margin >= 0.0);

        let mut k = [0.0];
        assert_eq!(vccm_certificate_gain(cert, [1.0].as_ptr(), 1, k.as_mut_ptr(), 1), VccmStatus::Ok);
        // K(σ) = −2.2742 − 1.0063σ
        assert!((k[0] + 3.2805).abs() < 1e-9, "{}", k[0]);

        let mut json = ptr::null_mut();
        assert_eq!(vccm_certificate_to_json(cert, &mut json), VccmStatus::Ok);
        let mut again = ptr::null_mut();
        assert_eq!(vccm_certificate_from_json(json, &mut again), VccmStatus::Ok);
        vccm_string_free(json);

        let mut ctrl = ptr::null_mut();
        assert_eq!(vccm_controller_new(sys, VccmControllerKind::Vccm, again, &mut ctrl), VccmStatus::Ok);
        let mut tr = ptr::null_mut();
        let x0 = [1.5];
        assert_eq!(vccm_simulate_setpoint(sys, ctrl, 1.0, x0.as_ptr(), 1, 2.0, 0.01, &mut tr), VccmStatus::Ok);

        let mut len = 0;
        assert_eq!(vccm_trajectory_len(tr, &mut len), VccmStatus::Ok);
        assert_eq!(len, 201);
        let (mut t, mut x) = (0.0, [0.0]);
        assert_eq!(vccm_trajectory_sample(tr, len - 1, &mut t, x.as_mut_ptr(), 1), VccmStatus::Ok);
        assert!((t - 2.0).abs() < 1e-12);
        assert!((x[0] - 1.0).abs() < 0.05, "{}", x[0]);
        assert_eq!(vccm_trajectory_sample(tr, len, &mut t, x.as_mut_ptr(), 1), VccmStatus::InvalidArgument);
        assert!(last_error().contains("out of range"));

        let (mut lambda, mut r) = (0.0, 0.0);
        assert_eq!(vccm_trajectory_decay(tr, &mut lambda, &mut r), VccmStatus::Ok);
        assert!(lambda > 1.0, "{lambda}");
        let mut blow = 0.0;
        assert_eq!(vccm_trajectory_blowup_time(tr, &mut blow), VccmStatus::Ok);
        assert!(blow.is_nan());

        let dir = tempfile::tempdir().unwrap();
        let path = CString::new(dir.path().join("run.csv").to_str().unwrap()).unwrap();
        assert_eq!(vccm_trajectory_write_csv(tr, path.as_ptr()), VccmStatus::Ok);
        let text = std::fs::read_to_string(dir.path().join("run.csv")).unwrap();
        assert_eq!(text.lines().count(), 202);

        vccm_trajectory_free(tr);
        vccm_controller_free(ctrl);
        vccm_certificate_free(again);
        vccm_certificate_free(cert);
        vccm_system_free(sys);
    }
}

#[test]
fn errors_are_reported_not_raised() {
    unsafe {
        let mut sys = ptr::null_mut();
        assert_eq!(vccm_system_from_name(ptr::null(), &mut sys), VccmStatus::NullPointer);
        let bad = CString::new("no-such-system").unwrap();
        assert_eq!(vccm_system_from_name(bad.as_ptr(), &mut sys), VccmStatus::InvalidArgument);
        assert!(!last_error().is_empty());
        assert!(sys.is_null());

        let raw = [0xffu8, 0];
        assert_eq!(vccm_system_from_name(raw.as_ptr().cast(), &mut sys), VccmStatus::InvalidUtf8);

        let junk = CString::new("{\"basis\": 3}").unwrap();
        let mut cert = ptr::null_mut();
        assert_eq!(vccm_certificate_from_json(junk.as_ptr(), &mut cert), VccmStatus::InvalidArgument);

        let sys = system("scalar-cubic");
        let mut ctrl = ptr::null_mut();
        assert_eq!(vccm_controller_new(sys, VccmControllerKind::Vccm, ptr::null(), &mut ctrl), VccmStatus::NullPointer);
        assert_eq!(vccm_controller_new(sys, VccmControllerKind::Gsc1, ptr::null(), &mut ctrl), VccmStatus::InvalidArgument);

        let mut n = 0;
        assert_eq!(vccm_system_dims(sys, &mut n, ptr::null_mut(), ptr::null_mut(), ptr::null_mut()), VccmStatus::NullPointer);
        vccm_system_free(sys);
        vccm_system_free(ptr::null_mut());
    }
}

#[test]
fn infeasible_and_rejected_certificates() {
    unsafe {
        let sys = system("scalar-cubic");
        let mut cert = ptr::null_mut();
        assert_eq!(vccm_synthesize(sys, 1.0, 0, 1, 11, &mut cert), VccmStatus::Ok);
        let mut margin = 0.0;
        assert_eq!(vccm_certificate_validate(sys, cert, 11, &mut margin), VccmStatus::Ok);
        vccm_certificate_free(cert);

        let ex2 = system("ex2");
        let mut other = ptr::null_mut();
        assert_eq!(vccm_certificate_reference(ex2, &mut other), VccmStatus::Ok);
        assert_ne!(vccm_certificate_validate(sys, other, 11, &mut margin), VccmStatus::Ok);
        vccm_certificate_free(other);
        vccm_system_free(ex2);
        vccm_system_free(sys);
    }
}

#[test]
fn furnace_baselines_build() {
    unsafe {
        let sys = system("gs-furnace");
        let mut cert = ptr::null_mut();
        assert_eq!(vccm_certificate_reference(sys, &mut cert), VccmStatus::Ok);
        for kind in [VccmControllerKind::Vccm, VccmControllerKind::Gsc1, VccmControllerKind::Gsc2, VccmControllerKind::Glpv] {
            let mut ctrl = ptr::null_mut();
            assert_eq!(vccm_controller_new(sys, kind, cert, &mut ctrl), VccmStatus::Ok, "{kind:?}: {}", last_error());
            let mut tr = ptr::null_mut();
            let x0 = [0.5, 1.0];
            assert_eq!(vccm_simulate_setpoint(sys, ctrl, 1.0, x0.as_ptr(), 2, 0.5, 0.01, &mut tr), VccmStatus::Ok);
            vccm_trajectory_free(tr);
            vccm_controller_free(ctrl);
        }
        vccm_certificate_free(cert);
        vccm_system_free(sys);
    }
}
