//! C ABI over `vccm-core`.
//!
//! Every function returns a [`VccmStatus`]; results come back through out
//! pointers. Handles are opaque and released with their `_free` function.
//! The message of the last failure on the calling thread is available from
//! [`vccm_last_error`].

#![allow(clippy::missing_safety_doc)]

use std::cell::RefCell;
use std::ffi::{c_char, CStr, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use vccm_core::lpv_baselines::{CompensatedLaw, GainSchedule, GlpvLaw, NaiveLaw, ParamSource};
use vccm_core::model::{system_by_name, System, SystemSpec};
use vccm_core::realization::{self, Controller, RealizationOptions};
use vccm_core::sim::{decay_fit, error_norms, simulate, Hold, Reference, ReferenceSpec, SimOptions, Trajectory};
use vccm_core::synthesis::{
    reference_design, synthesize, validate, BasisParam, Certificate, GridSpec, Mode, SolveError, SolveOptions,
    SynthesisError,
};

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VccmStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidUtf8 = 2,
    InvalidArgument = 3,
    Infeasible = 4,
    ValidationFailed = 5,
    Simulation = 6,
    Io = 7,
    Panic = 8,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VccmControllerKind {
    Vccm = 0,
    Gsc1 = 1,
    Gsc2 = 2,
    Glpv = 3,
}

/// A plant with its embedding, scheduling map and target.
pub struct VccmSystem(System);

/// A contraction certificate (W(σ), Y(σ)).
pub struct VccmCertificate(Certificate);

/// A tracking law built for one system.
pub struct VccmController(Box<dyn Controller>);

/// A recorded closed-loop run.
pub struct VccmTrajectory(Trajectory);

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(msg: &str) {
    let c = CString::new(msg.replace('\0', " ")).unwrap_or_default();
    LAST_ERROR.with(|e| *e.borrow_mut() = c);
}

struct Fail(VccmStatus, String);

impl Fail {
    fn new(status: VccmStatus, msg: impl std::fmt::Display) -> Self {
        Fail(status, msg.to_string())
    }
}

fn guard(f: impl FnOnce() -> Result<(), Fail>) -> VccmStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => {
            set_error("");
            VccmStatus::Ok
        }
        Ok(Err(Fail(status, msg))) => {
            set_error(&msg);
            status
        }
        Err(_) => {
            set_error("internal panic");
            VccmStatus::Panic
        }
    }
}

unsafe fn str_arg<'a>(p: *const c_char, what: &str) -> Result<&'a str, Fail> {
    if p.is_null() {
        return Err(Fail::new(VccmStatus::NullPointer, format!("{what} is null")));
    }
    CStr::from_ptr(p)
        .to_str()
        .map_err(|_| Fail::new(VccmStatus::InvalidUtf8, format!("{what} is not UTF-8")))
}

unsafe fn handle<'a, T>(p: *const T, what: &str) -> Result<&'a T, Fail> {
    p.as_ref()
        .ok_or_else(|| Fail::new(VccmStatus::NullPointer, format!("{what} is null")))
}

unsafe fn put<T>(out: *mut *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::new(VccmStatus::NullPointer, "output pointer is null"));
    }
    *out = Box::into_raw(Box::new(value));
    Ok(())
}

unsafe fn write<T>(out: *mut T, value: T) -> Result<(), Fail> {
    if out.is_null() {
        return Err(Fail::new(VccmStatus::NullPointer, "output pointer is null"));
    }
    *out = value;
    Ok(())
}

unsafe fn free<T>(p: *mut T) {
    if !p.is_null() {
        drop(Box::from_raw(p));
    }
}

fn invalid(e: impl std::fmt::Display) -> Fail {
    Fail::new(VccmStatus::InvalidArgument, e)
}

/// Message of the last failed call on this thread; empty after a success.
/// The pointer stays valid until the next call on the same thread.
#[no_mangle]
pub extern "C" fn vccm_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ptr())
}

/// Releases a string returned by this library.
#[no_mangle]
pub unsafe extern "C" fn vccm_string_free(s: *mut c_char) {
    if !s.is_null() {
        drop(CString::from_raw(s));
    }
}

/// Builds a registry system by name.
#[no_mangle]
pub unsafe extern "C" fn vccm_system_from_name(name: *const c_char, out: *mut *mut VccmSystem) -> VccmStatus {
    guard(|| {
        let name = str_arg(name, "name")?;
        let sys = system_by_name(name).map_err(invalid)?;
        put(out, VccmSystem(sys))
    })
}

/// Builds a system from its JSON description.
#[no_mangle]
pub unsafe extern "C" fn vccm_system_from_json(json: *const c_char, out: *mut *mut VccmSystem) -> VccmStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let spec: SystemSpec = serde_json::from_str(text).map_err(invalid)?;
        put(out, VccmSystem(spec.build().map_err(invalid)?))
    })
}

/// State, input, disturbance and output dimensions.
#[no_mangle]
pub unsafe extern "C" fn vccm_system_dims(
    sys: *const VccmSystem,
    n: *mut usize,
    m: *mut usize,
    p: *mut usize,
    q: *mut usize,
) -> VccmStatus {
    guard(|| {
        let d = handle(sys, "system")?.0.dims;
        write(n, d.n)?;
        write(m, d.m)?;
        write(p, d.p)?;
        write(q, d.q)
    })
}

#[no_mangle]
pub unsafe extern "C" fn vccm_system_free(sys: *mut VccmSystem) {
    free(sys);
}

/// Built-in certificate of a registry system.
#[no_mangle]
pub unsafe extern "C" fn vccm_certificate_reference(
    sys: *const VccmSystem,
    out: *mut *mut VccmCertificate,
) -> VccmStatus {
    guard(|| {
        let sys = &handle(sys, "system")?.0;
        match reference_design(sys).map_err(invalid)? {
            Some((c, _)) => put(out, VccmCertificate(c)),
            None => Err(invalid(format!("system `{}` has no built-in design", sys.name))),
        }
    })
}

/// Solves the stabilization conditions with contraction rate `lambda` on a
/// `grid_points`-per-axis grid, W of degree `w_degree` and Y of degree `y_degree`.
#[no_mangle]
pub unsafe extern "C" fn vccm_synthesize(
    sys: *const VccmSystem,
    lambda: f64,
    w_degree: u32,
    y_degree: u32,
    grid_points: usize,
    out: *mut *mut VccmCertificate,
) -> VccmStatus {
    guard(|| {
        let sys = &handle(sys, "system")?.0;
        let sd = sys.scheduled().map_err(invalid)?;
        let d = sys.dims;
        let basis = BasisParam::with_degrees(d.n, d.m, sys.sched.len(), w_degree, y_degree);
        let grid = GridSpec::from_map(&sys.sched, grid_points);
        match synthesize(&sd, &basis, &grid, Mode::Stabilization { lambda }, &[], &SolveOptions::default()) {
            Ok(c) => put(out, VccmCertificate(c)),
            Err(e @ SynthesisError::Solve(SolveError::Infeasible(_))) => Err(Fail::new(VccmStatus::Infeasible, e)),
            Err(e) => Err(invalid(e)),
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn vccm_certificate_from_json(
    json: *const c_char,
    out: *mut *mut VccmCertificate,
) -> VccmStatus {
    guard(|| {
        let text = str_arg(json, "json")?;
        let c: Certificate = serde_json::from_str(text).map_err(invalid)?;
        c.check_shape().map_err(invalid)?;
        put(out, VccmCertificate(c))
    })
}

/// JSON text of a certificate; release it with [`vccm_string_free`].
#[no_mangle]
pub unsafe extern "C" fn vccm_certificate_to_json(cert: *const VccmCertificate, out: *mut *mut c_char) -> VccmStatus {
    guard(|| {
        let c = &handle(cert, "certificate")?.0;
        let text = serde_json::to_string(c).map_err(invalid)?;
        let s = CString::new(text).map_err(invalid)?;
        write(out, s.into_raw())
    })
}

/// Gain K(σ) = Y(σ)W(σ)⁻¹ at one scheduling point, written row-major into
/// `gain` (capacity `len` ≥ m·n).
#[no_mangle]
pub unsafe extern "C" fn vccm_certificate_gain(
    cert: *const VccmCertificate,
    sigma: *const f64,
    sigma_len: usize,
    gain: *mut f64,
    len: usize,
) -> VccmStatus {
    guard(|| {
        let c = &handle(cert, "certificate")?.0;
        if sigma.is_null() || gain.is_null() {
            return Err(Fail::new(VccmStatus::NullPointer, "sigma or gain is null"));
        }
        if sigma_len != c.basis.w.n_vars {
            return Err(invalid(format!("sigma needs {} entries", c.basis.w.n_vars)));
        }
        let (m, n) = (c.basis.m, c.basis.n);
        if len < m * n {
            return Err(invalid(format!("gain buffer needs {} entries", m * n)));
        }
        let k = c.gain_at(std::slice::from_raw_parts(sigma, sigma_len));
        let dst = std::slice::from_raw_parts_mut(gain, m * n);
        for i in 0..m {
            for j in 0..n {
                dst[i * n + j] = k[(i, j)];
            }
        }
        Ok(())
    })
}

/// Dense validation of `cert` for `sys`. Returns `VCCM_STATUS_VALIDATION_FAILED`
/// (with `margin` still written) when a block condition fails.
#[no_mangle]
pub unsafe extern "C" fn vccm_certificate_validate(
    sys: *const VccmSystem,
    cert: *const VccmCertificate,
    grid_points: usize,
    margin: *mut f64,
) -> VccmStatus {
    guard(|| {
        let sys = &handle(sys, "system")?.0;
        let c = &handle(cert, "certificate")?.0;
        let sd = sys.scheduled().map_err(invalid)?;
        let rep = validate(c, &sd, &GridSpec::from_map(&sys.sched, grid_points)).map_err(invalid)?;
        write(margin, rep.margin)?;
        if rep.accepted {
            Ok(())
        } else {
            Err(Fail::new(
                VccmStatus::ValidationFailed,
                format!("margin {:.6e} at `{}`", rep.margin, rep.worst_block),
            ))
        }
    })
}

#[no_mangle]
pub unsafe extern "C" fn vccm_certificate_free(cert: *mut VccmCertificate) {
    free(cert);
}

/// Creates a controller; `cert` may be null for the gain-scheduled laws.
#[no_mangle]
pub unsafe extern "C" fn vccm_controller_new(
    sys: *const VccmSystem,
    kind: VccmControllerKind,
    cert: *const VccmCertificate,
    out: *mut *mut VccmController,
) -> VccmStatus {
    guard(|| {
        let sys = &handle(sys, "system")?.0;
        let cert = || handle(cert, "certificate").map(|c| c.0.clone());
        let ctrl: Box<dyn Controller> = match kind {
            VccmControllerKind::Vccm => {
                Box::new(realization::VccmController::new(sys, cert()?, RealizationOptions::default()).map_err(invalid)?)
            }
            VccmControllerKind::Glpv => Box::new(GlpvLaw::new(sys, cert()?).map_err(invalid)?),
            VccmControllerKind::Gsc1 => {
                let g = GainSchedule::from_system(sys).map_err(invalid)?;
                Box::new(NaiveLaw::new(sys, g, ParamSource::Exogenous).map_err(invalid)?)
            }
            VccmControllerKind::Gsc2 => {
                let g = GainSchedule::from_system(sys).map_err(invalid)?;
                Box::new(CompensatedLaw::new(sys, g).map_err(invalid)?)
            }
        };
        put(out, VccmController(ctrl))
    })
}

#[no_mangle]
pub unsafe extern "C" fn vccm_controller_free(ctrl: *mut VccmController) {
    free(ctrl);
}

/// Simulates the closed loop to the set-point with family parameter `setpoint`
/// from `x0` (length n) with fixed step `dt` up to `t_end`.
#[no_mangle]
pub unsafe extern "C" fn vccm_simulate_setpoint(
    sys: *const VccmSystem,
    ctrl: *const VccmController,
    setpoint: f64,
    x0: *const f64,
    n: usize,
    t_end: f64,
    dt: f64,
    out: *mut *mut VccmTrajectory,
) -> VccmStatus {
    guard(|| {
        let sys = &handle(sys, "system")?.0;
        let ctrl = &handle(ctrl, "controller")?.0;
        if x0.is_null() {
            return Err(Fail::new(VccmStatus::NullPointer, "x0 is null"));
        }
        let x0 = std::slice::from_raw_parts(x0, n);
        let reference = Reference::new(sys, &ReferenceSpec::Setpoint { value: setpoint }).map_err(invalid)?;
        let opts = SimOptions {
            t_end,
            dt,
            hold: Hold::Continuous,
        };
        let tr = simulate(&sys.plant, ctrl.as_ref(), &reference, None, x0, &opts)
            .map_err(|e| Fail::new(VccmStatus::Simulation, e))?;
        put(out, VccmTrajectory(tr))
    })
}

/// Number of recorded samples.
#[no_mangle]
pub unsafe extern "C" fn vccm_trajectory_len(tr: *const VccmTrajectory, len: *mut usize) -> VccmStatus {
    guard(|| write(len, handle(tr, "trajectory")?.0.len()))
}

/// Time and state of sample `k`; `x` has capacity `n`.
#[no_mangle]
pub unsafe extern "C" fn vccm_trajectory_sample(
    tr: *const VccmTrajectory,
    k: usize,
    t: *mut f64,
    x: *mut f64,
    n: usize,
) -> VccmStatus {
    guard(|| {
        let tr = &handle(tr, "trajectory")?.0;
        let (Some(&tk), Some(xk)) = (tr.t.get(k), tr.x.get(k)) else {
            return Err(invalid(format!("sample {k} out of range ({} samples)", tr.len())));
        };
        if x.is_null() {
            return Err(Fail::new(VccmStatus::NullPointer, "x is null"));
        }
        if n < xk.len() {
            return Err(invalid(format!("state buffer needs {} entries", xk.len())));
        }
        std::slice::from_raw_parts_mut(x, xk.len()).copy_from_slice(xk);
        write(t, tk)
    })
}

/// First time the state left the blow-up bound, or NaN.
#[no_mangle]
pub unsafe extern "C" fn vccm_trajectory_blowup_time(tr: *const VccmTrajectory, t: *mut f64) -> VccmStatus {
    guard(|| write(t, handle(tr, "trajectory")?.0.blowup_time.unwrap_or(f64::NAN)))
}

/// Exponential fit of |x − x*| over the default window.
#[no_mangle]
pub unsafe extern "C" fn vccm_trajectory_decay(
    tr: *const VccmTrajectory,
    lambda: *mut f64,
    r: *mut f64,
) -> VccmStatus {
    guard(|| {
        let tr = &handle(tr, "trajectory")?.0;
        let fit = decay_fit(&tr.t, &error_norms(tr), None).map_err(invalid)?;
        write(lambda, fit.lambda)?;
        write(r, fit.r)
    })
}

#[no_mangle]
pub unsafe extern "C" fn vccm_trajectory_write_csv(tr: *const VccmTrajectory, path: *const c_char) -> VccmStatus {
    guard(|| {
        let tr = &handle(tr, "trajectory")?.0;
        let path = str_arg(path, "path")?;
        let file = std::fs::File::create(path).map_err(|e| Fail::new(VccmStatus::Io, format!("{path}: {e}")))?;
        tr.write_csv(std::io::BufWriter::new(file))
            .map_err(|e| Fail::new(VccmStatus::Io, e))
    })
}

#[no_mangle]
pub unsafe extern "C" fn vccm_trajectory_free(tr: *mut VccmTrajectory) {
    free(tr);
}

