use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::{Reference, SimError, Trajectory};
use crate::lpv_baselines::fd_closed_loop_jacobian;
use crate::model::{PlantModel, ScheduledDynamics, SchedulingMap};
use crate::realization::{Controller, RefSample};
use crate::synthesis::Certificate;

/// Errors below this are treated as numerical zero by [`decay_fit`].
pub const FIT_FLOOR: f64 = 1e-12;
/// Fit window as fractions of the run length.
pub const DEFAULT_WINDOW: [f64; 2] = [0.1, 0.9];

/// |x(t_k) − x*(t_k)|.
pub fn error_norms(tr: &Trajectory) -> Vec<f64> {
    tr.x.iter()
        .zip(&tr.x_star)
        .map(|(x, s)| x.iter().zip(s).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt())
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DecayFit {
    /// Fitted e(0) of the line.
    pub amplitude: f64,
    /// Overshoot constant relative to the initial error; NaN when e(0) = 0.
    pub r: f64,
    pub lambda: f64,
    pub points: usize,
    pub window: [f64; 2],
}

/// Least-squares line through log e(t) on `window` (absolute times), stopping at the floor.
/// The error must be positive inside the window.
pub fn decay_fit(t: &[f64], e: &[f64], window: Option<[f64; 2]>) -> Result<DecayFit, SimError> {
    if t.len() != e.len() || t.len() < 2 {
        return Err(SimError::Config("decay fit needs matching series of length >= 2".into()));
    }
    let span = t[t.len() - 1] - t[0];
    let window = window.unwrap_or([t[0] + DEFAULT_WINDOW[0] * span, t[0] + DEFAULT_WINDOW[1] * span]);
    let e0 = e[0];
    let (mut sx, mut sy, mut sxx, mut sxy, mut k) = (0.0, 0.0, 0.0, 0.0, 0usize);
    for (&ti, &ei) in t.iter().zip(e) {
        if ti < window[0] {
            continue;
        }
        if ti > window[1] || !(ei > FIT_FLOOR) {
            break;
        }
        let y = ei.ln();
        sx += ti;
        sy += y;
        sxx += ti * ti;
        sxy += ti * y;
        k += 1;
    }
    if k < 2 {
        return Err(SimError::Config("fewer than two fit points above the floor".into()));
    }
    let kf = k as f64;
    let slope = (kf * sxy - sx * sy) / (kf * sxx - sx * sx);
    let intercept = (sy - slope * sx) / kf;
    Ok(DecayFit {
        amplitude: intercept.exp(),
        r: if e0 > 0.0 { intercept.exp() / e0 } else { f64::NAN },
        lambda: -slope,
        points: k,
        window,
    })
}

/// Deviation signals of one run started on the reference.
#[derive(Debug, Clone, PartialEq)]
pub struct GainRun {
    pub t: Vec<f64>,
    pub dw: Vec<Vec<f64>>,
    pub dz: Vec<Vec<f64>>,
}

pub fn gain_run(tr: &Trajectory) -> GainRun {
    let diff = |a: &[Vec<f64>], b: &[Vec<f64>]| -> Vec<Vec<f64>> {
        a.iter().zip(b).map(|(x, y)| x.iter().zip(y).map(|(p, q)| p - q).collect()).collect()
    };
    GainRun {
        t: tr.t.clone(),
        dw: diff(&tr.w, &tr.w_star),
        dz: diff(&tr.z, &tr.z_star),
    }
}

fn l2(t: &[f64], v: &[Vec<f64>]) -> f64 {
    let sq: Vec<f64> = v.iter().map(|r| r.iter().map(|a| a * a).sum()).collect();
    t.windows(2)
        .zip(sq.windows(2))
        .map(|(tt, s)| 0.5 * (tt[1] - tt[0]) * (s[0] + s[1]))
        .sum::<f64>()
        .sqrt()
}

/// max over runs of ‖Δz‖₂ / ‖Δw‖₂; runs with zero input are skipped.
pub fn l2_gain_estimate(runs: &[GainRun]) -> f64 {
    runs.iter()
        .filter_map(|r| {
            let dw = l2(&r.t, &r.dw);
            (dw > 0.0).then(|| l2(&r.t, &r.dz) / dw)
        })
        .fold(0.0, f64::max)
}

/// A(σ) + B(σ)K(σ) with σ = sat ψ(x, x, w) along the run.
pub fn virtual_jacobians(
    tr: &Trajectory,
    sd: &ScheduledDynamics,
    sched: &SchedulingMap,
    cert: &Certificate,
) -> Result<Vec<DMatrix<f64>>, SimError> {
    tr.x.iter()
        .zip(&tr.w)
        .map(|(x, w)| {
            let (s, _) = sched.saturate(&sched.eval(x, x, w)?);
            let m = sd.eval(&s)?;
            Ok(&m.a + &m.b * cert.gain_at(&s))
        })
        .collect()
}

/// M(σ) along the run.
pub fn metrics_along(tr: &Trajectory, sched: &SchedulingMap, cert: &Certificate) -> Result<Vec<DMatrix<f64>>, SimError> {
    tr.x.iter()
        .zip(&tr.w)
        .map(|(x, w)| {
            let (s, _) = sched.saturate(&sched.eval(x, x, w)?);
            Ok(cert.metric_at(&s))
        })
        .collect()
}

/// Jacobian of the true closed loop along a run of a stateless controller.
pub fn closed_loop_jacobians(
    tr: &Trajectory,
    plant: &PlantModel,
    ctrl: &dyn Controller,
    reference: &Reference,
) -> Result<Vec<DMatrix<f64>>, SimError> {
    tr.t.iter()
        .zip(&tr.x)
        .map(|(&t, x)| {
            let r: RefSample = reference.at(t)?;
            fd_closed_loop_jacobian(plant, ctrl, x, &r).map_err(|e| SimError::Config(e.to_string()))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovReport {
    /// max_k (V̇ + 2λV)/V.
    pub max_violation: f64,
    pub violated: bool,
    /// Time of the largest violation.
    pub worst_time: f64,
    pub v: Vec<f64>,
}

pub const LYAPUNOV_TOL: f64 = 1e-6;

/// Propagates δ̇ = J(t)δ and checks d/dt(δᵀMδ) ≤ −2λ δᵀMδ at every sample.
pub fn lyapunov_check(
    t: &[f64],
    jac: &[DMatrix<f64>],
    metric: &[DMatrix<f64>],
    lambda: f64,
    delta0: &[f64],
) -> Result<LyapunovReport, SimError> {
    let k = t.len();
    if jac.len() != k || metric.len() != k || k < 2 {
        return Err(SimError::Config("Lyapunov check needs one Jacobian and metric per sample".into()));
    }
    let mut delta = DVector::from_column_slice(delta0);
    let mut v = Vec::with_capacity(k);
    let mut worst = (f64::NEG_INFINITY, t[0]);
    for i in 0..k {
        let m = &metric[i];
        let m_dot = if i == 0 {
            (&metric[1] - &metric[0]) / (t[1] - t[0])
        } else if i == k - 1 {
            (&metric[i] - &metric[i - 1]) / (t[i] - t[i - 1])
        } else {
            (&metric[i + 1] - &metric[i - 1]) / (t[i + 1] - t[i - 1])
        };
        let j = &jac[i];
        let vi = (delta.transpose() * m * &delta)[(0, 0)];
        let vdot = (delta.transpose() * (j.transpose() * m + m * j + m_dot) * &delta)[(0, 0)];
        let rel = (vdot + 2.0 * lambda * vi) / vi;
        if rel > worst.0 {
            worst = (rel, t[i]);
        }
        v.push(vi);
        if i + 1 < k {
            let h = t[i + 1] - t[i];
            let (j0, j1) = (&jac[i], &jac[i + 1]);
            let jm = (j0 + j1) * 0.5;
            let k1 = j0 * &delta;
            let k2 = &jm * (&delta + &k1 * (0.5 * h));
            let k3 = &jm * (&delta + &k2 * (0.5 * h));
            let k4 = j1 * (&delta + &k3 * h);
            delta += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (h / 6.0);
            let nrm = delta.norm();
            if nrm > 0.0 && !(1e-100..1e100).contains(&nrm) {
                delta /= nrm;
            }
        }
    }
    Ok(LyapunovReport {
        max_violation: worst.0,
        violated: worst.0 > LYAPUNOV_TOL,
        worst_time: worst.1,
        v,
    })
}
