//! Fixed-step closed-loop simulation and metric extraction.

mod metrics;
mod reference;

use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

pub use metrics::{
    closed_loop_jacobians, decay_fit, error_norms, gain_run, l2_gain_estimate, lyapunov_check, metrics_along,
    virtual_jacobians, DecayFit, GainRun, LyapunovReport, DEFAULT_WINDOW, FIT_FLOOR,
};
pub use reference::{Disturbance, Reference, ReferenceSpec};

use crate::model::PlantModel;
use crate::realization::{vtr_step, ControlError, Controller, Diagnostics, RefSample};
use crate::symdyn::EvalError;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Model(#[from] crate::model::ModelError),
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error("malformed trajectory csv: {0}")]
    Format(String),
}

/// One classic RK4 step of ẏ = rhs(t, y).
pub fn rk4_step<F>(rhs: &F, t: f64, y: &[f64], dt: f64) -> Result<Vec<f64>, SimError>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>, SimError>,
{
    let axpy = |a: &[f64], k: &[f64], h: f64| -> Vec<f64> { a.iter().zip(k).map(|(a, k)| a + h * k).collect() };
    let k1 = rhs(t, y)?;
    let k2 = rhs(t + 0.5 * dt, &axpy(y, &k1, 0.5 * dt))?;
    let k3 = rhs(t + 0.5 * dt, &axpy(y, &k2, 0.5 * dt))?;
    let k4 = rhs(t + dt, &axpy(y, &k3, dt))?;
    Ok((0..y.len())
        .map(|i| y[i] + dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]))
        .collect())
}

fn steps_for(t_end: f64, dt: f64) -> Result<usize, SimError> {
    if !(dt > 0.0) || !(t_end >= dt) {
        return Err(SimError::Config(format!("need dt > 0 and T >= dt (dt = {dt}, T = {t_end})")));
    }
    Ok((t_end / dt).round() as usize)
}

/// Time samples and states of a plain ODE solve.
#[derive(Debug, Clone, PartialEq)]
pub struct OdeSolution {
    pub t: Vec<f64>,
    pub y: Vec<Vec<f64>>,
    /// First time the state became non-finite or exceeded the blow-up bound.
    pub blowup_time: Option<f64>,
}

pub const BLOWUP_BOUND: f64 = 1e6;

fn blew_up(y: &[f64]) -> bool {
    y.iter().any(|v| !v.is_finite() || v.abs() > BLOWUP_BOUND)
}

pub fn integrate<F>(rhs: F, y0: &[f64], t_end: f64, dt: f64) -> Result<OdeSolution, SimError>
where
    F: Fn(f64, &[f64]) -> Result<Vec<f64>, SimError>,
{
    let steps = steps_for(t_end, dt)?;
    let mut sol = OdeSolution {
        t: vec![0.0],
        y: vec![y0.to_vec()],
        blowup_time: None,
    };
    for k in 0..steps {
        let t = k as f64 * dt;
        let next = rk4_step(&rhs, t, sol.y.last().expect("non-empty"), dt)?;
        let t1 = (k + 1) as f64 * dt;
        if blew_up(&next) {
            sol.blowup_time = Some(t1);
            break;
        }
        sol.t.push(t1);
        sol.y.push(next);
    }
    Ok(sol)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Hold {
    /// Controller evaluated at every RK4 stage.
    #[default]
    Continuous,
    /// Controller evaluated once per step and held.
    Zoh,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimOptions {
    pub t_end: f64,
    pub dt: f64,
    pub hold: Hold,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            t_end: 10.0,
            dt: 1e-3,
            hold: Hold::Continuous,
        }
    }
}

/// Per-step record of a closed-loop run.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Trajectory {
    pub t: Vec<f64>,
    pub x: Vec<Vec<f64>>,
    pub u: Vec<Vec<f64>>,
    pub w: Vec<Vec<f64>>,
    pub z: Vec<Vec<f64>>,
    pub x_star: Vec<Vec<f64>>,
    pub w_star: Vec<Vec<f64>>,
    pub z_star: Vec<Vec<f64>>,
    /// Controller state (virtual target) when the controller has one.
    pub chi_star: Vec<Vec<f64>>,
    pub diag: Vec<Diagnostics>,
    pub blowup_time: Option<f64>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    pub fn final_state(&self) -> &[f64] {
        self.x.last().map_or(&[], Vec::as_slice)
    }

    fn header(&self) -> Vec<String> {
        let cols = |name: &str, rows: &[Vec<f64>]| -> Vec<String> {
            let k = rows.first().map_or(0, Vec::len);
            (1..=k).map(|i| format!("{name}{i}")).collect()
        };
        let mut h = vec!["t".to_string()];
        h.extend(cols("x", &self.x));
        h.extend(cols("u", &self.u));
        h.extend(cols("w", &self.w));
        h.extend(cols("z", &self.z));
        h.extend(cols("xs", &self.x_star));
        h.extend(cols("ws", &self.w_star));
        h.extend(cols("zs", &self.z_star));
        h.extend(cols("chi", &self.chi_star));
        h.extend(["geodesic_energy", "geodesic_converged", "saturated"].map(String::from));
        h
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), SimError> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for k in 0..self.len() {
            let mut row = vec![format!("{}", self.t[k])];
            for block in [&self.x, &self.u, &self.w, &self.z, &self.x_star, &self.w_star, &self.z_star, &self.chi_star] {
                if let Some(r) = block.get(k) {
                    row.extend(r.iter().map(|v| format!("{v}")));
                }
            }
            let d = &self.diag[k];
            row.push(format!("{}", d.geodesic_energy));
            row.push(u8::from(d.geodesic_converged).to_string());
            row.push(u8::from(d.saturated).to_string());
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }

    /// Parses what [`Trajectory::write_csv`] produced.
    pub fn read_csv<R: Read>(input: R) -> Result<Self, SimError> {
        let mut rd = csv::Reader::from_reader(input);
        let header: Vec<String> = rd.headers()?.iter().map(String::from).collect();
        let group = |prefix: &str| -> Vec<usize> {
            header
                .iter()
                .enumerate()
                .filter(|(_, h)| {
                    h.strip_prefix(prefix)
                        .is_some_and(|rest| !rest.is_empty() && rest.chars().all(|c| c.is_ascii_digit()))
                })
                .map(|(i, _)| i)
                .collect()
        };
        let find = |name: &str| header.iter().position(|h| h == name).ok_or_else(|| SimError::Format(format!("missing column {name}")));
        let it = find("t")?;
        let (ie, ic, is) = (find("geodesic_energy")?, find("geodesic_converged")?, find("saturated")?);
        let groups = ["x", "u", "w", "z", "xs", "ws", "zs", "chi"].map(group);
        let mut tr = Trajectory::default();
        for rec in rd.records() {
            let rec = rec?;
            let num = |i: usize| -> Result<f64, SimError> {
                rec.get(i)
                    .ok_or_else(|| SimError::Format("short row".into()))?
                    .parse::<f64>()
                    .map_err(|e| SimError::Format(e.to_string()))
            };
            tr.t.push(num(it)?);
            let mut vals = Vec::with_capacity(8);
            for g in &groups {
                vals.push(g.iter().map(|&i| num(i)).collect::<Result<Vec<f64>, _>>()?);
            }
            let [x, u, w, z, xs, ws, zs, chi]: [Vec<f64>; 8] = vals.try_into().expect("eight groups");
            tr.x.push(x);
            tr.u.push(u);
            tr.w.push(w);
            tr.z.push(z);
            tr.x_star.push(xs);
            tr.w_star.push(ws);
            tr.z_star.push(zs);
            if !chi.is_empty() {
                tr.chi_star.push(chi);
            }
            tr.diag.push(Diagnostics {
                geodesic_energy: num(ie)?,
                geodesic_converged: num(ic)? != 0.0,
                saturated: num(is)? != 0.0,
                ..Default::default()
            });
        }
        Ok(tr)
    }
}

/// Closed loop ẋ = f(x, κ(x, z, r(t)), r_w(t) + d(t)) with controller state z,
/// re-initialized at reference jumps.
pub fn simulate(
    plant: &PlantModel,
    ctrl: &dyn Controller,
    reference: &Reference,
    disturbance: Option<&Disturbance>,
    x0: &[f64],
    opts: &SimOptions,
) -> Result<Trajectory, SimError> {
    let n = plant.dims.n;
    if x0.len() != n {
        return Err(SimError::Config(format!("x0 has {} entries, expected {n}", x0.len())));
    }
    if let Some(d) = disturbance {
        if d.channel() >= plant.dims.p {
            return Err(SimError::Config(format!("disturbance channel {} out of range", d.channel())));
        }
    }
    let steps = steps_for(opts.t_end, opts.dt)?;
    let w_at = |t: f64, r: &RefSample| -> Vec<f64> {
        let mut w = r.w.clone();
        if let Some(d) = disturbance {
            w[d.channel()] += d.value(t);
        }
        w
    };
    let r0 = reference.at(0.0)?;
    let mut y: Vec<f64> = x0.to_vec();
    y.extend(ctrl.initial_state(x0, &r0));
    let mut tr = Trajectory::default();

    let record = |t: f64, y: &[f64], tr: &mut Trajectory| -> Result<(Vec<f64>, RefSample), SimError> {
        let r = reference.at(t)?;
        let (x, z) = y.split_at(n);
        let out = ctrl.output(t, x, z, &r)?;
        let w = w_at(t, &r);
        tr.t.push(t);
        tr.x.push(x.to_vec());
        tr.z.push(plant.h(x, &out.u, &w)?);
        tr.z_star.push(reference.z_star(&r)?);
        tr.u.push(out.u.clone());
        tr.w.push(w);
        tr.x_star.push(r.x.clone());
        tr.w_star.push(r.w.clone());
        if !z.is_empty() {
            tr.chi_star.push(z.to_vec());
        }
        tr.diag.push(out.diag);
        Ok((out.u, r))
    };

    let rhs = |t: f64, y: &[f64]| -> Result<Vec<f64>, SimError> {
        let r = reference.at(t)?;
        let (x, z) = y.split_at(n);
        let out = ctrl.output(t, x, z, &r)?;
        let mut dy = plant.f(x, &out.u, &w_at(t, &r))?;
        dy.extend(out.state_dot);
        Ok(dy)
    };

    // controller state restarts from the new reference at each jump
    let resets: Vec<usize> = reference
        .jump_times()
        .iter()
        .map(|&tj| (tj / opts.dt - 1e-9).ceil() as usize)
        .collect();
    for k in 0..steps {
        let t = k as f64 * opts.dt;
        if y.len() > n && resets.contains(&k) {
            let r = reference.at(t)?;
            let z0 = ctrl.initial_state(&y[..n], &r);
            y.truncate(n);
            y.extend(z0);
        }
        let (u_held, _) = record(t, &y, &mut tr)?;
        let next = match opts.hold {
            Hold::Continuous => rk4_step(&rhs, t, &y, opts.dt)?,
            Hold::Zoh => {
                let (x, z) = y.split_at(n);
                let plant_rhs = |tt: f64, xx: &[f64]| -> Result<Vec<f64>, SimError> {
                    let r = reference.at(tt)?;
                    Ok(plant.f(xx, &u_held, &w_at(tt, &r))?)
                };
                let mut nx = rk4_step(&plant_rhs, t, x, opts.dt)?;
                let refer = |tt: f64| reference.at(tt).map_err(|e| ControlError::Feedforward(e.to_string()));
                nx.extend(vtr_step(ctrl, t, x, z, &refer, opts.dt)?);
                nx
            }
        };
        if blew_up(&next) {
            tr.blowup_time = Some((k + 1) as f64 * opts.dt);
            return Ok(tr);
        }
        y = next;
    }
    record(steps as f64 * opts.dt, &y, &mut tr)?;
    Ok(tr)
}

#[cfg(test)]
mod tests;
