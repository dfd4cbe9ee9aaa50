use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::SimError;
use crate::model::{EquilibriumFamily, PlantModel, System, TargetBehavior, TrajectoryTarget, TIME_VAR};
use crate::realization::RefSample;
use crate::symdyn::{diff, parse, CompiledExpr, Expr, VarEnv};

/// Family parameter as a function of time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum ReferenceSpec {
    /// p(t) = value.
    Setpoint { value: f64 },
    /// p(t) given by an expression in t.
    Expr { p: String },
    /// Piecewise-constant p, `values[k]` from `times[k]` on.
    Steps { times: Vec<f64>, values: Vec<f64> },
    /// The system's own trajectory target.
    Target,
}

enum Source {
    Family {
        family: EquilibriumFamily,
        schedule: Schedule,
    },
    Trajectory(TrajectoryTarget),
}

enum Schedule {
    Expr { p: CompiledExpr, dp: CompiledExpr },
    Steps { times: Vec<f64>, values: Vec<f64> },
}

impl Schedule {
    fn at(&self, t: f64) -> Result<(f64, f64), SimError> {
        match self {
            Schedule::Expr { p, dp } => Ok((p.eval(&[t])?, dp.eval(&[t])?)),
            Schedule::Steps { times, values } => {
                let k = times.iter().rposition(|&s| s <= t).unwrap_or(0);
                Ok((values[k], 0.0))
            }
        }
    }
}

/// Reference sampler combining a target source with the plant.
pub struct Reference {
    source: Source,
    plant: PlantModel,
}

impl Reference {
    pub fn new(sys: &System, spec: &ReferenceSpec) -> Result<Self, SimError> {
        let source = match (spec, &sys.target) {
            (ReferenceSpec::Target, TargetBehavior::Trajectory(tt)) => Source::Trajectory(tt.clone()),
            (ReferenceSpec::Target, TargetBehavior::Equilibrium(f)) => Source::Family {
                family: f.clone(),
                schedule: Schedule::Steps {
                    times: vec![0.0],
                    values: vec![0.5 * (f.range[0] + f.range[1])],
                },
            },
            (_, TargetBehavior::Trajectory(_)) => {
                return Err(SimError::Config(format!("system `{}` has no equilibrium family", sys.name)))
            }
            (spec, TargetBehavior::Equilibrium(f)) => Source::Family {
                family: f.clone(),
                schedule: schedule(spec)?,
            },
        };
        Ok(Self {
            source,
            plant: sys.plant.clone(),
        })
    }

    pub fn at(&self, t: f64) -> Result<RefSample, SimError> {
        match &self.source {
            Source::Trajectory(tt) => {
                let (pt, x_dot) = tt.at(t)?;
                Ok(RefSample {
                    x: pt.x,
                    u: pt.u,
                    w: pt.w,
                    x_dot,
                })
            }
            Source::Family { family, schedule } => {
                let (p, dp) = schedule.at(t)?;
                let e = family.at(p)?;
                let de = family.derivative_at(p)?;
                let x_dot: Vec<f64> = de.x.iter().map(|d| d * dp).collect();
                let w = e.w;
                let u = if dp == 0.0 {
                    e.u
                } else {
                    input_for(&self.plant, &e.x, &e.u, &w, &x_dot)?
                };
                Ok(RefSample { x: e.x, u, w, x_dot })
            }
        }
    }

    /// Times after the start at which the reference jumps.
    pub fn jump_times(&self) -> Vec<f64> {
        match &self.source {
            Source::Family {
                schedule: Schedule::Steps { times, .. },
                ..
            } => times.iter().copied().filter(|&t| t > 0.0).collect(),
            _ => Vec::new(),
        }
    }

    /// Performance output h(x*, u*, w*).
    pub fn z_star(&self, r: &RefSample) -> Result<Vec<f64>, SimError> {
        Ok(self.plant.h(&r.x, &r.u, &r.w)?)
    }
}

fn schedule(spec: &ReferenceSpec) -> Result<Schedule, SimError> {
    let env = VarEnv::new([TIME_VAR.to_string()]);
    let layout = |v: &str| (v == TIME_VAR).then_some(0);
    let compile = |e: &Expr| CompiledExpr::new(e, &layout).map_err(SimError::from);
    match spec {
        ReferenceSpec::Setpoint { value } => Ok(Schedule::Steps {
            times: vec![0.0],
            values: vec![*value],
        }),
        ReferenceSpec::Expr { p } => {
            let e = parse(p, &env).map_err(|e| SimError::Config(format!("reference `{p}`: {e}")))?;
            let d = diff(&e, TIME_VAR);
            Ok(Schedule::Expr {
                p: compile(&e)?,
                dp: compile(&d)?,
            })
        }
        ReferenceSpec::Steps { times, values } => {
            if times.is_empty() || times.len() != values.len() || times.windows(2).any(|w| w[1] <= w[0]) {
                return Err(SimError::Config("steps need matching, increasing times and values".into()));
            }
            Ok(Schedule::Steps {
                times: times.clone(),
                values: values.clone(),
            })
        }
        ReferenceSpec::Target => unreachable!("handled by the caller"),
    }
}

/// u solving f(x, u, w) = ẋ in least squares, assuming f is affine in u.
fn input_for(plant: &PlantModel, x: &[f64], u0: &[f64], w: &[f64], x_dot: &[f64]) -> Result<Vec<f64>, SimError> {
    let m = u0.len();
    let f0 = DVector::from_vec(plant.f(x, u0, w)?);
    let mut b = DMatrix::zeros(f0.len(), m);
    for j in 0..m {
        let mut u = u0.to_vec();
        u[j] += 1.0;
        b.set_column(j, &(DVector::from_vec(plant.f(x, &u, w)?) - &f0));
    }
    let rhs = DVector::from_column_slice(x_dot) - f0;
    let du = b.svd(true, true).solve(&rhs, 1e-12).map_err(|e| SimError::Config(e.to_string()))?;
    Ok(u0.iter().zip(du.iter()).map(|(a, b)| a + b).collect())
}

/// Additive signal on one w channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Disturbance {
    Sine {
        amplitude: f64,
        frequency: f64,
        #[serde(default)]
        channel: usize,
    },
    /// amplitude·(1 − e^{−(t−t0)/tau}) for t ≥ t0.
    FilteredStep {
        amplitude: f64,
        tau: f64,
        #[serde(default)]
        t0: f64,
        #[serde(default)]
        channel: usize,
    },
}

impl Disturbance {
    pub fn channel(&self) -> usize {
        match self {
            Disturbance::Sine { channel, .. } | Disturbance::FilteredStep { channel, .. } => *channel,
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match *self {
            Disturbance::Sine { amplitude, frequency, .. } => amplitude * (frequency * t).sin(),
            Disturbance::FilteredStep { amplitude, tau, t0, .. } => {
                if t < t0 {
                    0.0
                } else {
                    amplitude * (1.0 - (-(t - t0) / tau).exp())
                }
            }
        }
    }

    /// Five sinusoids and one filtered step of unit amplitude.
    pub fn suite() -> Vec<Disturbance> {
        let mut s: Vec<Disturbance> = [0.1, 0.5, 1.0, 2.0, 5.0]
            .into_iter()
            .map(|frequency| Disturbance::Sine {
                amplitude: 1.0,
                frequency,
                channel: 0,
            })
            .collect();
        s.push(Disturbance::FilteredStep {
            amplitude: 1.0,
            tau: 0.5,
            t0: 0.0,
            channel: 0,
        });
        s
    }
}
