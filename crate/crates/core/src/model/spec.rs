use serde::{Deserialize, Serialize};

use super::{
    Dims, EquilibriumFamily, LpvData, ModelError, PlantModel, SchedulingMap, System, TargetBehavior,
    TrajectoryTarget, VirtualModel,
};
use crate::symdyn::{fold, parse, VarEnv};

/// JSON description of a user-defined system.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSpec {
    pub name: String,
    #[serde(default)]
    pub description: String,
    pub dims: Dims,
    pub f: Vec<String>,
    pub h: Vec<String>,
    pub fhat: Vec<String>,
    pub hhat: Vec<String>,
    /// σ = ψ(χ, x, w).
    pub psi: Vec<String>,
    /// Scheduling box 𝒫, one `[lo, hi]` per ψ entry.
    #[serde(rename = "box")]
    pub sched_box: Vec<[f64; 2]>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub rate_bounds: Option<Vec<[f64; 2]>>,
    /// Per-coordinate sampling interval for embedding checks.
    #[serde(default = "default_sample_box")]
    pub sample_box: [f64; 2],
    pub target: TargetSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lpv: Option<LpvSpec>,
}

fn default_sample_box() -> [f64; 2] {
    [-3.0, 3.0]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetSpec {
    /// Family over the scalar parameter `p`.
    Equilibrium {
        range: [f64; 2],
        x_e: Vec<String>,
        u_e: Vec<String>,
        #[serde(default)]
        w_e: Option<Vec<String>>,
    },
    /// Explicit functions of `t`.
    Trajectory {
        x_star: Vec<String>,
        u_star: Vec<String>,
        #[serde(default)]
        w_star: Option<Vec<String>>,
    },
}

/// Gain schedule K(p) and the two ways of recovering p from signals.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LpvSpec {
    pub gain: Vec<Vec<String>>,
    pub exogenous: String,
    pub state: String,
}

fn zeros(k: usize) -> Vec<String> {
    vec!["0".to_string(); k]
}

impl SystemSpec {
    pub fn build(&self) -> Result<System, ModelError> {
        let d = self.dims;
        let plant = PlantModel::new(d, &self.f, &self.h)?;
        let virt = VirtualModel::new(d, &self.fhat, &self.hhat)?;
        let sched = SchedulingMap::new(d, &self.psi, &self.sched_box, self.rate_bounds.clone())?;
        if !(self.sample_box[0] < self.sample_box[1]) {
            return Err(ModelError::Box(format!("sample_box {:?}", self.sample_box)));
        }
        let target = match &self.target {
            TargetSpec::Equilibrium { range, x_e, u_e, w_e } => TargetBehavior::Equilibrium(EquilibriumFamily::new(
                d,
                *range,
                x_e,
                u_e,
                &w_e.clone().unwrap_or_else(|| zeros(d.p)),
            )?),
            TargetSpec::Trajectory { x_star, u_star, w_star } => TargetBehavior::Trajectory(TrajectoryTarget::new(
                d,
                x_star,
                u_star,
                &w_star.clone().unwrap_or_else(|| zeros(d.p)),
            )?),
        };
        let lpv = match &self.lpv {
            None => None,
            Some(l) => Some(build_lpv(d, l)?),
        };
        Ok(System {
            name: self.name.clone(),
            description: self.description.clone(),
            dims: d,
            plant,
            virt,
            sched,
            target,
            sample_box: self.sample_box,
            lpv,
        })
    }
}

fn build_lpv(d: Dims, l: &LpvSpec) -> Result<LpvData, ModelError> {
    let parse_in = |what: &str, text: &str, env: &VarEnv| {
        parse(text, env).map(|e| fold(&e)).map_err(|source| ModelError::Parse {
            what: what.into(),
            source,
        })
    };
    if l.gain.len() != d.m || l.gain.iter().any(|r| r.len() != d.n) {
        return Err(ModelError::Dimension {
            what: "lpv.gain".into(),
            expected: d.m * d.n,
            found: l.gain.iter().map(Vec::len).sum(),
        });
    }
    let p_env = VarEnv::new([super::FAMILY_PARAM]);
    let gain = l
        .gain
        .iter()
        .map(|row| row.iter().map(|t| parse_in("lpv.gain", t, &p_env)).collect())
        .collect::<Result<Vec<Vec<_>>, _>>()?;
    let xw = VarEnv::new(
        (1..=d.n)
            .map(|i| format!("x{i}"))
            .chain((1..=d.p).map(|i| format!("w{i}"))),
    );
    Ok(LpvData {
        gain,
        exogenous: parse_in("lpv.exogenous", &l.exogenous, &xw)?,
        state: parse_in("lpv.state", &l.state, &xw)?,
    })
}
