//! Gain-scheduled LPV realizations and their analysis artifacts.

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use crate::quadrature::{GL_NODES, GL_WEIGHTS};
use crate::model::{plant_groups, EquilibriumFamily, Matrices, ModelError, PlantModel, ScheduledDynamics, SchedulingMap, System, FAMILY_PARAM};
use crate::realization::{ControlError, ControlOutput, Controller, Diagnostics, RefSample};
use crate::symdyn::{diff, fold, CompiledExpr, CompiledField, CompiledMatrix, EvalError, Expr, FieldError, VarGroup, VectorField};
use crate::synthesis::Certificate;

#[derive(Debug, thiserror::Error)]
pub enum LpvError {
    #[error("system `{0}` has no LPV gain schedule")]
    NoSchedule(String),
    #[error("system `{0}` has no equilibrium family")]
    NoFamily(String),
    #[error("precondition: {0}")]
    Precondition(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Field(#[from] FieldError),
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Control(#[from] ControlError),
}

fn p_groups() -> Vec<VarGroup> {
    vec![VarGroup::scalar(FAMILY_PARAM)]
}

fn xw_groups(sys_n: usize, sys_p: usize) -> Vec<VarGroup> {
    vec![VarGroup::indexed("x", sys_n), VarGroup::indexed("w", sys_p)]
}

fn compile_p(exprs: Vec<Expr>) -> Result<CompiledField, LpvError> {
    Ok(VectorField::new(exprs, p_groups())?.compile()?)
}

/// Replaces plant variables by the family's equilibrium expressions in p.
fn on_family(e: &Expr, fam: &EquilibriumFamily) -> Expr {
    let lookup = |name: &str| -> Option<Expr> {
        let (group, idx) = split_var(name)?;
        match group {
            "x" => fam.x_e.get(idx).cloned(),
            "u" => fam.u_e.get(idx).cloned(),
            "w" => fam.w_e.get(idx).cloned(),
            _ => None,
        }
    };
    fold(&e.substitute(&lookup))
}

fn split_var(name: &str) -> Option<(&str, usize)> {
    let pos = name.find(|c: char| c.is_ascii_digit())?;
    let idx: usize = name[pos..].parse().ok()?;
    Some((&name[..pos], idx.checked_sub(1)?))
}

fn d_p(v: &[Expr]) -> Vec<Expr> {
    v.iter().map(|e| diff(e, FAMILY_PARAM)).collect()
}

/// K(p) over the family parameter.
#[derive(Debug, Clone)]
pub struct GainSchedule {
    pub exprs: Vec<Vec<Expr>>,
    compiled: CompiledMatrix,
}

impl GainSchedule {
    pub fn new(exprs: Vec<Vec<Expr>>) -> Result<Self, LpvError> {
        let cols = exprs.first().map_or(0, Vec::len);
        let compiled = CompiledMatrix::new(&exprs, cols, &[FAMILY_PARAM.to_string()])?;
        Ok(Self { exprs, compiled })
    }

    pub fn from_system(sys: &System) -> Result<Self, LpvError> {
        let lpv = sys.lpv.as_ref().ok_or_else(|| LpvError::NoSchedule(sys.name.clone()))?;
        Self::new(lpv.gain.clone())
    }

    pub fn at(&self, p: f64) -> Result<DMatrix<f64>, EvalError> {
        self.compiled.eval(&[p])
    }
}

/// Where the naive law reads its scheduling parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamSource {
    /// Measured exogenous signal (GSC 1).
    Exogenous,
    /// Recovered from the state through the equilibrium relation.
    State,
}

fn family_of(sys: &System) -> Result<&EquilibriumFamily, LpvError> {
    sys.family().ok_or_else(|| LpvError::NoFamily(sys.name.clone()))
}

fn selector_expr(sys: &System, src: ParamSource) -> Result<Expr, LpvError> {
    let lpv = sys.lpv.as_ref().ok_or_else(|| LpvError::NoSchedule(sys.name.clone()))?;
    Ok(match src {
        ParamSource::Exogenous => lpv.exogenous.clone(),
        ParamSource::State => lpv.state.clone(),
    })
}

/// u = u_e(p) + K(p)(x − x_e(p)) with p read from (x, w).
#[derive(Debug, Clone)]
pub struct NaiveLaw {
    name: String,
    family: EquilibriumFamily,
    gain: GainSchedule,
    selector: CompiledExpr,
    selector_expr: Expr,
    law: Vec<Expr>,
}

impl NaiveLaw {
    pub fn new(sys: &System, gain: GainSchedule, source: ParamSource) -> Result<Self, LpvError> {
        let sel = selector_expr(sys, source)?;
        Self::with_selector(sys, gain, sel, match source {
            ParamSource::Exogenous => "gsc1",
            ParamSource::State => "gsc-eqsub",
        })
    }

    pub fn with_selector(sys: &System, gain: GainSchedule, selector: Expr, name: &str) -> Result<Self, LpvError> {
        let family = family_of(sys)?.clone();
        let d = sys.dims;
        if gain.exprs.len() != d.m || gain.exprs.iter().any(|r| r.len() != d.n) {
            return Err(LpvError::Precondition(format!("gain schedule must be {}x{}", d.m, d.n)));
        }
        let names: Vec<String> = xw_groups(d.n, d.p).into_iter().flat_map(|g| g.vars).collect();
        let layout = |v: &str| names.iter().position(|m| m == v);
        let compiled = CompiledExpr::new(&selector, &layout)?;
        let at_sel = |e: &Expr| fold(&e.substitute(&|v| (v == FAMILY_PARAM).then(|| selector.clone())));
        let law = (0..d.m)
            .map(|i| {
                let mut acc = at_sel(&family.u_e[i]);
                for j in 0..d.n {
                    let dx = crate::symdyn::sub(Expr::var(format!("x{}", j + 1)), at_sel(&family.x_e[j]));
                    acc = crate::symdyn::add(acc, crate::symdyn::mul(at_sel(&gain.exprs[i][j]), dx));
                }
                fold(&acc)
            })
            .collect();
        Ok(Self {
            name: name.into(),
            family,
            gain,
            selector: compiled,
            selector_expr: selector,
            law,
        })
    }

    /// κ(x, w) without saturation.
    pub fn law_exprs(&self) -> &[Expr] {
        &self.law
    }

    pub fn selector(&self) -> &Expr {
        &self.selector_expr
    }

    /// Scheduling parameter clamped to the family range, and whether it was clamped.
    pub fn parameter(&self, x: &[f64], w: &[f64]) -> Result<(f64, bool), EvalError> {
        let mut slots = x.to_vec();
        slots.extend_from_slice(w);
        let p = self.selector.eval(&slots)?;
        let [lo, hi] = self.family.range;
        let c = p.clamp(lo, hi);
        Ok((c, c != p))
    }

    pub fn eval(&self, x: &[f64], w: &[f64]) -> Result<(Vec<f64>, bool), EvalError> {
        let (p, sat) = self.parameter(x, w)?;
        Ok((self.eval_at(x, p)?, sat))
    }

    fn eval_at(&self, x: &[f64], p: f64) -> Result<Vec<f64>, EvalError> {
        let e = self.family.at(p)?;
        let k = self.gain.at(p)?;
        let dx = DVector::from_column_slice(x) - DVector::from_vec(e.x);
        let u = DVector::from_vec(e.u) + k * dx;
        Ok(u.iter().copied().collect())
    }
}

fn stateless(u: Vec<f64>, saturated: bool) -> ControlOutput {
    ControlOutput {
        u,
        state_dot: Vec::new(),
        diag: Diagnostics {
            geodesic_converged: true,
            saturated,
            ..Default::default()
        },
    }
}

impl Controller for NaiveLaw {
    fn name(&self) -> &str {
        &self.name
    }
    fn output(&self, _: f64, x: &[f64], _: &[f64], r: &RefSample) -> Result<ControlOutput, ControlError> {
        let (u, sat) = self.eval(x, &r.w)?;
        Ok(stateless(u, sat))
    }
}

/// K_h(p) = ∂u_e/∂p − K ∂x_e/∂p − ∂κ/∂w · ∂w_e/∂p at the family, m×1.
pub fn hidden_coupling(family: &EquilibriumFamily, gain: &GainSchedule, law: &[Expr]) -> Vec<Vec<Expr>> {
    use crate::symdyn::{add, mul, sub};
    let (dx, du, dw) = (d_p(&family.x_e), d_p(&family.u_e), d_p(&family.w_e));
    law.iter()
        .enumerate()
        .map(|(i, kappa)| {
            let mut acc = du[i].clone();
            for (j, dxj) in dx.iter().enumerate() {
                acc = sub(acc, mul(gain.exprs[i][j].clone(), dxj.clone()));
            }
            for (j, dwj) in dw.iter().enumerate() {
                let partial = on_family(&diff(kappa, &format!("w{}", j + 1)), family);
                acc = sub(acc, mul(partial, dwj.clone()));
            }
            vec![fold(&add(acc, Expr::zero()))]
        })
        .collect()
}

const GL_PANELS: usize = 16;

fn integrate(f: &dyn Fn(f64) -> Result<Vec<f64>, EvalError>, a: f64, b: f64, m: usize) -> Result<Vec<f64>, EvalError> {
    let mut acc = vec![0.0; m];
    if a == b {
        return Ok(acc);
    }
    let h = (b - a) / GL_PANELS as f64;
    for k in 0..GL_PANELS {
        let mid = a + (k as f64 + 0.5) * h;
        for (z, wgt) in GL_NODES.iter().zip(GL_WEIGHTS) {
            let v = f(mid + 0.5 * h * z)?;
            for (s, vi) in acc.iter_mut().zip(v) {
                *s += 0.5 * h * wgt * vi;
            }
        }
    }
    Ok(acc)
}

/// Equilibrium-substituted law minus ∫_{p_ext}^{p_state} K_h dp (GSC 2).
#[derive(Debug, Clone)]
pub struct CompensatedLaw {
    base: NaiveLaw,
    exogenous: NaiveLaw,
    kh_exprs: Vec<Vec<Expr>>,
    kh: CompiledField,
}

impl CompensatedLaw {
    pub fn new(sys: &System, gain: GainSchedule) -> Result<Self, LpvError> {
        let base = NaiveLaw::new(sys, gain.clone(), ParamSource::State)?;
        let exogenous = NaiveLaw::new(sys, gain, ParamSource::Exogenous)?;
        let kh_exprs = hidden_coupling(&base.family, &base.gain, &base.law);
        let kh = compile_p(kh_exprs.iter().map(|r| r[0].clone()).collect())?;
        Ok(Self {
            base,
            exogenous,
            kh_exprs,
            kh,
        })
    }

    pub fn hidden_coupling(&self) -> &[Vec<Expr>] {
        &self.kh_exprs
    }

    pub fn eval(&self, x: &[f64], w: &[f64]) -> Result<(Vec<f64>, bool), EvalError> {
        let (p_state, s1) = self.base.parameter(x, w)?;
        let (p_ext, s2) = self.exogenous.parameter(x, w)?;
        let u0 = self.base.eval_at(x, p_state)?;
        let m = u0.len();
        let corr = integrate(&|p| self.kh.eval(&[p]), p_ext, p_state, m)?;
        Ok((u0.iter().zip(corr).map(|(u, c)| u - c).collect(), s1 || s2))
    }
}

impl Controller for CompensatedLaw {
    fn name(&self) -> &str {
        "gsc2"
    }
    fn output(&self, _: f64, x: &[f64], _: &[f64], r: &RefSample) -> Result<ControlOutput, ControlError> {
        let (u, sat) = self.eval(x, &r.w)?;
        Ok(stateless(u, sat))
    }
}

/// u = u* + K(ψ(x))(x − x*) with K from a certificate.
#[derive(Debug, Clone)]
pub struct GlpvLaw {
    cert: Certificate,
    sched: SchedulingMap,
}

impl GlpvLaw {
    pub fn new(sys: &System, cert: Certificate) -> Result<Self, LpvError> {
        if cert.basis.n != sys.dims.n || cert.basis.m != sys.dims.m || cert.basis.w.n_vars != sys.sched.len() {
            return Err(LpvError::Precondition("certificate does not match the system".into()));
        }
        Ok(Self {
            cert,
            sched: sys.sched.clone(),
        })
    }

    pub fn gain_at_state(&self, x: &[f64], w: &[f64]) -> Result<(DMatrix<f64>, bool), EvalError> {
        let (s, sat) = self.sched.saturate(&self.sched.eval(x, x, w)?);
        Ok((self.cert.gain_at(&s), sat))
    }
}

impl Controller for GlpvLaw {
    fn name(&self) -> &str {
        "glpv"
    }
    fn output(&self, _: f64, x: &[f64], _: &[f64], r: &RefSample) -> Result<ControlOutput, ControlError> {
        let (k, sat) = self.gain_at_state(x, &r.w)?;
        let u = DVector::from_column_slice(&r.u) + k * (DVector::from_column_slice(x) - DVector::from_column_slice(&r.x));
        Ok(stateless(u.iter().copied().collect(), sat))
    }
}

/// E(p) = B(∂u_e/∂p − K ∂x_e/∂p) + B_w ∂w_e/∂p at the family, n×1.
pub fn residual_term(plant: &PlantModel, family: &EquilibriumFamily, gain: &GainSchedule) -> Result<Vec<Expr>, LpvError> {
    use crate::symdyn::{add, mul, sub};
    let b = plant.f.jacobian("u")?;
    let bw = plant.f.jacobian("w")?;
    let (dx, du, dw) = (d_p(&family.x_e), d_p(&family.u_e), d_p(&family.w_e));
    let m = du.len();
    let drive: Vec<Expr> = (0..m)
        .map(|i| {
            let mut acc = du[i].clone();
            for (j, dxj) in dx.iter().enumerate() {
                acc = sub(acc, mul(gain.exprs[i][j].clone(), dxj.clone()));
            }
            acc
        })
        .collect();
    Ok((0..plant.dims.n)
        .map(|r| {
            let mut acc = Expr::zero();
            for (i, d) in drive.iter().enumerate() {
                acc = add(acc, mul(on_family(&b[r][i], family), d.clone()));
            }
            for (j, d) in dw.iter().enumerate() {
                acc = add(acc, mul(on_family(&bw[r][j], family), d.clone()));
            }
            fold(&acc)
        })
        .collect())
}

/// ∂x_e/∂p.
pub fn reference_drift(family: &EquilibriumFamily) -> Vec<Expr> {
    d_p(&family.x_e).iter().map(fold).collect()
}

pub const EQUILIBRIUM_TOL: f64 = 1e-8;

/// Plant Jacobians at (x_e(p), u_e(p), w_e(p)).
pub fn local_linearize(plant: &PlantModel, family: &EquilibriumFamily, p: f64) -> Result<Matrices, LpvError> {
    let e = family.at(p)?;
    let res = plant.f(&e.x, &e.u, &e.w)?.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if res > EQUILIBRIUM_TOL {
        return Err(LpvError::Precondition(format!("f(x_e, u_e, w_e) = {res:.3e} at p = {p}")));
    }
    let slots: Vec<f64> = e.x.iter().chain(&e.u).chain(&e.w).copied().collect();
    let names: Vec<String> = plant_groups(plant.dims).into_iter().flat_map(|g| g.vars).collect();
    let jac = |field: &VectorField, g: &str| -> Result<DMatrix<f64>, LpvError> {
        let j = field.jacobian(g)?;
        let cols = field.group(g).map_or(0, VarGroup::len);
        Ok(CompiledMatrix::new(&j, cols, &names)?.eval(&slots)?)
    };
    Ok(Matrices {
        a: jac(&plant.f, "x")?,
        b: jac(&plant.f, "u")?,
        bw: jac(&plant.f, "w")?,
        c: jac(&plant.h, "x")?,
        d: jac(&plant.h, "u")?,
        dw: jac(&plant.h, "w")?,
    })
}

/// Max residuals of u_e = κ(x_e, w_e) and ∂κ/∂x = K along the family.
#[derive(Debug, Clone, Serialize)]
pub struct ConditionReport {
    pub equilibrium_residual: f64,
    pub gain_residual: f64,
    pub equilibrium_holds: bool,
    pub gain_holds: bool,
    /// Entry of ∂κ/∂x − K with the largest magnitude, as (row, col, p, value).
    pub worst_gain_term: Option<(usize, usize, f64, f64)>,
}

pub fn realization_conditions(sys: &System, law: &NaiveLaw, samples: usize) -> Result<ConditionReport, LpvError> {
    let fam = &law.family;
    let d = sys.dims;
    let groups = xw_groups(d.n, d.p);
    let kappa = VectorField::new(law.law.clone(), groups.clone())?;
    let jx = kappa.jacobian("x")?;
    let names: Vec<String> = groups.into_iter().flat_map(|g| g.vars).collect();
    let kappa_c = kappa.compile()?;
    let jx_c = CompiledMatrix::new(&jx, d.n, &names)?;
    let mut eq: f64 = 0.0;
    let mut worst: Option<(usize, usize, f64, f64)> = None;
    for k in 0..samples.max(2) {
        let p = fam.range[0] + (fam.range[1] - fam.range[0]) * k as f64 / (samples.max(2) - 1) as f64;
        let e = fam.at(p)?;
        let slots: Vec<f64> = e.x.iter().chain(&e.w).copied().collect();
        let u = kappa_c.eval(&slots)?;
        eq = u.iter().zip(&e.u).fold(eq, |a, (x, y)| a.max((x - y).abs()));
        let gap = jx_c.eval(&slots)? - law.gain.at(p)?;
        for i in 0..d.m {
            for j in 0..d.n {
                if worst.is_none_or(|w| gap[(i, j)].abs() > w.3.abs()) {
                    worst = Some((i, j, p, gap[(i, j)]));
                }
            }
        }
    }
    let g = worst.map_or(0.0, |w| w.3.abs());
    Ok(ConditionReport {
        equilibrium_residual: eq,
        gain_residual: g,
        equilibrium_holds: eq <= 1e-9,
        gain_holds: g <= 1e-9,
        worst_gain_term: worst.filter(|w| w.3.abs() > 1e-9),
    })
}

/// Δ(x, x_e) and the perturbed Lyapunov derivative matrix 𝒬_Δ.
#[derive(Debug, Clone)]
pub struct Perturbation {
    pub delta: DMatrix<f64>,
    pub q: DMatrix<f64>,
    pub min_eig: f64,
    pub max_eig: f64,
}

impl Perturbation {
    /// 𝒬_Δ ≺ 0.
    pub fn guaranteed(&self) -> bool {
        self.max_eig < 0.0
    }
}

pub fn glpv_perturbation(
    sd: &ScheduledDynamics,
    sched: &SchedulingMap,
    cert: &Certificate,
    x: &[f64],
    x_e: &[f64],
    w: &[f64],
) -> Result<Perturbation, LpvError> {
    let (s, _) = sched.saturate(&sched.eval(x, x, w)?);
    let (s_e, _) = sched.saturate(&sched.eval(x_e, x_e, w)?);
    let m: Matrices = sd.eval(&s)?;
    let a_e = sd.eval(&s_e)?.a;
    let dx = DVector::from_column_slice(x) - DVector::from_column_slice(x_e);
    let n = dx.len();
    let delta = if dx.norm_squared() == 0.0 {
        DMatrix::zeros(n, n)
    } else {
        let v = (&m.a - a_e) * DVector::from_column_slice(x_e);
        &v * dx.transpose() / dx.norm_squared()
    };
    let metric = cert.metric_at(&s);
    let acl = &m.a + &m.b * cert.gain_at(&s);
    let q0 = acl.transpose() * &metric + &metric * &acl;
    let q = &q0 + delta.transpose() * &metric + &metric * &delta;
    let e = ((&q + q.transpose()) * 0.5).symmetric_eigenvalues();
    Ok(Perturbation {
        delta,
        min_eig: e.min(),
        max_eig: e.max(),
        q,
    })
}

pub const HURWITZ_TOL: f64 = 1e-9;

/// max Re λ(J).
pub fn spectral_abscissa(j: &DMatrix<f64>) -> f64 {
    j.complex_eigenvalues().iter().map(|c| c.re).fold(f64::NEG_INFINITY, f64::max)
}

/// Jacobian of x ↦ f(x, κ(x, w), w) from a symbolic law.
pub struct SymbolicClosedLoop {
    jac: CompiledMatrix,
    n: usize,
}

impl SymbolicClosedLoop {
    pub fn new(plant: &PlantModel, law: &[Expr]) -> Result<Self, LpvError> {
        let d = plant.dims;
        let subst = |name: &str| -> Option<Expr> {
            let (g, i) = split_var(name)?;
            (g == "u").then(|| law[i].clone())
        };
        let closed: Vec<Expr> = plant.f.entries().iter().map(|e| fold(&e.substitute(&subst))).collect();
        let field = VectorField::new(closed, xw_groups(d.n, d.p))?;
        let jac = field.jacobian("x")?;
        let names: Vec<String> = xw_groups(d.n, d.p).into_iter().flat_map(|g| g.vars).collect();
        Ok(Self {
            jac: CompiledMatrix::new(&jac, d.n, &names)?,
            n: d.n,
        })
    }

    pub fn jacobian(&self, x: &[f64], w: &[f64]) -> Result<DMatrix<f64>, EvalError> {
        debug_assert_eq!(x.len(), self.n);
        let slots: Vec<f64> = x.iter().chain(w).copied().collect();
        self.jac.eval(&slots)
    }
}

/// Central-difference Jacobian of x ↦ f(x, ctrl(x), w) for a stateless controller.
pub fn fd_closed_loop_jacobian(
    plant: &PlantModel,
    ctrl: &dyn Controller,
    x: &[f64],
    r: &RefSample,
) -> Result<DMatrix<f64>, LpvError> {
    let n = x.len();
    let f = |xx: &[f64]| -> Result<DVector<f64>, LpvError> {
        let u = ctrl.output(0.0, xx, &[], r)?.u;
        Ok(DVector::from_vec(plant.f(xx, &u, &r.w)?))
    };
    let mut j = DMatrix::zeros(n, n);
    for k in 0..n {
        let h = 1e-6 * (1.0 + x[k].abs());
        let mut p = x.to_vec();
        let mut m = x.to_vec();
        p[k] += h;
        m[k] -= h;
        j.set_column(k, &((f(&p)? - f(&m)?) / (2.0 * h)));
    }
    Ok(j)
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionCell {
    pub x: Vec<f64>,
    pub max_real: f64,
    pub hurwitz: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct RegionMap {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points: Vec<usize>,
    pub cells: Vec<RegionCell>,
}

impl RegionMap {
    pub fn unstable_fraction(&self) -> f64 {
        self.cells.iter().filter(|c| !c.hurwitz).count() as f64 / self.cells.len().max(1) as f64
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), LpvError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header: Vec<String> = (1..=self.lo.len()).map(|k| format!("x{k}")).collect();
        header.push("max_real".into());
        header.push("hurwitz".into());
        w.write_record(&header)?;
        for c in &self.cells {
            let mut row: Vec<String> = c.x.iter().map(|v| format!("{v}")).collect();
            row.push(format!("{}", c.max_real));
            row.push(if c.hurwitz { "1".into() } else { "0".into() });
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Labels every point of a tensor grid over the state box by the Hurwitz test of `jac`.
pub fn instability_region<J>(lo: &[f64], hi: &[f64], points: &[usize], jac: J) -> Result<RegionMap, LpvError>
where
    J: Fn(&[f64]) -> Result<DMatrix<f64>, LpvError> + Sync,
{
    if lo.len() != hi.len() || lo.len() != points.len() || points.iter().any(|&p| p < 2) {
        return Err(LpvError::Precondition("region grid needs matching bounds and at least 2 points per axis".into()));
    }
    let total: usize = points.iter().product();
    let coords = |mut idx: usize| -> Vec<f64> {
        let mut x = vec![0.0; lo.len()];
        for k in (0..lo.len()).rev() {
            let i = idx % points[k];
            idx /= points[k];
            x[k] = lo[k] + (hi[k] - lo[k]) * i as f64 / (points[k] - 1) as f64;
        }
        x
    };
    let cells = (0..total)
        .into_par_iter()
        .map(|idx| {
            let x = coords(idx);
            let j = jac(&x)?;
            let max_real = spectral_abscissa(&j);
            Ok(RegionCell {
                hurwitz: max_real < -HURWITZ_TOL,
                max_real,
                x,
            })
        })
        .collect::<Result<Vec<_>, LpvError>>()?;
    Ok(RegionMap {
        lo: lo.to_vec(),
        hi: hi.to_vec(),
        points: points.to_vec(),
        cells,
    })
}

#[cfg(test)]
mod tests;
