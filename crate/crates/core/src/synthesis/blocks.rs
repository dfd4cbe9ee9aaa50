use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::basis::BasisParam;
use super::SynthesisError;
use crate::model::{Matrices, ScheduledDynamics, SchedulingMap};

/// Synthesis grid over the scheduling box.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub points: usize,
    /// Bounds on σ̇ per coordinate; needed when W varies with σ.
    #[serde(default)]
    pub rate: Option<Vec<[f64; 2]>>,
    /// Validation grid uses (points − 1)·multiplier + 1 points per axis.
    pub dense_multiplier: usize,
}

impl GridSpec {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>, points: usize) -> Self {
        Self {
            lo,
            hi,
            points,
            rate: None,
            dense_multiplier: 10,
        }
    }

    pub fn from_map(map: &SchedulingMap, points: usize) -> Self {
        Self {
            rate: map.rate.clone(),
            ..Self::new(map.lo.clone(), map.hi.clone(), points)
        }
    }

    pub fn dense_points(&self) -> usize {
        (self.points - 1) * self.dense_multiplier + 1
    }

    fn check(&self) -> Result<(), SynthesisError> {
        if self.points < 2 {
            return Err(SynthesisError::Grid("at least two points per axis".into()));
        }
        if self.dense_multiplier < 2 {
            return Err(SynthesisError::Grid("validation grid must be strictly finer".into()));
        }
        if self.lo.len() != self.hi.len() || self.lo.iter().zip(&self.hi).any(|(l, h)| !(l < h)) {
            return Err(SynthesisError::Grid("malformed box".into()));
        }
        Ok(())
    }

    /// Tensor grid with `per_axis` points per coordinate, first axis slowest.
    pub fn tensor(&self, per_axis: usize) -> Vec<Vec<f64>> {
        let k = self.lo.len();
        let mut out = vec![Vec::with_capacity(k)];
        for d in 0..k {
            let axis: Vec<f64> = (0..per_axis)
                .map(|i| {
                    if i + 1 == per_axis {
                        self.hi[d]
                    } else {
                        self.lo[d] + (self.hi[d] - self.lo[d]) * i as f64 / (per_axis - 1) as f64
                    }
                })
                .collect();
            out = out
                .into_iter()
                .flat_map(|p| {
                    axis.iter().map(move |&v| {
                        let mut q = p.clone();
                        q.push(v);
                        q
                    })
                })
                .collect();
        }
        out
    }

    pub fn synthesis_grid(&self) -> Vec<Vec<f64>> {
        self.tensor(self.points)
    }

    pub fn validation_grid(&self) -> Vec<Vec<f64>> {
        self.tensor(self.dense_points())
    }

    /// Vertices of the rate box (a single zero vertex when W is constant).
    fn rate_vertices(&self, basis: &BasisParam) -> Result<Vec<Vec<f64>>, SynthesisError> {
        if basis.w.is_constant() {
            return Ok(vec![vec![0.0; self.lo.len()]]);
        }
        let rate = self.rate.as_ref().ok_or(SynthesisError::MissingRateBounds)?;
        let mut out = vec![Vec::new()];
        for [lo, hi] in rate {
            out = out
                .into_iter()
                .flat_map(|v: Vec<f64>| {
                    let mut a = v.clone();
                    a.push(*lo);
                    let mut b = v;
                    b.push(*hi);
                    if lo == hi {
                        vec![a]
                    } else {
                        vec![a, b]
                    }
                })
                .collect();
        }
        Ok(out)
    }
}

/// Required sign of an LMI block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Sign {
    /// F(x) ⪯ −εI
    NegDef,
    /// F(x) ⪰ εI
    PosDef,
}

/// F(x) = F₀ + Σ_k x_k F_k with a sign requirement.
#[derive(Debug, Clone)]
pub struct LmiBlock {
    pub label: String,
    pub f0: DMatrix<f64>,
    pub fk: Vec<DMatrix<f64>>,
    pub sign: Sign,
}

impl LmiBlock {
    pub fn size(&self) -> usize {
        self.f0.nrows()
    }

    pub fn eval(&self, x: &[f64]) -> DMatrix<f64> {
        let mut f = self.f0.clone();
        for (xk, fk) in x.iter().zip(&self.fk) {
            if *xk != 0.0 {
                f += fk * *xk;
            }
        }
        f
    }

    /// Signed margin: λ_min(F) for ⪰ blocks, −λ_max(F) for ⪯ blocks.
    pub fn margin(&self, x: &[f64]) -> f64 {
        let f = self.eval(x);
        let f = match self.sign {
            Sign::NegDef => -f,
            Sign::PosDef => f,
        };
        min_eig(&f)
    }
}

pub(crate) fn min_eig(f: &DMatrix<f64>) -> f64 {
    let sym = (f + f.transpose()) * 0.5;
    sym.symmetric_eigenvalues().min()
}

pub const DEFAULT_A1: f64 = 1e-3;

#[derive(Clone, Copy)]
enum Kind {
    Stabilization { lambda: f64 },
    Robust { alpha: f64 },
}

fn block_at(
    m: &Matrices,
    basis: &BasisParam,
    s: &[f64],
    v: &[f64],
    kind: Kind,
    label: String,
) -> LmiBlock {
    let (n, p) = (basis.n, m.bw.ncols());
    let q = m.c.nrows();
    let size = match kind {
        Kind::Stabilization { .. } => n,
        Kind::Robust { .. } => n + p + q,
    };
    let phi_w = basis.w.eval(s);
    let grad_w = basis.w.gradient(s);
    let phi_y = basis.y.eval(s);
    let mut fk = Vec::with_capacity(basis.dim());
    for (t, i, j) in basis.w_coordinates() {
        let e = basis.sym_unit(i, j);
        let wk = &e * phi_w[t];
        let wdot: f64 = grad_w[t].iter().zip(v).map(|(g, r)| g * r).sum();
        let mut core = &m.a * &wk + &wk * m.a.transpose() - &e * wdot;
        let mut f = DMatrix::zeros(size, size);
        match kind {
            Kind::Stabilization { lambda } => {
                core += &wk * (2.0 * lambda);
                f.view_mut((0, 0), (n, n)).copy_from(&core);
            }
            Kind::Robust { .. } => {
                f.view_mut((0, 0), (n, n)).copy_from(&core);
                let cw = &m.c * &wk;
                f.view_mut((n + p, 0), (q, n)).copy_from(&cw);
                f.view_mut((0, n + p), (n, q)).copy_from(&cw.transpose());
            }
        }
        fk.push(f);
    }
    for (t, i, j) in basis.y_coordinates() {
        let mut yk = DMatrix::zeros(basis.m, n);
        yk[(i, j)] = phi_y[t];
        let by = &m.b * &yk;
        let mut f = DMatrix::zeros(size, size);
        f.view_mut((0, 0), (n, n)).copy_from(&(&by + by.transpose()));
        if let Kind::Robust { .. } = kind {
            let dy = &m.d * &yk;
            f.view_mut((n + p, 0), (q, n)).copy_from(&dy);
            f.view_mut((0, n + p), (n, q)).copy_from(&dy.transpose());
        }
        fk.push(f);
    }
    let mut f0 = DMatrix::zeros(size, size);
    if let Kind::Robust { alpha } = kind {
        f0.view_mut((0, n), (n, p)).copy_from(&m.bw);
        f0.view_mut((n, 0), (p, n)).copy_from(&m.bw.transpose());
        f0.view_mut((n + p, n), (q, p)).copy_from(&m.dw);
        f0.view_mut((n, n + p), (p, q)).copy_from(&m.dw.transpose());
        for k in n..size {
            f0[(k, k)] = -alpha;
        }
    }
    LmiBlock {
        label,
        f0,
        fk,
        sign: Sign::NegDef,
    }
}

/// W(σ) − a₁I ⪰ 0 at σ = s.
pub fn lower_bound_block(basis: &BasisParam, s: &[f64], a1: f64) -> LmiBlock {
    let phi = basis.w.eval(s);
    let mut fk: Vec<DMatrix<f64>> = basis
        .w_coordinates()
        .into_iter()
        .map(|(t, i, j)| basis.sym_unit(i, j) * phi[t])
        .collect();
    fk.extend(basis.y_coordinates().into_iter().map(|_| DMatrix::zeros(basis.n, basis.n)));
    LmiBlock {
        label: format!("W >= a1*I at s={s:?}"),
        f0: DMatrix::identity(basis.n, basis.n) * -a1,
        fk,
        sign: Sign::PosDef,
    }
}

fn assemble(
    sd: &ScheduledDynamics,
    basis: &BasisParam,
    points: &[Vec<f64>],
    grid: &GridSpec,
    kind: Kind,
    a1: f64,
) -> Result<Vec<LmiBlock>, SynthesisError> {
    if basis.n != sd.dims.n || basis.m != sd.dims.m || basis.w.n_vars != sd.n_sigma() || basis.y.n_vars != sd.n_sigma() {
        return Err(SynthesisError::Dimension("basis does not match the scheduled dynamics".into()));
    }
    let vertices = grid.rate_vertices(basis)?;
    let name = match kind {
        Kind::Stabilization { .. } => "stabilization",
        Kind::Robust { .. } => "robust",
    };
    let per_point: Vec<Result<Vec<LmiBlock>, SynthesisError>> = points
        .par_iter()
        .map(|s| {
            let m = sd.eval(s)?;
            let mut out: Vec<LmiBlock> = vertices
                .iter()
                .map(|v| {
                    let label = if basis.w.is_constant() {
                        format!("{name} at s={s:?}")
                    } else {
                        format!("{name} at s={s:?}, rate={v:?}")
                    };
                    block_at(&m, basis, s, v, kind, label)
                })
                .collect();
            out.push(lower_bound_block(basis, s, a1));
            Ok(out)
        })
        .collect();
    let mut blocks = Vec::new();
    for r in per_point {
        blocks.extend(r?);
    }
    Ok(blocks)
}

fn check_positive(what: &str, v: f64) -> Result<(), SynthesisError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(SynthesisError::Parameter(format!("{what} must be positive, got {v}")))
    }
}

/// −Ẇ + AW + WAᵀ + BY + YᵀBᵀ + 2λW ⪯ 0 per grid point and rate vertex, plus
/// W ⪰ a₁I per grid point.
pub fn assemble_stabilization(
    sd: &ScheduledDynamics,
    basis: &BasisParam,
    grid: &GridSpec,
    lambda: f64,
) -> Result<Vec<LmiBlock>, SynthesisError> {
    assemble_stabilization_on(sd, basis, grid, &grid.synthesis_grid(), lambda, DEFAULT_A1)
}

pub fn assemble_stabilization_on(
    sd: &ScheduledDynamics,
    basis: &BasisParam,
    grid: &GridSpec,
    points: &[Vec<f64>],
    lambda: f64,
    a1: f64,
) -> Result<Vec<LmiBlock>, SynthesisError> {
    check_positive("rate", lambda)?;
    grid.check()?;
    assemble(sd, basis, points, grid, Kind::Stabilization { lambda }, a1)
}

/// The (n+p+q)-square robust block per grid point and rate vertex, plus
/// W ⪰ a₁I per grid point.
pub fn assemble_robust(
    sd: &ScheduledDynamics,
    basis: &BasisParam,
    grid: &GridSpec,
    alpha: f64,
) -> Result<Vec<LmiBlock>, SynthesisError> {
    assemble_robust_on(sd, basis, grid, &grid.synthesis_grid(), alpha, DEFAULT_A1)
}

pub fn assemble_robust_on(
    sd: &ScheduledDynamics,
    basis: &BasisParam,
    grid: &GridSpec,
    points: &[Vec<f64>],
    alpha: f64,
    a1: f64,
) -> Result<Vec<LmiBlock>, SynthesisError> {
    check_positive("gain", alpha)?;
    grid.check()?;
    assemble(sd, basis, points, grid, Kind::Robust { alpha }, a1)
}
