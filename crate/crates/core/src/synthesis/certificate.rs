use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::basis::BasisParam;
use super::blocks::{assemble_robust_on, assemble_stabilization_on, min_eig, GridSpec, LmiBlock};
use super::SynthesisError;
use crate::model::ScheduledDynamics;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum Mode {
    Stabilization { lambda: f64 },
    Robust { alpha: f64 },
}

/// Dual metric W(σ) and gain factor Y(σ) with the condition they satisfy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Certificate {
    pub basis: BasisParam,
    /// W_k per basis term (n×n, row-major nested).
    pub w: Vec<Vec<Vec<f64>>>,
    /// Y_k per basis term (m×n).
    pub y: Vec<Vec<Vec<f64>>>,
    pub mode: Mode,
    pub a1: f64,
    /// Largest eigenvalue of W seen on the validation grid.
    pub a2: f64,
    /// Smallest block margin on the grid the certificate was checked on.
    pub margin: f64,
}

fn to_nested(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows()).map(|i| m.row(i).iter().copied().collect()).collect()
}

fn from_nested(rows: usize, cols: usize, v: &[Vec<f64>]) -> Result<DMatrix<f64>, SynthesisError> {
    if v.len() != rows || v.iter().any(|r| r.len() != cols) {
        return Err(SynthesisError::Dimension(format!("expected a {rows}x{cols} coefficient matrix")));
    }
    Ok(DMatrix::from_fn(rows, cols, |i, j| v[i][j]))
}

impl Certificate {
    pub fn from_coefficients(basis: BasisParam, x: &[f64], mode: Mode, a1: f64) -> Self {
        let w = basis.w_terms(x).iter().map(to_nested).collect();
        let y = basis.y_terms(x).iter().map(to_nested).collect();
        Self {
            basis,
            w,
            y,
            mode,
            a1,
            a2: f64::NAN,
            margin: f64::NAN,
        }
    }

    pub fn from_matrices(basis: BasisParam, w: &[DMatrix<f64>], y: &[DMatrix<f64>], mode: Mode, a1: f64) -> Self {
        let x = basis.pack(w, y);
        Self::from_coefficients(basis, &x, mode, a1)
    }

    /// Checks the coefficient shapes against the basis.
    pub fn check_shape(&self) -> Result<(), SynthesisError> {
        let b = &self.basis;
        if self.w.len() != b.w.len() || self.y.len() != b.y.len() {
            return Err(SynthesisError::Dimension("coefficient count does not match the basis".into()));
        }
        for w in &self.w {
            let m = from_nested(b.n, b.n, w)?;
            if (&m - m.transpose()).amax() > 0.0 {
                return Err(SynthesisError::Dimension("W coefficients must be symmetric".into()));
            }
        }
        for y in &self.y {
            from_nested(b.m, b.n, y)?;
        }
        Ok(())
    }

    pub fn coefficients(&self) -> Result<Vec<f64>, SynthesisError> {
        self.check_shape()?;
        let b = &self.basis;
        let w: Vec<DMatrix<f64>> = self.w.iter().map(|v| from_nested(b.n, b.n, v)).collect::<Result<_, _>>()?;
        let y: Vec<DMatrix<f64>> = self.y.iter().map(|v| from_nested(b.m, b.n, v)).collect::<Result<_, _>>()?;
        Ok(b.pack(&w, &y))
    }

    pub fn w_at(&self, s: &[f64]) -> DMatrix<f64> {
        let x = self.coefficients().expect("certificate shape checked on construction");
        self.basis.w_at(&x, s)
    }

    pub fn y_at(&self, s: &[f64]) -> DMatrix<f64> {
        let x = self.coefficients().expect("certificate shape checked on construction");
        self.basis.y_at(&x, s)
    }

    /// K(σ) = Y(σ) W(σ)⁻¹.
    pub fn gain_at(&self, s: &[f64]) -> DMatrix<f64> {
        let w = self.w_at(s);
        let y = self.y_at(s);
        // K W = Y  ⇔  W Kᵀ = Yᵀ (W symmetric)
        let kt = w.lu().solve(&y.transpose()).expect("W is positive definite");
        kt.transpose()
    }

    /// M(σ) = W(σ)⁻¹.
    pub fn metric_at(&self, s: &[f64]) -> DMatrix<f64> {
        let w = self.w_at(s);
        let inv = w.try_inverse().expect("W is positive definite");
        (&inv + inv.transpose()) * 0.5
    }

    pub fn metric_is_constant(&self) -> bool {
        self.basis.w.is_constant()
    }

    pub fn gain_is_constant(&self) -> bool {
        self.basis.w.is_constant() && self.basis.y.is_constant()
    }

    pub fn blocks_on(
        &self,
        sd: &ScheduledDynamics,
        grid: &GridSpec,
        points: &[Vec<f64>],
    ) -> Result<Vec<LmiBlock>, SynthesisError> {
        match self.mode {
            Mode::Stabilization { lambda } => assemble_stabilization_on(sd, &self.basis, grid, points, lambda, self.a1),
            Mode::Robust { alpha } => assemble_robust_on(sd, &self.basis, grid, points, alpha, self.a1),
        }
    }
}

/// Result of a dense a-posteriori sweep.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub points: usize,
    /// min over dense points and blocks of the signed margin.
    pub margin: f64,
    pub worst_block: String,
    pub synthesis_margin: f64,
    /// Largest eigenvalue of W on the dense grid.
    pub a2: f64,
    /// Smallest eigenvalue of W on the dense grid.
    pub w_min_eig: f64,
    /// Slope estimate of the margin times half the synthesis spacing.
    pub lipschitz_gap: f64,
    pub accepted: bool,
}

fn pointwise_margins(blocks: &[LmiBlock], x: &[f64], per_point: usize) -> Vec<(f64, usize)> {
    blocks
        .chunks(per_point)
        .enumerate()
        .map(|(k, chunk)| {
            chunk
                .iter()
                .enumerate()
                .map(|(j, b)| (b.margin(x), k * per_point + j))
                .fold((f64::INFINITY, 0), |a, v| if v.0 < a.0 { v } else { a })
        })
        .collect()
}

/// Evaluates every block condition of `c` on the dense grid.
pub fn validate(c: &Certificate, sd: &ScheduledDynamics, grid: &GridSpec) -> Result<ValidationReport, SynthesisError> {
    let x = c.coefficients()?;
    let dense = grid.validation_grid();
    let coarse = grid.synthesis_grid();
    let blocks = c.blocks_on(sd, grid, &dense)?;
    let per_point = blocks.len() / dense.len();
    let margins = pointwise_margins(&blocks, &x, per_point);
    let (margin, worst) = margins
        .iter()
        .copied()
        .fold((f64::INFINITY, 0), |a, v| if v.0 < a.0 { v } else { a });
    let coarse_blocks = c.blocks_on(sd, grid, &coarse)?;
    let synthesis_margin = pointwise_margins(&coarse_blocks, &x, per_point)
        .into_iter()
        .map(|v| v.0)
        .fold(f64::INFINITY, f64::min);

    let mut a2: f64 = 0.0;
    let mut w_min = f64::INFINITY;
    for s in &dense {
        let w = c.basis.w_at(&x, s);
        let e = ((&w + w.transpose()) * 0.5).symmetric_eigenvalues();
        a2 = a2.max(e.max());
        w_min = w_min.min(e.min());
    }
    if w_min <= 0.0 {
        w_min = min_eig(&c.basis.w_at(&x, &dense[0])).min(w_min);
    }

    // slope of the pointwise margin along each axis of the dense tensor grid
    let k = grid.lo.len();
    let per_axis = grid.dense_points();
    let mut slope: f64 = 0.0;
    for (idx, (m, _)) in margins.iter().enumerate() {
        let mut stride = 1;
        for axis in (0..k).rev() {
            let coord = (idx / stride) % per_axis;
            if coord + 1 < per_axis {
                let h = (grid.hi[axis] - grid.lo[axis]) / (per_axis - 1) as f64;
                let other = margins[idx + stride].0;
                slope = slope.max((other - m).abs() / h);
            }
            stride *= per_axis;
        }
    }
    let spacing = (0..k)
        .map(|a| (grid.hi[a] - grid.lo[a]) / (grid.points - 1) as f64)
        .fold(0.0, f64::max);

    Ok(ValidationReport {
        points: dense.len(),
        margin,
        worst_block: blocks[worst].label.clone(),
        synthesis_margin,
        a2,
        w_min_eig: w_min,
        lipschitz_gap: slope * spacing / 2.0,
        accepted: margin > 0.0,
    })
}

/// α̃ = √(α² + α_wχ²·α_χζ²).
pub fn compose_gain(alpha: f64, alpha_wchi: f64, alpha_chizeta: f64) -> f64 {
    assert!(alpha >= 0.0 && alpha_wchi >= 0.0 && alpha_chizeta >= 0.0);
    (alpha * alpha + alpha_wchi * alpha_wchi * alpha_chizeta * alpha_chizeta).sqrt()
}
