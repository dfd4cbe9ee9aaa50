use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::blocks::{LmiBlock, Sign};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Objective {
    /// Maximize the common margin t in F(x) ⪯ −tI / ⪰ tI.
    MaxMargin,
    /// Stop at the first iterate with margin ≥ ε_feas.
    Feasibility,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolveOptions {
    pub eps_feas: f64,
    /// Cap on Newton iterations across all barrier stages.
    pub max_iterations: usize,
    /// |x_k| ≤ bound keeps the homogeneous problems bounded.
    pub coefficient_bound: f64,
    pub objective: Objective,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self {
            eps_feas: 1e-6,
            max_iterations: 400,
            coefficient_bound: 100.0,
            objective: Objective::MaxMargin,
        }
    }
}

/// Σ coeff·x_index = rhs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearConstraint {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Solution {
    pub x: Vec<f64>,
    pub margin: f64,
    pub worst_block: usize,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfeasibleReport {
    /// Best margin reached (negative or below ε_feas).
    pub margin: f64,
    pub block: usize,
    pub label: String,
    /// Extreme eigenvalue of the violated block at the returned point
    /// (λ_max for ⪯ blocks, λ_min for ⪰ blocks).
    pub eigenvalue: f64,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolveError {
    #[error("no blocks to solve")]
    Empty,
    #[error("block {0} has {1} coefficient matrices, expected {2}")]
    Shape(usize, usize, usize),
    #[error("equality constraints are inconsistent (residual {0:.3e})")]
    InconsistentConstraints(f64),
    #[error("infeasible: block `{}` has eigenvalue {:.6e} (margin {:.6e})", .0.label, .0.eigenvalue, .0.margin)]
    Infeasible(InfeasibleReport),
}

/// Affine reparametrization x = x_p + N ξ of the equality-constrained set.
struct Affine {
    xp: DVector<f64>,
    n: DMatrix<f64>,
}

fn affine_set(dim: usize, constraints: &[LinearConstraint]) -> Result<Affine, SolveError> {
    if constraints.is_empty() {
        return Ok(Affine {
            xp: DVector::zeros(dim),
            n: DMatrix::identity(dim, dim),
        });
    }
    let mut e = DMatrix::zeros(constraints.len(), dim);
    let mut b = DVector::zeros(constraints.len());
    for (r, c) in constraints.iter().enumerate() {
        for &(k, v) in &c.coeffs {
            e[(r, k)] += v;
        }
        b[r] = c.rhs;
    }
    let pinv = e.clone().pseudo_inverse(1e-12).expect("svd converges");
    let xp = &pinv * &b;
    let res = (&e * &xp - &b).amax();
    if res > 1e-9 * (1.0 + b.amax()) {
        return Err(SolveError::InconsistentConstraints(res));
    }
    let proj = DMatrix::identity(dim, dim) - &pinv * &e;
    let eig = ((&proj + proj.transpose()) * 0.5).symmetric_eigen();
    let cols: Vec<DVector<f64>> = (0..dim)
        .filter(|&k| eig.eigenvalues[k] > 0.5)
        .map(|k| {
            let v = eig.eigenvectors.column(k).into_owned();
            // fix the sign so the first significant entry is positive
            let pivot = v.iter().copied().find(|a| a.abs() > 1e-9).unwrap_or(1.0);
            if pivot < 0.0 {
                -v
            } else {
                v
            }
        })
        .collect();
    let n = if cols.is_empty() {
        DMatrix::zeros(dim, 0)
    } else {
        DMatrix::from_columns(&cols)
    };
    Ok(Affine { xp, n })
}

/// Barrier data for one block in ξ-coordinates: G(ξ,t) = G₀ + Σ ξ_i G_i − tI.
struct Reduced {
    g0: DMatrix<f64>,
    gi: Vec<DMatrix<f64>>,
}

struct Problem {
    blocks: Vec<Reduced>,
    /// Scalar constraints a·ξ + c > 0.
    lin_a: DMatrix<f64>,
    lin_c: DVector<f64>,
    r: usize,
    nu: f64,
}

impl Problem {
    fn new(blocks: &[LmiBlock], aff: &Affine, bound: f64) -> Self {
        let r = aff.n.ncols();
        let reduced = blocks
            .iter()
            .map(|b| {
                let s = match b.sign {
                    Sign::NegDef => -1.0,
                    Sign::PosDef => 1.0,
                };
                let g0 = b.eval(aff.xp.as_slice()) * s;
                let gi = (0..r)
                    .map(|i| {
                        let mut g = DMatrix::zeros(b.size(), b.size());
                        for (k, fk) in b.fk.iter().enumerate() {
                            let c = aff.n[(k, i)];
                            if c != 0.0 {
                                g += fk * (c * s);
                            }
                        }
                        g
                    })
                    .collect();
                Reduced { g0, gi }
            })
            .collect::<Vec<_>>();
        let dim = aff.xp.len();
        let mut lin_a = DMatrix::zeros(2 * dim, r);
        let mut lin_c = DVector::zeros(2 * dim);
        for k in 0..dim {
            for i in 0..r {
                lin_a[(2 * k, i)] = -aff.n[(k, i)];
                lin_a[(2 * k + 1, i)] = aff.n[(k, i)];
            }
            lin_c[2 * k] = bound - aff.xp[k];
            lin_c[2 * k + 1] = bound + aff.xp[k];
        }
        let nu = reduced.iter().map(|b| b.g0.nrows() as f64).sum::<f64>() + 2.0 * dim as f64;
        Self {
            blocks: reduced,
            lin_a,
            lin_c,
            r,
            nu,
        }
    }

    fn g(&self, b: &Reduced, xi: &[f64], t: f64) -> DMatrix<f64> {
        let mut g = b.g0.clone();
        for (v, gi) in xi.iter().zip(&b.gi) {
            if *v != 0.0 {
                g += gi * *v;
            }
        }
        for k in 0..g.nrows() {
            g[(k, k)] -= t;
        }
        g
    }

    fn min_eig_at(&self, xi: &[f64]) -> f64 {
        self.blocks
            .iter()
            .map(|b| super::blocks::min_eig(&self.g(b, xi, 0.0)))
            .fold(f64::INFINITY, f64::min)
    }

    /// Barrier value (without the −τt term); None outside the domain.
    fn barrier(&self, z: &[f64]) -> Option<f64> {
        let (xi, t) = z.split_at(self.r);
        let t = t[0];
        let mut phi = 0.0;
        for b in &self.blocks {
            let chol = self.g(b, xi, t).cholesky()?;
            phi -= 2.0 * chol.l().diagonal().iter().map(|d| d.ln()).sum::<f64>();
        }
        let s = &self.lin_a * DVector::from_column_slice(xi) + &self.lin_c;
        for v in s.iter() {
            if *v <= 0.0 {
                return None;
            }
            phi -= v.ln();
        }
        Some(phi)
    }

    fn grad_hess(&self, z: &[f64]) -> (DVector<f64>, DMatrix<f64>) {
        let (xi, t) = z.split_at(self.r);
        let t = t[0];
        let d = self.r + 1;
        let mut grad = DVector::zeros(d);
        let mut hess = DMatrix::zeros(d, d);
        for b in &self.blocks {
            let ginv = self
                .g(b, xi, t)
                .cholesky()
                .expect("iterate is interior")
                .inverse();
            let mut h: Vec<DMatrix<f64>> = b.gi.iter().map(|gi| &ginv * gi).collect();
            h.push(-&ginv);
            for i in 0..d {
                grad[i] -= h[i].trace();
                for l in i..d {
                    // tr(H_i H_l) without forming the product
                    let v = h[i].component_mul(&h[l].transpose()).sum();
                    hess[(i, l)] += v;
                    if l != i {
                        hess[(l, i)] += v;
                    }
                }
            }
        }
        let s = &self.lin_a * DVector::from_column_slice(xi) + &self.lin_c;
        for k in 0..s.len() {
            let a = self.lin_a.row(k);
            for i in 0..self.r {
                grad[i] -= a[i] / s[k];
                for l in 0..self.r {
                    hess[(i, l)] += a[i] * a[l] / (s[k] * s[k]);
                }
            }
        }
        (grad, hess)
    }
}

fn newton_direction(hess: &DMatrix<f64>, grad: &DVector<f64>) -> DVector<f64> {
    let mut reg = 0.0;
    let scale = hess.diagonal().amax().max(1e-300);
    loop {
        let mut h = hess.clone();
        for k in 0..h.nrows() {
            h[(k, k)] += reg;
        }
        if let Some(ch) = h.cholesky() {
            return -ch.solve(grad);
        }
        reg = if reg == 0.0 { 1e-14 * scale } else { reg * 100.0 };
    }
}

/// Solves the block system with a log-det barrier method on the margin t.
///
/// `start` seeds the coefficient vector (projected onto the equality set);
/// the initial margin is chosen one unit below the smallest eigenvalue there,
/// so the first iterate is strictly interior.
pub fn solve(
    blocks: &[LmiBlock],
    constraints: &[LinearConstraint],
    start: Option<&[f64]>,
    opts: &SolveOptions,
) -> Result<Solution, SolveError> {
    let first = blocks.first().ok_or(SolveError::Empty)?;
    let dim = first.fk.len();
    for (j, b) in blocks.iter().enumerate() {
        if b.fk.len() != dim {
            return Err(SolveError::Shape(j, b.fk.len(), dim));
        }
    }
    let aff = affine_set(dim, constraints)?;
    let prob = Problem::new(blocks, &aff, opts.coefficient_bound);
    let r = prob.r;

    let mut xi = match start {
        Some(x0) => {
            let d = DVector::from_column_slice(x0) - &aff.xp;
            (aff.n.transpose() * d).as_slice().to_vec()
        }
        None => vec![0.0; r],
    };
    // keep the start strictly inside the coefficient box
    let s0 = &prob.lin_a * DVector::from_column_slice(&xi) + &prob.lin_c;
    if s0.iter().any(|v| *v <= 0.0) {
        xi = vec![0.0; r];
    }
    let t0 = prob.min_eig_at(&xi) - 1.0;
    let mut z: Vec<f64> = xi;
    z.push(t0);

    let to_x = |z: &[f64]| -> Vec<f64> {
        let xi = DVector::from_column_slice(&z[..r]);
        (&aff.xp + &aff.n * xi).as_slice().to_vec()
    };
    let margin_of = |x: &[f64]| -> (f64, usize) {
        blocks
            .iter()
            .enumerate()
            .map(|(j, b)| (b.margin(x), j))
            .fold((f64::INFINITY, 0), |acc, v| if v.0 < acc.0 { v } else { acc })
    };

    let mut tau = 1.0;
    let mut iterations = 0;
    'outer: loop {
        for _ in 0..100 {
            if iterations >= opts.max_iterations {
                break 'outer;
            }
            iterations += 1;
            let (mut grad, hess) = prob.grad_hess(&z);
            grad[r] -= tau;
            let dir = newton_direction(&hess, &grad);
            let decrement = -grad.dot(&dir);
            if decrement < 1e-10 {
                break;
            }
            let f = |z: &[f64]| prob.barrier(z).map(|b| b - tau * z[r]);
            let f0 = f(&z).expect("iterate is interior");
            let mut step = 1.0;
            let mut accepted = None;
            for _ in 0..60 {
                let cand: Vec<f64> = z.iter().zip(dir.iter()).map(|(a, d)| a + step * d).collect();
                if let Some(fc) = f(&cand) {
                    if fc <= f0 - 0.25 * step * decrement {
                        accepted = Some(cand);
                        break;
                    }
                }
                step *= 0.5;
            }
            match accepted {
                Some(c) => z = c,
                None => break,
            }
            if opts.objective == Objective::Feasibility && z[r] >= 2.0 * opts.eps_feas {
                let x = to_x(&z);
                if margin_of(&x).0 >= opts.eps_feas {
                    break 'outer;
                }
            }
            if decrement < 1e-9 {
                break;
            }
        }
        if prob.nu / tau < 1e-8 * z[r].abs().max(1e-3) {
            break;
        }
        tau *= 10.0;
        if tau > 1e14 {
            break;
        }
    }

    let x = to_x(&z);
    let (margin, worst) = margin_of(&x);
    if margin >= opts.eps_feas {
        Ok(Solution {
            x,
            margin,
            worst_block: worst,
            iterations,
        })
    } else {
        let b = &blocks[worst];
        let eigenvalue = match b.sign {
            Sign::NegDef => -margin,
            Sign::PosDef => margin,
        };
        Err(SolveError::Infeasible(InfeasibleReport {
            margin,
            block: worst,
            label: b.label.clone(),
            eigenvalue,
        }))
    }
}
