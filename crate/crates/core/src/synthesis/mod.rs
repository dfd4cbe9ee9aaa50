//! Grid-based synthesis of control-contraction certificates.

mod basis;
mod blocks;
mod certificate;
mod solver;

use nalgebra::DMatrix;

pub use basis::{BasisParam, MonomialBasis};
pub use blocks::{
    assemble_robust, assemble_robust_on, assemble_stabilization, assemble_stabilization_on, lower_bound_block,
    GridSpec, LmiBlock, Sign, DEFAULT_A1,
};
pub use certificate::{compose_gain, validate, Certificate, Mode, ValidationReport};
pub use solver::{solve, InfeasibleReport, LinearConstraint, Objective, SolveError, SolveOptions, Solution};

use crate::model::{ModelError, ScheduledDynamics, System};
use crate::symdyn::EvalError;

#[derive(Debug, thiserror::Error)]
pub enum SynthesisError {
    #[error("grid: {0}")]
    Grid(String),
    #[error("the W basis depends on the scheduling variables but no rate bounds were given")]
    MissingRateBounds,
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("invalid parameter: {0}")]
    Parameter(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Solve(#[from] SolveError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Coefficient vector with W = I and Y = 0.
pub fn identity_start(basis: &BasisParam) -> Vec<f64> {
    let w: Vec<DMatrix<f64>> = basis
        .w
        .terms
        .iter()
        .map(|e| {
            if e.iter().all(|&k| k == 0) {
                DMatrix::identity(basis.n, basis.n)
            } else {
                DMatrix::zeros(basis.n, basis.n)
            }
        })
        .collect();
    let y = vec![DMatrix::zeros(basis.m, basis.n); basis.y.len()];
    basis.pack(&w, &y)
}

pub fn assemble(
    sd: &ScheduledDynamics,
    basis: &BasisParam,
    grid: &GridSpec,
    mode: Mode,
    a1: f64,
) -> Result<Vec<LmiBlock>, SynthesisError> {
    let points = grid.synthesis_grid();
    match mode {
        Mode::Stabilization { lambda } => assemble_stabilization_on(sd, basis, grid, &points, lambda, a1),
        Mode::Robust { alpha } => assemble_robust_on(sd, basis, grid, &points, alpha, a1),
    }
}

/// Solves the block conditions on the synthesis grid and packages the result.
pub fn synthesize(
    sd: &ScheduledDynamics,
    basis: &BasisParam,
    grid: &GridSpec,
    mode: Mode,
    constraints: &[LinearConstraint],
    opts: &SolveOptions,
) -> Result<Certificate, SynthesisError> {
    let blocks = assemble(sd, basis, grid, mode, DEFAULT_A1)?;
    let start = identity_start(basis);
    let sol = solve(&blocks, constraints, Some(&start), opts)?;
    let mut cert = Certificate::from_coefficients(basis.clone(), &sol.x, mode, DEFAULT_A1);
    cert.margin = sol.margin;
    cert.a2 = grid
        .synthesis_grid()
        .iter()
        .map(|s| basis.w_at(&sol.x, s).symmetric_eigenvalues().max())
        .fold(0.0, f64::max);
    Ok(cert)
}

/// Smallest feasible robust gain, by bisection to relative tolerance `rel_tol`.
pub fn min_gain(
    sd: &ScheduledDynamics,
    basis: &BasisParam,
    grid: &GridSpec,
    constraints: &[LinearConstraint],
    opts: &SolveOptions,
    rel_tol: f64,
) -> Result<(f64, Certificate), SynthesisError> {
    let feasibility = SolveOptions {
        objective: Objective::Feasibility,
        ..*opts
    };
    let attempt = |alpha: f64| match synthesize(sd, basis, grid, Mode::Robust { alpha }, constraints, &feasibility) {
        Ok(c) => Ok(Some(c)),
        Err(SynthesisError::Solve(SolveError::Infeasible(_))) => Ok(None),
        Err(e) => Err(e),
    };
    let mut hi = 1.0;
    let mut best = loop {
        if let Some(c) = attempt(hi)? {
            break c;
        }
        hi *= 4.0;
        if hi > 1e6 {
            return Err(SynthesisError::Parameter("no feasible gain below 1e6".into()));
        }
    };
    let mut lo = 0.0;
    while hi - lo > rel_tol * hi {
        let mid = 0.5 * (lo + hi);
        match attempt(mid)? {
            Some(c) => {
                hi = mid;
                best = c;
            }
            None => lo = mid,
        }
    }
    Ok((hi, best))
}

/// Equalities Y_t = K_t W₀ tying each Y term to a prescribed gain term,
/// for a constant W basis whose single term is W₀.
pub fn fixed_gain_constraints(basis: &BasisParam, gain_terms: &[DMatrix<f64>]) -> Result<Vec<LinearConstraint>, SynthesisError> {
    if !basis.w.is_constant() || basis.w.len() != 1 {
        return Err(SynthesisError::Dimension("gain fixing needs a single constant W term".into()));
    }
    if gain_terms.len() != basis.y.len() || gain_terms.iter().any(|k| k.shape() != (basis.m, basis.n)) {
        return Err(SynthesisError::Dimension("one m×n gain matrix per Y term".into()));
    }
    let mut out = Vec::new();
    for (t, k) in gain_terms.iter().enumerate() {
        for i in 0..basis.m {
            for j in 0..basis.n {
                let mut coeffs = vec![(basis.y_index(t, i, j), 1.0)];
                for l in 0..basis.n {
                    let (a, b) = if l <= j { (l, j) } else { (j, l) };
                    coeffs.push((basis.w_index(0, a, b), -k[(i, l)]));
                }
                out.push(LinearConstraint { coeffs, rhs: 0.0 });
            }
        }
    }
    Ok(out)
}

/// Synthesis grid points used for the built-in designs.
pub const REFERENCE_GRID_POINTS: usize = 41;

fn lyapunov(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    // A X + X Aᵀ = Q via (I⊗A + A⊗I) vec X = vec Q
    let n = a.nrows();
    let id = DMatrix::<f64>::identity(n, n);
    let op = id.kronecker(a) + a.kronecker(&id);
    let rhs = nalgebra::DVector::from_column_slice(q.as_slice());
    let v = op.lu().solve(&rhs).expect("Lyapunov operator is nonsingular");
    let x = DMatrix::from_column_slice(n, n, v.as_slice());
    (&x + x.transpose()) * 0.5
}

/// Hand-built certificate for a registry system, validated on its box.
pub fn reference_design(sys: &System) -> Result<Option<(Certificate, ValidationReport)>, SynthesisError> {
    let dm = |r: usize, c: usize, v: &[f64]| DMatrix::from_row_slice(r, c, v);
    let cert = match sys.name.as_str() {
        "scalar-cubic" => Certificate::from_matrices(
            BasisParam::with_degrees(1, 1, 1, 0, 1),
            &[dm(1, 1, &[1.0])],
            &[dm(1, 1, &[-2.2742]), dm(1, 1, &[-1.0063])],
            Mode::Robust { alpha: 1.0 },
            DEFAULT_A1,
        ),
        "ex2" => Certificate::from_matrices(
            BasisParam::with_degrees(2, 1, 1, 0, 0),
            &[DMatrix::identity(2, 2)],
            &[dm(1, 2, &[-1.0, 0.0])],
            Mode::Stabilization { lambda: 0.3 },
            DEFAULT_A1,
        ),
        "ex3-skew" => Certificate::from_matrices(
            BasisParam::with_degrees(2, 1, 1, 0, 0),
            &[DMatrix::identity(2, 2)],
            &[dm(1, 2, &[0.0, 0.0])],
            Mode::Stabilization { lambda: 0.9 },
            DEFAULT_A1,
        ),
        "gs-furnace" => {
            let lambda = 1.9;
            let a_cl = dm(2, 2, &[-1.0, -1.0, 1.0, -3.0]);
            let shifted = &a_cl + DMatrix::identity(2, 2) * lambda;
            let w = lyapunov(&shifted, &(DMatrix::identity(2, 2) * -1.0));
            let y0 = dm(1, 2, &[1.0, -3.0]) * &w;
            let y1 = dm(1, 2, &[0.0, -1.0]) * &w;
            Certificate::from_matrices(
                BasisParam::with_degrees(2, 1, 1, 0, 1),
                &[w],
                &[y0, y1],
                Mode::Stabilization { lambda },
                DEFAULT_A1,
            )
        }
        _ => return Ok(None),
    };
    let sd = sys.scheduled()?;
    let grid = GridSpec::from_map(&sys.sched, REFERENCE_GRID_POINTS);
    let report = validate(&cert, &sd, &grid)?;
    let mut cert = cert;
    cert.margin = report.synthesis_margin;
    cert.a2 = report.a2;
    Ok(Some((cert, report)))
}
