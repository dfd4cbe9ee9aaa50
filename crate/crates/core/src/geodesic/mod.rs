//! Discrete minimum-energy paths of a Riemannian metric M(χ, x).

use std::io::Write;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum GeodesicError {
    #[error("a path needs at least two nodes")]
    TooShort,
    #[error("endpoint dimensions differ ({0} vs {1})")]
    Dimension(usize, usize),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Piecewise-linear path with nodes at s_i = i/N.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    nodes: Vec<DVector<f64>>,
}

impl Path {
    pub fn new(nodes: Vec<DVector<f64>>) -> Result<Self, GeodesicError> {
        if nodes.len() < 2 {
            return Err(GeodesicError::TooShort);
        }
        let n = nodes[0].len();
        if let Some(bad) = nodes.iter().find(|v| v.len() != n) {
            return Err(GeodesicError::Dimension(n, bad.len()));
        }
        Ok(Self { nodes })
    }

    pub fn straight(from: &DVector<f64>, to: &DVector<f64>, segments: usize) -> Result<Self, GeodesicError> {
        if from.len() != to.len() {
            return Err(GeodesicError::Dimension(from.len(), to.len()));
        }
        let segments = segments.max(1);
        let mut nodes: Vec<DVector<f64>> = (0..=segments)
            .map(|i| {
                let s = i as f64 / segments as f64;
                from * (1.0 - s) + to * s
            })
            .collect();
        nodes[0] = from.clone();
        nodes[segments] = to.clone();
        Ok(Self { nodes })
    }

    pub fn nodes(&self) -> &[DVector<f64>] {
        &self.nodes
    }

    pub fn segments(&self) -> usize {
        self.nodes.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.nodes[0].len()
    }

    pub fn start(&self) -> &DVector<f64> {
        &self.nodes[0]
    }

    pub fn end(&self) -> &DVector<f64> {
        &self.nodes[self.segments()]
    }

    /// c(s) by linear interpolation.
    pub fn point(&self, s: f64) -> DVector<f64> {
        let n = self.segments();
        let pos = (s.clamp(0.0, 1.0) * n as f64).min(n as f64);
        let i = (pos.floor() as usize).min(n - 1);
        let t = pos - i as f64;
        &self.nodes[i] * (1.0 - t) + &self.nodes[i + 1] * t
    }

    /// ∂_s c on segment i (N·Δc_i).
    pub fn tangent(&self, i: usize) -> DVector<f64> {
        (&self.nodes[i + 1] - &self.nodes[i]) * self.segments() as f64
    }

    pub fn reversed(&self) -> Self {
        Self {
            nodes: self.nodes.iter().rev().cloned().collect(),
        }
    }

    /// Writes `s,c1,..,cn` rows.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<(), GeodesicError> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["s".to_string()];
        header.extend((1..=self.dim()).map(|k| format!("c{k}")));
        w.write_record(&header)?;
        let n = self.segments() as f64;
        for (i, c) in self.nodes.iter().enumerate() {
            let mut row = vec![format!("{}", i as f64 / n)];
            row.extend(c.iter().map(|v| format!("{v}")));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Symmetric positive definite metric field.
pub trait Metric {
    fn eval(&self, chi: &DVector<f64>, x: &DVector<f64>) -> DMatrix<f64>;

    /// True when M does not depend on χ (geodesics are straight).
    fn constant_in_chi(&self) -> bool {
        false
    }

    /// ∂M/∂χ_k, by default a central difference.
    fn partial(&self, chi: &DVector<f64>, x: &DVector<f64>, k: usize) -> DMatrix<f64> {
        let h = 1e-6 * (1.0 + chi[k].abs());
        let mut p = chi.clone();
        let mut m = chi.clone();
        p[k] += h;
        m[k] -= h;
        (self.eval(&p, x) - self.eval(&m, x)) / (2.0 * h)
    }
}

/// Metric independent of (χ, x).
#[derive(Debug, Clone)]
pub struct ConstantMetric(pub DMatrix<f64>);

impl Metric for ConstantMetric {
    fn eval(&self, _: &DVector<f64>, _: &DVector<f64>) -> DMatrix<f64> {
        self.0.clone()
    }
    fn constant_in_chi(&self) -> bool {
        true
    }
    fn partial(&self, chi: &DVector<f64>, _: &DVector<f64>, _: usize) -> DMatrix<f64> {
        DMatrix::zeros(chi.len(), chi.len())
    }
}

/// Metric from a closure.
pub struct FnMetric<F> {
    pub f: F,
    pub constant: bool,
}

impl<F> FnMetric<F>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> DMatrix<f64>,
{
    pub fn new(f: F) -> Self {
        Self { f, constant: false }
    }
}

impl<F> Metric for FnMetric<F>
where
    F: Fn(&DVector<f64>, &DVector<f64>) -> DMatrix<f64>,
{
    fn eval(&self, chi: &DVector<f64>, x: &DVector<f64>) -> DMatrix<f64> {
        (self.f)(chi, x)
    }
    fn constant_in_chi(&self) -> bool {
        self.constant
    }
}

/// N·Σ Δcᵢᵀ M(midpointᵢ, x) Δcᵢ.
pub fn energy<M: Metric + ?Sized>(metric: &M, path: &Path, x: &DVector<f64>) -> f64 {
    let n = path.segments();
    let nodes = path.nodes();
    (0..n)
        .map(|i| {
            let d = &nodes[i + 1] - &nodes[i];
            let mid = (&nodes[i] + &nodes[i + 1]) * 0.5;
            (d.transpose() * metric.eval(&mid, x) * &d)[(0, 0)]
        })
        .sum::<f64>()
        * n as f64
}

/// Gradient of the discrete energy with respect to the interior nodes.
fn energy_gradient<M: Metric + ?Sized>(metric: &M, nodes: &[DVector<f64>], x: &DVector<f64>) -> Vec<DVector<f64>> {
    let n = nodes.len() - 1;
    let dim = nodes[0].len();
    let scale = n as f64;
    // per segment: 2MΔ and ½ Δᵀ ∂_k M Δ
    let seg: Vec<(DVector<f64>, DVector<f64>)> = (0..n)
        .map(|i| {
            let d = &nodes[i + 1] - &nodes[i];
            let mid = (&nodes[i] + &nodes[i + 1]) * 0.5;
            let md = metric.eval(&mid, x) * &d * 2.0;
            let curv = if metric.constant_in_chi() {
                DVector::zeros(dim)
            } else {
                DVector::from_fn(dim, |k, _| 0.5 * (d.transpose() * metric.partial(&mid, x, k) * &d)[(0, 0)])
            };
            (md, curv)
        })
        .collect();
    (1..n)
        .map(|j| (&seg[j - 1].0 - &seg[j].0 + &seg[j - 1].1 + &seg[j].1) * scale)
        .collect()
}

/// Solves (2N·tridiag(−1, 2, −1)) y = g for each coordinate.
fn precondition(g: &[DVector<f64>], n_segments: usize) -> Vec<DVector<f64>> {
    let k = g.len();
    if k == 0 {
        return Vec::new();
    }
    let dim = g[0].len();
    let scale = 2.0 * n_segments as f64;
    let mut out = vec![DVector::zeros(dim); k];
    for c in 0..dim {
        // Thomas algorithm
        let mut cp = vec![0.0; k];
        let mut dp = vec![0.0; k];
        let (a, b) = (-scale, 2.0 * scale);
        cp[0] = a / b;
        dp[0] = g[0][c] / b;
        for i in 1..k {
            let m = b - a * cp[i - 1];
            cp[i] = a / m;
            dp[i] = (g[i][c] - a * dp[i - 1]) / m;
        }
        out[k - 1][c] = dp[k - 1];
        for i in (0..k - 1).rev() {
            out[i][c] = dp[i] - cp[i] * out[i + 1][c];
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GeodesicOptions {
    pub segments: usize,
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for GeodesicOptions {
    fn default() -> Self {
        Self {
            segments: 32,
            tol: 1e-8,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Geodesic {
    pub path: Path,
    pub energy: f64,
    pub iterations: usize,
    /// Euclidean norm of the interior-node energy gradient at the returned path.
    pub gradient_norm: f64,
    pub converged: bool,
}

fn norm(g: &[DVector<f64>]) -> f64 {
    g.iter().map(|v| v.norm_squared()).sum::<f64>().sqrt()
}

/// Minimizes the discrete energy over interior nodes, starting from the straight segment.
pub fn solve_geodesic<M: Metric + ?Sized>(
    metric: &M,
    x: &DVector<f64>,
    from: &DVector<f64>,
    to: &DVector<f64>,
    opts: &GeodesicOptions,
) -> Result<Geodesic, GeodesicError> {
    let mut path = Path::straight(from, to, opts.segments)?;
    if from == to || metric.constant_in_chi() || path.segments() < 2 {
        let e = energy(metric, &path, x);
        return Ok(Geodesic {
            path,
            energy: e,
            iterations: 0,
            gradient_norm: 0.0,
            converged: true,
        });
    }
    let n = path.segments();
    let mut e = energy(metric, &path, x);
    let mut grad = energy_gradient(metric, path.nodes(), x);
    let mut gn = norm(&grad);
    let mut iterations = 0;
    while gn > opts.tol && iterations < opts.max_iterations {
        iterations += 1;
        let dir = precondition(&grad, n);
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g.dot(d)).sum();
        let mut step = 1.0;
        let mut accepted = None;
        while step > 1e-12 {
            let mut trial = path.nodes.clone();
            for (j, d) in dir.iter().enumerate() {
                trial[j + 1] -= d * step;
            }
            let candidate = Path { nodes: trial };
            let ec = energy(metric, &candidate, x);
            if ec <= e - 1e-4 * step * slope {
                accepted = Some((candidate, ec));
                break;
            }
            step *= 0.5;
        }
        let Some((candidate, ec)) = accepted else { break };
        path = candidate;
        e = ec;
        grad = energy_gradient(metric, path.nodes(), x);
        gn = norm(&grad);
    }
    Ok(Geodesic {
        path,
        energy: e,
        iterations,
        gradient_norm: gn,
        converged: gn <= opts.tol,
    })
}

#[cfg(test)]
mod tests;
