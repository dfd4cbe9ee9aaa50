use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

/// Monomials s^e in the scheduling variables, ordered by total degree and
/// then lexicographically (descending powers of s1 first).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MonomialBasis {
    pub n_vars: usize,
    pub terms: Vec<Vec<u32>>,
}

impl MonomialBasis {
    /// All monomials of total degree ≤ `degree`.
    pub fn total_degree(n_vars: usize, degree: u32) -> Self {
        let mut terms = Vec::new();
        for d in 0..=degree {
            let mut current = vec![0u32; n_vars];
            push_degree(&mut terms, &mut current, 0, d);
        }
        if n_vars == 0 {
            terms.truncate(1);
        }
        Self { n_vars, terms }
    }

    pub fn constant(n_vars: usize) -> Self {
        Self::total_degree(n_vars, 0)
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn is_constant(&self) -> bool {
        self.terms.iter().all(|e| e.iter().all(|&k| k == 0))
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|e| e.iter().sum()).max().unwrap_or(0)
    }

    pub fn eval(&self, s: &[f64]) -> Vec<f64> {
        self.terms
            .iter()
            .map(|e| e.iter().zip(s).map(|(&k, &v)| v.powi(k as i32)).product())
            .collect()
    }

    /// Entry [term][var] = ∂φ_term/∂s_var.
    pub fn gradient(&self, s: &[f64]) -> Vec<Vec<f64>> {
        self.terms
            .iter()
            .map(|e| {
                (0..self.n_vars)
                    .map(|i| {
                        if e[i] == 0 {
                            return 0.0;
                        }
                        e.iter()
                            .zip(s)
                            .enumerate()
                            .map(|(j, (&k, &v))| {
                                if i == j {
                                    k as f64 * v.powi(k as i32 - 1)
                                } else {
                                    v.powi(k as i32)
                                }
                            })
                            .product()
                    })
                    .collect()
            })
            .collect()
    }
}

fn push_degree(out: &mut Vec<Vec<u32>>, current: &mut Vec<u32>, var: usize, remaining: u32) {
    if var + 1 >= current.len() {
        if let Some(last) = current.last_mut() {
            *last = remaining;
        }
        out.push(current.clone());
        return;
    }
    for k in (0..=remaining).rev() {
        current[var] = k;
        push_degree(out, current, var + 1, remaining - k);
    }
    current[var] = 0;
}

/// W(σ) = Σ_k W_k φ_k(σ) with symmetric W_k and Y(σ) = Σ_k Y_k ψ_k(σ).
///
/// Decision vector layout: for each W term the upper triangle row by row,
/// then for each Y term the m×n entries row by row.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BasisParam {
    pub n: usize,
    pub m: usize,
    pub w: MonomialBasis,
    pub y: MonomialBasis,
}

impl BasisParam {
    pub fn new(n: usize, m: usize, w: MonomialBasis, y: MonomialBasis) -> Self {
        Self { n, m, w, y }
    }

    pub fn with_degrees(n: usize, m: usize, n_vars: usize, w_degree: u32, y_degree: u32) -> Self {
        Self::new(
            n,
            m,
            MonomialBasis::total_degree(n_vars, w_degree),
            MonomialBasis::total_degree(n_vars, y_degree),
        )
    }

    fn sym_len(&self) -> usize {
        self.n * (self.n + 1) / 2
    }

    pub fn n_w(&self) -> usize {
        self.w.len() * self.sym_len()
    }

    pub fn dim(&self) -> usize {
        self.n_w() + self.y.len() * self.m * self.n
    }

    /// Index of W_term[i, j] (either triangle).
    pub fn w_index(&self, term: usize, i: usize, j: usize) -> usize {
        let (i, j) = if i <= j { (i, j) } else { (j, i) };
        let mut k = 0;
        for r in 0..i {
            k += self.n - r;
        }
        term * self.sym_len() + k + (j - i)
    }

    pub fn y_index(&self, term: usize, i: usize, j: usize) -> usize {
        self.n_w() + term * self.m * self.n + i * self.n + j
    }

    /// (W term, i, j) for every W coordinate, in layout order.
    pub fn w_coordinates(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::with_capacity(self.n_w());
        for t in 0..self.w.len() {
            for i in 0..self.n {
                for j in i..self.n {
                    out.push((t, i, j));
                }
            }
        }
        out
    }

    pub fn y_coordinates(&self) -> Vec<(usize, usize, usize)> {
        let mut out = Vec::new();
        for t in 0..self.y.len() {
            for i in 0..self.m {
                for j in 0..self.n {
                    out.push((t, i, j));
                }
            }
        }
        out
    }

    /// Symmetric unit E_ij (ones at (i,j) and (j,i)).
    pub fn sym_unit(&self, i: usize, j: usize) -> DMatrix<f64> {
        let mut e = DMatrix::zeros(self.n, self.n);
        e[(i, j)] = 1.0;
        e[(j, i)] = 1.0;
        e
    }

    pub fn w_terms(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out = vec![DMatrix::zeros(self.n, self.n); self.w.len()];
        for (k, (t, i, j)) in self.w_coordinates().into_iter().enumerate() {
            out[t][(i, j)] = x[k];
            out[t][(j, i)] = x[k];
        }
        out
    }

    pub fn y_terms(&self, x: &[f64]) -> Vec<DMatrix<f64>> {
        let mut out = vec![DMatrix::zeros(self.m, self.n); self.y.len()];
        for (k, (t, i, j)) in self.y_coordinates().into_iter().enumerate() {
            out[t][(i, j)] = x[self.n_w() + k];
        }
        out
    }

    /// Inverse of [`w_terms`]/[`y_terms`].
    pub fn pack(&self, w: &[DMatrix<f64>], y: &[DMatrix<f64>]) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.dim());
        for (t, i, j) in self.w_coordinates() {
            x.push(w[t][(i, j)]);
        }
        for (t, i, j) in self.y_coordinates() {
            x.push(y[t][(i, j)]);
        }
        x
    }

    pub fn w_at(&self, x: &[f64], s: &[f64]) -> DMatrix<f64> {
        let phi = self.w.eval(s);
        self.w_terms(x)
            .into_iter()
            .zip(phi)
            .fold(DMatrix::zeros(self.n, self.n), |acc, (w, p)| acc + w * p)
    }

    pub fn y_at(&self, x: &[f64], s: &[f64]) -> DMatrix<f64> {
        let phi = self.y.eval(s);
        self.y_terms(x)
            .into_iter()
            .zip(phi)
            .fold(DMatrix::zeros(self.m, self.n), |acc, (y, p)| acc + y * p)
    }
}
