use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use super::diff::diff;
use super::eval::{CompiledExpr, EvalError};
use super::expr::Expr;
use super::parse::{parse, ParseError, VarEnv};

/// An ordered, named block of scalar inputs, e.g. `chi` = (chi1, …, chin).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarGroup {
    pub name: String,
    pub vars: Vec<String>,
}

impl VarGroup {
    /// Group `name` with members `name1 … name{len}`.
    pub fn indexed(name: &str, len: usize) -> Self {
        Self {
            name: name.to_string(),
            vars: (1..=len).map(|i| format!("{name}{i}")).collect(),
        }
    }

    pub fn scalar(name: &str) -> Self {
        Self {
            name: name.to_string(),
            vars: vec![name.to_string()],
        }
    }

    pub fn len(&self) -> usize {
        self.vars.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vars.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FieldError {
    #[error("entry {index}: {source}")]
    Parse { index: usize, source: ParseError },
    #[error("entry {index} references undeclared variable `{name}`")]
    Undeclared { index: usize, name: String },
    #[error("unknown input group `{0}`")]
    UnknownGroup(String),
    #[error("variable `{0}` declared in more than one group")]
    DuplicateVariable(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

/// Vector-valued map R^{inputs} -> R^{len} built from scalar expressions.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    entries: Vec<Expr>,
    groups: Vec<VarGroup>,
}

impl VectorField {
    pub fn new(entries: Vec<Expr>, groups: Vec<VarGroup>) -> Result<Self, FieldError> {
        let mut seen = BTreeSet::new();
        for g in &groups {
            for v in &g.vars {
                if !seen.insert(v.clone()) {
                    return Err(FieldError::DuplicateVariable(v.clone()));
                }
            }
        }
        for (index, e) in entries.iter().enumerate() {
            if let Some(name) = e.variables().into_iter().find(|v| !seen.contains(v)) {
                return Err(FieldError::Undeclared { index, name });
            }
        }
        Ok(Self { entries, groups })
    }

    pub fn parse<S: AsRef<str>>(texts: &[S], groups: Vec<VarGroup>) -> Result<Self, FieldError> {
        let env = VarEnv::new(groups.iter().flat_map(|g| g.vars.iter().cloned()));
        let entries = texts
            .iter()
            .enumerate()
            .map(|(index, t)| parse(t.as_ref(), &env).map_err(|source| FieldError::Parse { index, source }))
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(entries, groups)
    }

    pub fn entries(&self) -> &[Expr] {
        &self.entries
    }

    pub fn groups(&self) -> &[VarGroup] {
        &self.groups
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn group(&self, name: &str) -> Option<&VarGroup> {
        self.groups.iter().find(|g| g.name == name)
    }

    /// All input variables in group order.
    pub fn input_names(&self) -> Vec<String> {
        self.groups.iter().flat_map(|g| g.vars.iter().cloned()).collect()
    }

    /// Matrix of partial derivatives; entry (i, j) is d F_i / d group_j.
    pub fn jacobian(&self, group: &str) -> Result<Vec<Vec<Expr>>, FieldError> {
        let g = self
            .group(group)
            .ok_or_else(|| FieldError::UnknownGroup(group.to_string()))?;
        Ok(self
            .entries
            .iter()
            .map(|e| g.vars.iter().map(|v| diff(e, v)).collect())
            .collect())
    }

    /// Compiles every entry against the concatenated group layout.
    pub fn compile(&self) -> Result<CompiledField, FieldError> {
        let names = self.input_names();
        let layout = |n: &str| names.iter().position(|m| m == n);
        let entries = self
            .entries
            .iter()
            .map(|e| CompiledExpr::new(e, &layout))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(CompiledField {
            entries,
            offsets: self.group_offsets(),
            n_inputs: names.len(),
        })
    }

    fn group_offsets(&self) -> Vec<(String, usize, usize)> {
        let mut off = 0;
        self.groups
            .iter()
            .map(|g| {
                let r = (g.name.clone(), off, g.len());
                off += g.len();
                r
            })
            .collect()
    }
}

/// A [`VectorField`] compiled for repeated numeric evaluation.
#[derive(Debug, Clone)]
pub struct CompiledField {
    entries: Vec<CompiledExpr>,
    offsets: Vec<(String, usize, usize)>,
    n_inputs: usize,
}

impl CompiledField {
    pub fn n_inputs(&self) -> usize {
        self.n_inputs
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Evaluates with inputs given as one slice per group, in group order.
    pub fn eval_groups(&self, groups: &[&[f64]]) -> Result<Vec<f64>, EvalError> {
        let mut slots = Vec::with_capacity(self.n_inputs);
        for (values, (_, _, len)) in groups.iter().zip(&self.offsets) {
            debug_assert_eq!(values.len(), *len);
            slots.extend_from_slice(values);
        }
        debug_assert_eq!(slots.len(), self.n_inputs);
        self.eval(&slots)
    }

    pub fn eval(&self, slots: &[f64]) -> Result<Vec<f64>, EvalError> {
        self.entries.iter().map(|e| e.eval(slots)).collect()
    }
}

/// Compiles a matrix of expressions against `names`.
#[derive(Debug, Clone)]
pub struct CompiledMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<CompiledExpr>,
}

impl CompiledMatrix {
    pub fn new(m: &[Vec<Expr>], cols: usize, names: &[String]) -> Result<Self, EvalError> {
        let layout = |n: &str| names.iter().position(|m| m == n);
        let mut entries = Vec::with_capacity(m.len() * cols);
        for row in m {
            debug_assert_eq!(row.len(), cols);
            for e in row {
                entries.push(CompiledExpr::new(e, &layout)?);
            }
        }
        Ok(Self {
            rows: m.len(),
            cols,
            entries,
        })
    }

    pub fn eval(&self, slots: &[f64]) -> Result<nalgebra::DMatrix<f64>, EvalError> {
        let mut out = nalgebra::DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for j in 0..self.cols {
                out[(i, j)] = self.entries[i * self.cols + j].eval(slots)?;
            }
        }
        Ok(out)
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }
}
