//! Scalar expression language: parsing, evaluation and exact differentiation.
//!
//! Plants and virtual systems are written as vectors of these expressions; all
//! Jacobians used downstream are derived symbolically from them.

mod diff;
mod eval;
mod expr;
mod field;
mod parse;

pub use diff::{diff, simplify};
pub use eval::{eval, Bindings, CompiledExpr, EvalError};
pub use expr::{add, div, mul, neg, pow, sub, unary, BinaryOp, Expr, UnaryOp};
pub use field::{CompiledField, CompiledMatrix, FieldError, VarGroup, VectorField};
pub use parse::{fold, parse, parse_free, ParseError, VarEnv};

/// Jacobian of `exprs` with respect to `vars`, entry (i, j) = d e_i / d v_j.
pub fn jacobian_of(exprs: &[Expr], vars: &[String]) -> Vec<Vec<Expr>> {
    exprs
        .iter()
        .map(|e| vars.iter().map(|v| diff(e, v)).collect())
        .collect()
}
