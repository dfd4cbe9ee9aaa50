use super::expr::{self, add, div, mul, neg, pow, sub, BinaryOp, Expr, UnaryOp};

/// Exact symbolic derivative of `e` with respect to `var`.
///
/// The result is only simplified by constant folding and 0/1 elimination, so
/// derived Jacobians stay structurally traceable to their source expressions.
pub fn diff(e: &Expr, var: &str) -> Expr {
    if !e.depends_on(var) {
        return Expr::zero();
    }
    match e {
        Expr::Const(_) => Expr::zero(),
        Expr::Var(name) => {
            if name == var {
                Expr::one()
            } else {
                Expr::zero()
            }
        }
        Expr::Unary(op, a) => {
            let da = diff(a, var);
            let a = simplify(a);
            match op {
                UnaryOp::Neg => neg(da),
                UnaryOp::Sin => mul(expr::unary(UnaryOp::Cos, a), da),
                UnaryOp::Cos => neg(mul(expr::unary(UnaryOp::Sin, a), da)),
                UnaryOp::Exp => mul(expr::unary(UnaryOp::Exp, a), da),
                UnaryOp::Ln => div(da, a),
                UnaryOp::Sqrt => div(da, mul(Expr::Const(2.0), expr::unary(UnaryOp::Sqrt, a))),
            }
        }
        Expr::Binary(op, a, b) => {
            let da = diff(a, var);
            let db = diff(b, var);
            let (a, b) = (simplify(a), simplify(b));
            match op {
                BinaryOp::Add => add(da, db),
                BinaryOp::Sub => sub(da, db),
                BinaryOp::Mul => add(mul(da, b), mul(a, db)),
                BinaryOp::Div => {
                    // (a/b)' = a'/b - a b'/b^2
                    let first = div(da, b.clone());
                    if db.is_zero() {
                        first
                    } else {
                        sub(first, div(mul(a, db), pow(b, 2)))
                    }
                }
            }
        }
        Expr::Pow(_, 0) => Expr::zero(),
        Expr::Pow(a, k) => {
            let da = diff(a, var);
            let a = simplify(a);
            mul(mul(Expr::Const(*k as f64), pow(a, k - 1)), da)
        }
    }
}

/// Re-applies the folding constructors bottom-up.
pub fn simplify(e: &Expr) -> Expr {
    super::parse::fold(e)
}
