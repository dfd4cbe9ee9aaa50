use std::collections::HashMap;

use super::expr::{BinaryOp, Expr, UnaryOp};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("unbound variable `{0}`")]
    Unbound(String),
    #[error("domain error in `{node}`: {reason}")]
    Domain { node: String, reason: &'static str },
}

/// Variable lookup used by [`eval`].
pub trait Bindings {
    fn get(&self, name: &str) -> Option<f64>;
}

impl Bindings for HashMap<String, f64> {
    fn get(&self, name: &str) -> Option<f64> {
        HashMap::get(self, name).copied()
    }
}

impl Bindings for HashMap<&str, f64> {
    fn get(&self, name: &str) -> Option<f64> {
        HashMap::get(self, name).copied()
    }
}

impl Bindings for [(&str, f64)] {
    fn get(&self, name: &str) -> Option<f64> {
        self.iter().find(|(n, _)| *n == name).map(|(_, v)| *v)
    }
}

impl<const N: usize> Bindings for [(&str, f64); N] {
    fn get(&self, name: &str) -> Option<f64> {
        Bindings::get(self.as_slice(), name)
    }
}

fn apply_unary(op: UnaryOp, a: f64) -> Result<f64, &'static str> {
    Ok(match op {
        UnaryOp::Neg => -a,
        UnaryOp::Sin => a.sin(),
        UnaryOp::Cos => a.cos(),
        UnaryOp::Exp => a.exp(),
        UnaryOp::Ln => {
            if a <= 0.0 {
                return Err("logarithm of a non-positive value");
            }
            a.ln()
        }
        UnaryOp::Sqrt => {
            if a < 0.0 {
                return Err("square root of a negative value");
            }
            a.sqrt()
        }
    })
}

fn apply_binary(op: BinaryOp, a: f64, b: f64) -> Result<f64, &'static str> {
    Ok(match op {
        BinaryOp::Add => a + b,
        BinaryOp::Sub => a - b,
        BinaryOp::Mul => a * b,
        BinaryOp::Div => {
            if b == 0.0 {
                return Err("division by zero");
            }
            a / b
        }
    })
}

/// Evaluates `e` in double precision.
pub fn eval<B: Bindings + ?Sized>(e: &Expr, bindings: &B) -> Result<f64, EvalError> {
    match e {
        Expr::Const(c) => Ok(*c),
        Expr::Var(name) => bindings
            .get(name)
            .ok_or_else(|| EvalError::Unbound(name.clone())),
        Expr::Unary(op, a) => {
            let v = eval(a, bindings)?;
            apply_unary(*op, v).map_err(|reason| EvalError::Domain {
                node: e.to_string(),
                reason,
            })
        }
        Expr::Binary(op, a, b) => {
            let x = eval(a, bindings)?;
            let y = eval(b, bindings)?;
            apply_binary(*op, x, y).map_err(|reason| EvalError::Domain {
                node: e.to_string(),
                reason,
            })
        }
        Expr::Pow(a, k) => Ok(eval(a, bindings)?.powi(*k as i32)),
    }
}

#[derive(Debug, Clone)]
enum Instr {
    Const(f64),
    Load(usize),
    Unary(UnaryOp, usize),
    Binary(BinaryOp, usize),
    Pow(u32),
}

/// An expression compiled against a fixed variable layout.
///
/// Variables are resolved to slot indices once; evaluation runs a flat stack
/// program. Each unary/binary instruction keeps the index of its source node so
/// that domain errors can still name the offending subexpression.
#[derive(Debug, Clone)]
pub struct CompiledExpr {
    program: Vec<Instr>,
    nodes: Vec<String>,
    max_stack: usize,
}

impl CompiledExpr {
    /// Compiles `e`; `layout` maps each variable name to its slot.
    pub fn new(e: &Expr, layout: &dyn Fn(&str) -> Option<usize>) -> Result<Self, EvalError> {
        let mut c = CompiledExpr {
            program: Vec::new(),
            nodes: Vec::new(),
            max_stack: 0,
        };
        let mut depth = 0usize;
        c.emit(e, layout, &mut depth)?;
        Ok(c)
    }

    fn emit(
        &mut self,
        e: &Expr,
        layout: &dyn Fn(&str) -> Option<usize>,
        depth: &mut usize,
    ) -> Result<(), EvalError> {
        match e {
            Expr::Const(c) => {
                self.program.push(Instr::Const(*c));
                *depth += 1;
            }
            Expr::Var(name) => {
                let slot = layout(name).ok_or_else(|| EvalError::Unbound(name.clone()))?;
                self.program.push(Instr::Load(slot));
                *depth += 1;
            }
            Expr::Unary(op, a) => {
                self.emit(a, layout, depth)?;
                self.nodes.push(e.to_string());
                self.program.push(Instr::Unary(*op, self.nodes.len() - 1));
            }
            Expr::Binary(op, a, b) => {
                self.emit(a, layout, depth)?;
                self.emit(b, layout, depth)?;
                self.nodes.push(e.to_string());
                self.program.push(Instr::Binary(*op, self.nodes.len() - 1));
                *depth -= 1;
            }
            Expr::Pow(a, k) => {
                self.emit(a, layout, depth)?;
                self.program.push(Instr::Pow(*k));
            }
        }
        self.max_stack = self.max_stack.max(*depth);
        Ok(())
    }

    pub fn eval(&self, slots: &[f64]) -> Result<f64, EvalError> {
        let mut stack: Vec<f64> = Vec::with_capacity(self.max_stack);
        for instr in &self.program {
            match *instr {
                Instr::Const(c) => stack.push(c),
                Instr::Load(i) => stack.push(slots[i]),
                Instr::Unary(op, node) => {
                    let a = stack.pop().expect("stack underflow");
                    let v = apply_unary(op, a).map_err(|reason| EvalError::Domain {
                        node: self.nodes[node].clone(),
                        reason,
                    })?;
                    stack.push(v);
                }
                Instr::Binary(op, node) => {
                    let b = stack.pop().expect("stack underflow");
                    let a = stack.pop().expect("stack underflow");
                    let v = apply_binary(op, a, b).map_err(|reason| EvalError::Domain {
                        node: self.nodes[node].clone(),
                        reason,
                    })?;
                    stack.push(v);
                }
                Instr::Pow(k) => {
                    let a = stack.pop().expect("stack underflow");
                    stack.push(a.powi(k as i32));
                }
            }
        }
        Ok(stack.pop().expect("empty program"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::symdyn::parse::parse_free;

    #[test]
    fn spot_values() {
        let cos = parse_free("cos(x1)").unwrap();
        assert_eq!(eval(&cos, &[("x1", 0.0)]).unwrap(), 1.0);
        let e = parse_free("exp(-x2)").unwrap();
        assert_eq!(eval(&e, &[("x2", 0.0)]).unwrap(), 1.0);
        // u_e(0) = e^{-0} - 1 = 0 for the furnace family
        let ue = parse_free("exp(-x2) - 1").unwrap();
        assert_eq!(eval(&ue, &[("x2", 0.0)]).unwrap(), 0.0);
        let cubic = parse_free("x^3 - x").unwrap();
        assert_eq!(eval(&cubic, &[("x", 2.0)]).unwrap(), 6.0);
    }

    #[test]
    fn domain_errors_name_the_node() {
        let e = parse_free("1 + ln(x)").unwrap();
        match eval(&e, &[("x", -1.0)]) {
            Err(EvalError::Domain { node, .. }) => assert_eq!(node, "ln(x)"),
            other => panic!("unexpected {other:?}"),
        }
        let e = parse_free("y / (x - x)").unwrap();
        assert!(matches!(
            eval(&e, &[("x", 1.0), ("y", 1.0)]),
            Err(EvalError::Domain { reason: "division by zero", .. })
        ));
        let e = parse_free("sqrt(x)").unwrap();
        assert!(eval(&e, &[("x", -0.5)]).is_err());
        assert!(matches!(eval(&e, &[("z", 1.0)]), Err(EvalError::Unbound(_))));
    }

    #[test]
    fn compiled_matches_tree_walk() {
        let e = parse_free("-(1 - x1^2) * chi1 + mu1 / (2 + cos(x1))").unwrap();
        let names = ["x1", "chi1", "mu1"];
        let c = CompiledExpr::new(&e, &|n| names.iter().position(|m| *m == n)).unwrap();
        let slots = [0.7, -1.3, 2.1];
        let b = [("x1", 0.7), ("chi1", -1.3), ("mu1", 2.1)];
        assert_eq!(c.eval(&slots).unwrap(), eval(&e, &b).unwrap());
        let bad = parse_free("ln(x1)").unwrap();
        let c = CompiledExpr::new(&bad, &|n| names.iter().position(|m| *m == n)).unwrap();
        assert!(matches!(c.eval(&[-1.0, 0.0, 0.0]), Err(EvalError::Domain { .. })));
    }
}
