//! Recursive-descent parser for the scalar expression language.
//!
//! ```text
//! expr    := term (('+' | '-') term)*
//! term    := unary (('*' | '/') unary)*
//! unary   := '-' unary | power
//! power   := primary ('^' integer)*
//! primary := number | ident | func '(' expr ')' | '(' expr ')'
//! func    := 'sin' | 'cos' | 'exp' | 'ln' | 'sqrt'
//! ```
//!
//! Positions in errors are 1-based character columns.

use std::collections::BTreeSet;

use super::expr::{self, BinaryOp, Expr, UnaryOp};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ParseError {
    #[error("syntax error at position {pos}: {message}")]
    Syntax { pos: usize, message: String },
    #[error("unknown identifier `{name}` at position {pos}")]
    UnknownIdentifier { name: String, pos: usize },
}

/// Set of variable names an expression may reference.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct VarEnv {
    names: BTreeSet<String>,
}

impl VarEnv {
    pub fn new<I, S>(names: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        Self {
            names: names.into_iter().map(Into::into).collect(),
        }
    }

    pub fn contains(&self, name: &str) -> bool {
        self.names.contains(name)
    }

    pub fn insert(&mut self, name: impl Into<String>) {
        self.names.insert(name.into());
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.names.iter().map(String::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Token {
    Number(f64, String),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
}

struct Lexed {
    token: Token,
    pos: usize,
}

fn lex(text: &str) -> Result<Vec<Lexed>, ParseError> {
    let chars: Vec<char> = text.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let pos = i + 1;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let single = match c {
            '+' => Some(Token::Plus),
            '-' => Some(Token::Minus),
            '*' => Some(Token::Star),
            '/' => Some(Token::Slash),
            '^' => Some(Token::Caret),
            '(' => Some(Token::LParen),
            ')' => Some(Token::RParen),
            _ => None,
        };
        if let Some(token) = single {
            out.push(Lexed { token, pos });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            // exponent part: e.g. 1e-7, 2.5E+3
            if i < chars.len() && (chars[i] == 'e' || chars[i] == 'E') {
                let mut j = i + 1;
                if j < chars.len() && (chars[j] == '+' || chars[j] == '-') {
                    j += 1;
                }
                if j < chars.len() && chars[j].is_ascii_digit() {
                    while j < chars.len() && chars[j].is_ascii_digit() {
                        j += 1;
                    }
                    i = j;
                }
            }
            let literal: String = chars[start..i].iter().collect();
            let value: f64 = literal.parse().map_err(|_| ParseError::Syntax {
                pos,
                message: format!("malformed number `{literal}`"),
            })?;
            out.push(Lexed {
                token: Token::Number(value, literal),
                pos,
            });
            continue;
        }
        if c.is_ascii_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            out.push(Lexed {
                token: Token::Ident(chars[start..i].iter().collect()),
                pos,
            });
            continue;
        }
        return Err(ParseError::Syntax {
            pos,
            message: format!("unexpected character `{c}`"),
        });
    }
    Ok(out)
}

struct Parser<'a> {
    tokens: Vec<Lexed>,
    index: usize,
    end_pos: usize,
    env: Option<&'a VarEnv>,
}

impl Parser<'_> {
    fn peek(&self) -> Option<&Token> {
        self.tokens.get(self.index).map(|l| &l.token)
    }

    fn pos(&self) -> usize {
        self.tokens
            .get(self.index)
            .map(|l| l.pos)
            .unwrap_or(self.end_pos)
    }

    fn error<T>(&self, message: impl Into<String>) -> Result<T, ParseError> {
        Err(ParseError::Syntax {
            pos: self.pos(),
            message: message.into(),
        })
    }

    fn advance(&mut self) -> Option<Token> {
        let t = self.tokens.get(self.index).map(|l| l.token.clone());
        self.index += 1;
        t
    }

    fn expr(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.term()?;
        loop {
            let op = match self.peek() {
                Some(Token::Plus) => BinaryOp::Add,
                Some(Token::Minus) => BinaryOp::Sub,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.term()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn term(&mut self) -> Result<Expr, ParseError> {
        let mut lhs = self.unary()?;
        loop {
            let op = match self.peek() {
                Some(Token::Star) => BinaryOp::Mul,
                Some(Token::Slash) => BinaryOp::Div,
                _ => return Ok(lhs),
            };
            self.advance();
            let rhs = self.unary()?;
            lhs = Expr::Binary(op, Box::new(lhs), Box::new(rhs));
        }
    }

    fn unary(&mut self) -> Result<Expr, ParseError> {
        if self.peek() == Some(&Token::Minus) {
            self.advance();
            let inner = self.unary()?;
            return Ok(match inner {
                // a negated literal is a negative constant
                Expr::Const(c) => Expr::Const(-c),
                other => Expr::Unary(UnaryOp::Neg, Box::new(other)),
            });
        }
        self.power()
    }

    fn power(&mut self) -> Result<Expr, ParseError> {
        let mut base = self.primary()?;
        while self.peek() == Some(&Token::Caret) {
            self.advance();
            let pos = self.pos();
            match self.advance() {
                Some(Token::Number(value, literal))
                    if value.fract() == 0.0
                        && value >= 0.0
                        && value <= u32::MAX as f64
                        && !literal.contains('.')
                        && !literal.contains(['e', 'E']) =>
                {
                    base = Expr::Pow(Box::new(base), value as u32);
                }
                _ => {
                    return Err(ParseError::Syntax {
                        pos,
                        message: "exponent must be a non-negative integer literal".into(),
                    })
                }
            }
        }
        Ok(base)
    }

    fn primary(&mut self) -> Result<Expr, ParseError> {
        let pos = self.pos();
        match self.advance() {
            Some(Token::Number(value, _)) => Ok(Expr::Const(value)),
            Some(Token::LParen) => {
                let inner = self.expr()?;
                if self.peek() != Some(&Token::RParen) {
                    return self.error("expected `)`");
                }
                self.advance();
                Ok(inner)
            }
            Some(Token::Ident(name)) => {
                if self.peek() == Some(&Token::LParen) {
                    let Some(op) = UnaryOp::from_function_name(&name) else {
                        return Err(ParseError::UnknownIdentifier { name, pos });
                    };
                    self.advance();
                    let arg = self.expr()?;
                    if self.peek() != Some(&Token::RParen) {
                        return self.error("expected `)`");
                    }
                    self.advance();
                    return Ok(Expr::Unary(op, Box::new(arg)));
                }
                if let Some(env) = self.env {
                    if !env.contains(&name) {
                        return Err(ParseError::UnknownIdentifier { name, pos });
                    }
                }
                Ok(Expr::Var(name))
            }
            Some(_) => Err(ParseError::Syntax {
                pos,
                message: "expected a number, identifier or `(`".into(),
            }),
            None => Err(ParseError::Syntax {
                pos,
                message: "unexpected end of input".into(),
            }),
        }
    }
}

fn parse_impl(text: &str, env: Option<&VarEnv>) -> Result<Expr, ParseError> {
    let tokens = lex(text)?;
    let mut parser = Parser {
        tokens,
        index: 0,
        end_pos: text.chars().count() + 1,
        env,
    };
    let e = parser.expr()?;
    if parser.index < parser.tokens.len() {
        return parser.error("unexpected trailing input");
    }
    Ok(e)
}

/// Parses `text`, rejecting identifiers not declared in `env`.
pub fn parse(text: &str, env: &VarEnv) -> Result<Expr, ParseError> {
    parse_impl(text, Some(env))
}

/// Parses `text` without checking identifiers.
pub fn parse_free(text: &str) -> Result<Expr, ParseError> {
    parse_impl(text, None)
}

impl std::str::FromStr for Expr {
    type Err = ParseError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        parse_free(s)
    }
}

/// Folds constants in a freshly parsed tree (parsing itself keeps the literal
/// structure so that printing round-trips).
pub fn fold(e: &Expr) -> Expr {
    match e {
        Expr::Const(_) | Expr::Var(_) => e.clone(),
        Expr::Unary(op, a) => expr::unary(*op, fold(a)),
        Expr::Pow(a, k) => expr::pow(fold(a), *k),
        Expr::Binary(op, a, b) => expr::binary(*op, fold(a), fold(b)),
    }
}
