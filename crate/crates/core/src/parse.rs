//! Text grammar for scalar expressions and vector fields.
//!
//! ```text
//! frame  := (NAME '=' field NEWLINE)*          # '#' starts a comment
//! expr   := term (('+' | '-') term)*
//! term   := unary (('*' | '/') unary)*         # '/' only by constants
//! unary  := '-' unary | power
//! power  := atom ('^' '-'? INT)?
//! atom   := NUMBER | 'x'INT | 'd'INT | FUNC '(' expr ')' | '(' expr ')'
//! ```
//!
//! `x1..xn` are coordinates, `d1..dn` the coordinate fields, `FUNC` one of
//! `sin cos exp ln`. Whitespace is insignificant inside a definition.

use num_traits::Zero;

use crate::error::{Error, Result};
use crate::expr::{Expr, Func};
use crate::poly::Polynomial;
use crate::scalar::{rational_from_f64, Rational};
use crate::vectorfield::VectorField;

#[derive(Debug, Clone, PartialEq)]
enum Tok {
    Num(Rational),
    Var(usize),
    Der(usize),
    Func(Func),
    Ident(String),
    Plus,
    Minus,
    Star,
    Slash,
    Caret,
    LParen,
    RParen,
    Eq,
    End,
}

#[derive(Debug, Clone)]
struct Token {
    tok: Tok,
    line: usize,
    col: usize,
}

fn err(line: usize, col: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        column: col,
        message: msg.into(),
    }
}

fn lex(src: &str, line: usize, col0: usize) -> Result<Vec<Token>> {
    let chars: Vec<char> = src.chars().collect();
    let mut out = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let c = chars[i];
        let col = col0 + i;
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        if c == '#' {
            break;
        }
        let simple = match c {
            '+' => Some(Tok::Plus),
            '-' => Some(Tok::Minus),
            '*' => Some(Tok::Star),
            '/' => Some(Tok::Slash),
            '^' => Some(Tok::Caret),
            '(' => Some(Tok::LParen),
            ')' => Some(Tok::RParen),
            '=' => Some(Tok::Eq),
            _ => None,
        };
        if let Some(tok) = simple {
            out.push(Token { tok, line, col });
            i += 1;
            continue;
        }
        if c.is_ascii_digit() || c == '.' {
            let start = i;
            while i < chars.len() && (chars[i].is_ascii_digit() || chars[i] == '.') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let value = if s.contains('.') {
                s.parse::<f64>()
                    .ok()
                    .and_then(rational_from_f64)
                    .ok_or_else(|| err(line, col, format!("bad number '{s}'")))?
            } else {
                let n: num_bigint::BigInt = s
                    .parse()
                    .map_err(|_| err(line, col, format!("bad number '{s}'")))?;
                Rational::from_integer(n)
            };
            out.push(Token {
                tok: Tok::Num(value),
                line,
                col,
            });
            continue;
        }
        if c.is_alphabetic() || c == '_' {
            let start = i;
            while i < chars.len() && (chars[i].is_alphanumeric() || chars[i] == '_') {
                i += 1;
            }
            let s: String = chars[start..i].iter().collect();
            let indexed = |prefix: char| -> Option<usize> {
                let rest = s.strip_prefix(prefix)?;
                if rest.is_empty() || !rest.chars().all(|c| c.is_ascii_digit()) {
                    return None;
                }
                rest.parse().ok()
            };
            let tok = if let Some(k) = indexed('x') {
                if k == 0 {
                    return Err(err(line, col, "coordinates are numbered from x1"));
                }
                Tok::Var(k - 1)
            } else if let Some(k) = indexed('d') {
                if k == 0 {
                    return Err(err(line, col, "fields are numbered from d1"));
                }
                Tok::Der(k - 1)
            } else if let Some(f) = Func::from_name(&s) {
                Tok::Func(f)
            } else {
                Tok::Ident(s)
            };
            out.push(Token { tok, line, col });
            continue;
        }
        return Err(err(line, col, format!("unexpected character '{c}'")));
    }
    out.push(Token {
        tok: Tok::End,
        line,
        col: col0 + chars.len(),
    });
    Ok(out)
}

/// Scalar or vector-field valued subexpression.
#[derive(Debug, Clone)]
enum Val {
    Scalar(Expr<Rational>),
    Field(Vec<Expr<Rational>>),
}

fn field_get(v: &[Expr<Rational>], j: usize) -> Expr<Rational> {
    v.get(j).cloned().unwrap_or_else(Expr::zero)
}

struct Parser {
    toks: Vec<Token>,
    pos: usize,
    dim: Option<usize>,
}

impl Parser {
    fn peek(&self) -> &Token {
        &self.toks[self.pos]
    }

    fn next(&mut self) -> Token {
        let t = self.toks[self.pos].clone();
        if self.pos + 1 < self.toks.len() {
            self.pos += 1;
        }
        t
    }

    fn fail<T>(&self, t: &Token, msg: impl Into<String>) -> Result<T> {
        Err(err(t.line, t.col, msg))
    }

    fn check_index(&self, t: &Token, k: usize) -> Result<()> {
        if let Some(n) = self.dim {
            if k >= n {
                return self.fail(t, format!("index {} exceeds dimension {n}", k + 1));
            }
        }
        Ok(())
    }

    fn expr(&mut self) -> Result<Val> {
        let mut acc = self.term()?;
        loop {
            let t = self.peek().clone();
            let neg = match t.tok {
                Tok::Plus => false,
                Tok::Minus => true,
                _ => return Ok(acc),
            };
            self.next();
            let rhs = self.term()?;
            let rhs = if neg { negate(rhs) } else { rhs };
            acc = match (acc, rhs) {
                (Val::Scalar(a), Val::Scalar(b)) => Val::Scalar(a.add(&b)),
                (Val::Field(a), Val::Field(b)) => {
                    let n = a.len().max(b.len());
                    Val::Field((0..n).map(|j| field_get(&a, j).add(&field_get(&b, j))).collect())
                }
                _ => return self.fail(&t, "cannot add a scalar and a vector field"),
            };
        }
    }

    fn term(&mut self) -> Result<Val> {
        let mut acc = self.unary()?;
        loop {
            let t = self.peek().clone();
            match t.tok {
                Tok::Star => {
                    self.next();
                    let rhs = self.unary()?;
                    acc = match (acc, rhs) {
                        (Val::Scalar(a), Val::Scalar(b)) => Val::Scalar(a.mul(&b)),
                        (Val::Scalar(a), Val::Field(f)) | (Val::Field(f), Val::Scalar(a)) => {
                            Val::Field(f.iter().map(|c| a.mul(c)).collect())
                        }
                        (Val::Field(_), Val::Field(_)) => {
                            return self.fail(&t, "product of two vector fields")
                        }
                    };
                }
                Tok::Slash => {
                    self.next();
                    let dt = self.peek().clone();
                    let rhs = self.unary()?;
                    let c = match &rhs {
                        Val::Scalar(Expr::Poly(p)) => p.constant_value(),
                        _ => None,
                    };
                    let Some(c) = c else {
                        return self.fail(&dt, "division is only allowed by a constant");
                    };
                    if c.is_zero() {
                        return self.fail(&dt, "division by zero");
                    }
                    let inv = Expr::constant(num_traits::Inv::inv(c));
                    acc = match acc {
                        Val::Scalar(a) => Val::Scalar(a.mul(&inv)),
                        Val::Field(f) => Val::Field(f.iter().map(|e| e.mul(&inv)).collect()),
                    };
                }
                _ => return Ok(acc),
            }
        }
    }

    fn unary(&mut self) -> Result<Val> {
        if self.peek().tok == Tok::Minus {
            self.next();
            return Ok(negate(self.unary()?));
        }
        if self.peek().tok == Tok::Plus {
            self.next();
            return self.unary();
        }
        self.power()
    }

    fn power(&mut self) -> Result<Val> {
        let base = self.atom()?;
        if self.peek().tok != Tok::Caret {
            return Ok(base);
        }
        let t = self.next();
        let neg = if self.peek().tok == Tok::Minus {
            self.next();
            true
        } else {
            false
        };
        let et = self.next();
        let Tok::Num(e) = &et.tok else {
            return self.fail(&et, "expected an integer exponent");
        };
        if !e.is_integer() {
            return self.fail(&et, "exponent must be an integer");
        }
        let k: i32 = e
            .to_integer()
            .try_into()
            .map_err(|_| err(et.line, et.col, "exponent too large"))?;
        let k = if neg { -k } else { k };
        match base {
            Val::Scalar(b) => Ok(Val::Scalar(b.powi(k))),
            Val::Field(_) => self.fail(&t, "cannot raise a vector field to a power"),
        }
    }

    fn atom(&mut self) -> Result<Val> {
        let t = self.next();
        match t.tok.clone() {
            Tok::Num(v) => Ok(Val::Scalar(Expr::constant(v))),
            Tok::Var(k) => {
                self.check_index(&t, k)?;
                Ok(Val::Scalar(Expr::Poly(Polynomial::var(k))))
            }
            Tok::Der(k) => {
                self.check_index(&t, k)?;
                let mut f = vec![Expr::zero(); k + 1];
                f[k] = Expr::one();
                Ok(Val::Field(f))
            }
            Tok::Func(f) => {
                let open = self.next();
                if open.tok != Tok::LParen {
                    return self.fail(&open, format!("expected '(' after {}", f.name()));
                }
                let arg = self.expr()?;
                let close = self.next();
                if close.tok != Tok::RParen {
                    return self.fail(&close, "expected ')'");
                }
                match arg {
                    Val::Scalar(a) => Ok(Val::Scalar(Expr::apply(f, a))),
                    Val::Field(_) => self.fail(&t, "function of a vector field"),
                }
            }
            Tok::LParen => {
                let v = self.expr()?;
                let close = self.next();
                if close.tok != Tok::RParen {
                    return self.fail(&close, "expected ')'");
                }
                Ok(v)
            }
            Tok::Ident(s) => self.fail(&t, format!("unknown identifier '{s}'")),
            Tok::End => self.fail(&t, "unexpected end of input"),
            other => self.fail(&t, format!("unexpected token {other:?}")),
        }
    }
}

fn negate(v: Val) -> Val {
    match v {
        Val::Scalar(e) => Val::Scalar(e.neg()),
        Val::Field(f) => Val::Field(f.iter().map(Expr::neg).collect()),
    }
}

fn parse_val(src: &str, line: usize, col0: usize, dim: Option<usize>) -> Result<Val> {
    let toks = lex(src, line, col0)?;
    let mut p = Parser { toks, pos: 0, dim };
    let v = p.expr()?;
    let t = p.peek().clone();
    if t.tok != Tok::End {
        return p.fail(&t, "unexpected trailing input");
    }
    Ok(v)
}

/// Parses a scalar expression such as `1 + x1^2`.
pub fn parse_scalar(src: &str, dim: Option<usize>) -> Result<Expr<Rational>> {
    match parse_val(src, 1, 1, dim)? {
        Val::Scalar(e) => Ok(e),
        Val::Field(_) => Err(err(1, 1, "expected a scalar expression, found a vector field")),
    }
}

fn to_field(f: Vec<Expr<Rational>>, dim: usize) -> VectorField<Rational> {
    VectorField::new((0..dim).map(|j| field_get(&f, j)).collect())
}

/// Parses a single field such as `d1 - 1/2*x2*d3` in dimension `dim`.
pub fn parse_field(src: &str, dim: usize) -> Result<VectorField<Rational>> {
    match parse_val(src, 1, 1, Some(dim))? {
        Val::Field(f) => Ok(to_field(f, dim)),
        Val::Scalar(e) if e.is_zero() => Ok(to_field(Vec::new(), dim)),
        Val::Scalar(_) => Err(err(1, 1, "expected a vector field (terms need a d-factor)")),
    }
}

/// Parses `NAME = field` lines. Blank lines and `#` comments are skipped.
/// With `dim = None` the dimension is the largest index that appears.
pub fn parse_frame(src: &str, dim: Option<usize>) -> Result<Vec<(String, VectorField<Rational>)>> {
    let mut raw = Vec::new();
    for (ln, line) in src.lines().enumerate() {
        let ln = ln + 1;
        let content = line.split('#').next().unwrap_or("");
        if content.trim().is_empty() {
            continue;
        }
        let Some(eq) = content.find('=') else {
            return Err(err(ln, 1, "expected 'NAME = field'"));
        };
        let name = content[..eq].trim();
        if name.is_empty() || !name.chars().all(|c| c.is_alphanumeric() || c == '_') {
            return Err(err(ln, 1, format!("bad field name '{name}'")));
        }
        let rhs = &content[eq + 1..];
        let col0 = content[..eq + 1].chars().count() + 1;
        match parse_val(rhs, ln, col0, dim)? {
            Val::Field(f) => raw.push((name.to_string(), f)),
            Val::Scalar(e) if e.is_zero() => raw.push((name.to_string(), Vec::new())),
            Val::Scalar(_) => {
                return Err(err(ln, col0, "expected a vector field (terms need a d-factor)"))
            }
        }
    }
    let n = match dim {
        Some(n) => n,
        None => raw
            .iter()
            .map(|(_, f)| {
                f.len()
                    .max(f.iter().map(Expr::nvars).max().unwrap_or(0))
            })
            .max()
            .unwrap_or(0),
    };
    Ok(raw.into_iter().map(|(name, f)| (name, to_field(f, n))).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;
    use crate::vectorfield::PolyVectorField;

    #[test]
    fn heisenberg_field() {
        let f = parse_field("d1 - 1/2*x2*d3", 3).unwrap().as_poly().unwrap();
        let expect = PolyVectorField::new(vec![
            Polynomial::constant(q(1, 1)),
            Polynomial::zero(),
            Polynomial::var(1).scale(&q(-1, 2)),
        ]);
        assert_eq!(f, expect);
        assert_eq!(f.to_string(), "d1 - 1/2*x2*d3");
    }

    #[test]
    fn whitespace_and_grouping() {
        let a = parse_field("(x1 + 1) * d2", 2).unwrap();
        let b = parse_field("x1*d2+d2", 2).unwrap();
        assert_eq!(a, b);
        let c = parse_field("  x1 *   d2 + d2  ", 2).unwrap();
        assert_eq!(a, c);
    }

    #[test]
    fn powers_and_functions() {
        let e = parse_scalar("x1^2 - 2*x1 + 1", Some(1)).unwrap();
        let v = e.to_real::<f64>().eval(&[3.0]);
        assert_eq!(v, 4.0);
        let f = parse_field("cos(x3)*d1 + sin(x3)*d2", 3).unwrap();
        assert!(f.as_poly().is_none());
        let e = parse_scalar("0.25*x1", Some(1)).unwrap();
        assert_eq!(e.as_poly().unwrap().eval(&[q(1, 1)]), q(1, 4));
    }

    #[test]
    fn frame_with_positions() {
        let src = "# Heisenberg\nX1 = d1 - 1/2*x2*d3\nX2 = d2 + 1/2*x1*d3\n";
        let frame = parse_frame(src, None).unwrap();
        assert_eq!(frame.len(), 2);
        assert_eq!(frame[1].0, "X2");
        assert_eq!(frame[0].1.dim(), 3);

        let bad = "X1 = d1\nX2 = d2 + * x1\n";
        match parse_frame(bad, None).unwrap_err() {
            Error::Parse { line, column, .. } => {
                assert_eq!(line, 2);
                assert_eq!(column, 11);
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn rejects_mixed_and_bad_input() {
        assert!(parse_field("d1 + x1", 2).is_err());
        assert!(parse_field("d1*d2", 2).is_err());
        assert!(parse_field("d3", 2).is_err());
        assert!(parse_field("x1/x2*d1", 2).is_err());
        assert!(parse_scalar("d1", Some(1)).is_err());
        assert!(parse_scalar("y", Some(1)).is_err());
    }
}
