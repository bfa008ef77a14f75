//! Coefficient expressions: polynomials closed under a few elementary
//! functions. Polynomial subexpressions are folded eagerly so that purely
//! polynomial inputs stay exact polynomials through every operation.

use std::fmt;

use crate::poly::{CoeffFmt, Polynomial};
use crate::scalar::{Rational, Real, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Sin,
    Cos,
    Exp,
    Ln,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Sin => "sin",
            Func::Cos => "cos",
            Func::Exp => "exp",
            Func::Ln => "ln",
        }
    }

    pub fn from_name(s: &str) -> Option<Func> {
        Some(match s {
            "sin" => Func::Sin,
            "cos" => Func::Cos,
            "exp" => Func::Exp,
            "ln" | "log" => Func::Ln,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum Expr<T> {
    Poly(Polynomial<T>),
    Sum(Vec<Expr<T>>),
    Prod(Vec<Expr<T>>),
    Apply(Func, Box<Expr<T>>),
    Powi(Box<Expr<T>>, i32),
}

impl<T: Scalar> From<Polynomial<T>> for Expr<T> {
    fn from(p: Polynomial<T>) -> Self {
        Expr::Poly(p)
    }
}

impl<T: Scalar> Expr<T> {
    pub fn zero() -> Self {
        Expr::Poly(Polynomial::zero())
    }

    pub fn one() -> Self {
        Expr::Poly(Polynomial::constant(T::one()))
    }

    pub fn constant(c: T) -> Self {
        Expr::Poly(Polynomial::constant(c))
    }

    pub fn as_poly(&self) -> Option<&Polynomial<T>> {
        match self {
            Expr::Poly(p) => Some(p),
            _ => None,
        }
    }

    pub fn is_zero(&self) -> bool {
        matches!(self, Expr::Poly(p) if p.is_zero())
    }

    fn is_one(&self) -> bool {
        matches!(self, Expr::Poly(p) if p.constant_value() == Some(T::one()))
    }

    pub fn add(&self, other: &Expr<T>) -> Expr<T> {
        match (self, other) {
            (Expr::Poly(a), Expr::Poly(b)) => Expr::Poly(a + b),
            (a, b) if a.is_zero() => b.clone(),
            (a, b) if b.is_zero() => a.clone(),
            (a, b) => {
                let mut items = Vec::new();
                for e in [a, b] {
                    match e {
                        Expr::Sum(v) => items.extend(v.iter().cloned()),
                        other => items.push(other.clone()),
                    }
                }
                Expr::Sum(items)
            }
        }
    }

    pub fn neg(&self) -> Expr<T> {
        match self {
            Expr::Poly(p) => Expr::Poly(-p),
            other => Expr::Poly(Polynomial::constant(-T::one())).mul(other),
        }
    }

    pub fn sub(&self, other: &Expr<T>) -> Expr<T> {
        self.add(&other.neg())
    }

    pub fn mul(&self, other: &Expr<T>) -> Expr<T> {
        match (self, other) {
            (Expr::Poly(a), Expr::Poly(b)) => Expr::Poly(a * b),
            (a, _) if a.is_zero() => Expr::zero(),
            (_, b) if b.is_zero() => Expr::zero(),
            (a, b) if a.is_one() => b.clone(),
            (a, b) if b.is_one() => a.clone(),
            (a, b) => {
                let mut items = Vec::new();
                for e in [a, b] {
                    match e {
                        Expr::Prod(v) => items.extend(v.iter().cloned()),
                        other => items.push(other.clone()),
                    }
                }
                Expr::Prod(items)
            }
        }
    }

    pub fn apply(f: Func, arg: Expr<T>) -> Expr<T> {
        Expr::Apply(f, Box::new(arg))
    }

    pub fn powi(&self, k: i32) -> Expr<T> {
        match (self, k) {
            (_, 0) => Expr::one(),
            (e, 1) => e.clone(),
            (Expr::Poly(p), k) if k > 0 => {
                let mut acc = Polynomial::constant(T::one());
                for _ in 0..k {
                    acc = &acc * p;
                }
                Expr::Poly(acc)
            }
            (e, k) => Expr::Powi(Box::new(e.clone()), k),
        }
    }

    pub fn derivative(&self, i: usize) -> Expr<T> {
        match self {
            Expr::Poly(p) => Expr::Poly(p.derivative(i)),
            Expr::Sum(items) => items
                .iter()
                .fold(Expr::zero(), |acc, e| acc.add(&e.derivative(i))),
            Expr::Prod(items) => {
                let mut acc = Expr::zero();
                for k in 0..items.len() {
                    let dk = items[k].derivative(i);
                    if dk.is_zero() {
                        continue;
                    }
                    let mut term = dk;
                    for (j, f) in items.iter().enumerate() {
                        if j != k {
                            term = term.mul(f);
                        }
                    }
                    acc = acc.add(&term);
                }
                acc
            }
            Expr::Apply(f, arg) => {
                let da = arg.derivative(i);
                if da.is_zero() {
                    return Expr::zero();
                }
                let outer = match f {
                    Func::Sin => Expr::apply(Func::Cos, (**arg).clone()),
                    Func::Cos => Expr::apply(Func::Sin, (**arg).clone()).neg(),
                    Func::Exp => self.clone(),
                    Func::Ln => arg.powi(-1),
                };
                outer.mul(&da)
            }
            Expr::Powi(base, k) => {
                let db = base.derivative(i);
                if db.is_zero() {
                    return Expr::zero();
                }
                Expr::constant(T::from_int(*k as i64))
                    .mul(&base.powi(k - 1))
                    .mul(&db)
            }
        }
    }

    pub fn map_coeffs<U: Scalar>(&self, f: &impl Fn(&T) -> U) -> Expr<U> {
        match self {
            Expr::Poly(p) => Expr::Poly(p.map_coeffs(f)),
            Expr::Sum(v) => Expr::Sum(v.iter().map(|e| e.map_coeffs(f)).collect()),
            Expr::Prod(v) => Expr::Prod(v.iter().map(|e| e.map_coeffs(f)).collect()),
            Expr::Apply(g, a) => Expr::Apply(*g, Box::new(a.map_coeffs(f))),
            Expr::Powi(b, k) => Expr::Powi(Box::new(b.map_coeffs(f)), *k),
        }
    }

    /// Number of leading variables the expression can depend on.
    /// Replaces `x_i` by the polynomial `subs[i]`.
    pub fn substitute(&self, subs: &[Polynomial<T>]) -> Expr<T> {
        match self {
            Expr::Poly(p) => Expr::Poly(p.substitute(subs)),
            Expr::Sum(v) => Expr::Sum(v.iter().map(|e| e.substitute(subs)).collect()),
            Expr::Prod(v) => Expr::Prod(v.iter().map(|e| e.substitute(subs)).collect()),
            Expr::Apply(f, a) => Expr::Apply(*f, Box::new(a.substitute(subs))),
            Expr::Powi(a, k) => Expr::Powi(Box::new(a.substitute(subs)), *k),
        }
    }

    pub fn nvars(&self) -> usize {
        match self {
            Expr::Poly(p) => p.nvars(),
            Expr::Sum(v) | Expr::Prod(v) => v.iter().map(Expr::nvars).max().unwrap_or(0),
            Expr::Apply(_, a) | Expr::Powi(a, _) => a.nvars(),
        }
    }
}

impl Expr<Rational> {
    pub fn to_real<R: Scalar>(&self) -> Expr<R> {
        self.map_coeffs(&R::from_rational)
    }
}

impl<R: Real> Expr<R> {
    pub fn eval(&self, x: &[R]) -> R {
        match self {
            Expr::Poly(p) => p.eval(x),
            Expr::Sum(v) => v.iter().fold(R::zero(), |a, e| a + e.eval(x)),
            Expr::Prod(v) => v.iter().fold(R::one(), |a, e| a * e.eval(x)),
            Expr::Apply(f, a) => {
                let v = a.eval(x);
                match f {
                    Func::Sin => v.sin(),
                    Func::Cos => v.cos(),
                    Func::Exp => v.exp(),
                    Func::Ln => v.ln(),
                }
            }
            Expr::Powi(b, k) => nalgebra::ComplexField::powi(b.eval(x), *k),
        }
    }
}

fn needs_parens<T: Scalar>(p: &Polynomial<T>) -> bool {
    p.num_terms() > 1 || p.terms().any(|(m, c)| !m.is_empty() && c != &T::one())
}

impl<T: Scalar + CoeffFmt> fmt::Display for Expr<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Expr::Poly(p) => write!(f, "{p}"),
            Expr::Sum(v) => {
                for (k, e) in v.iter().enumerate() {
                    if k > 0 {
                        f.write_str(" + ")?;
                    }
                    write!(f, "{e}")?;
                }
                Ok(())
            }
            Expr::Prod(v) => {
                for (k, e) in v.iter().enumerate() {
                    if k > 0 {
                        f.write_str("*")?;
                    }
                    match e {
                        Expr::Poly(p) if needs_parens(p) => write!(f, "({p})")?,
                        Expr::Sum(_) => write!(f, "({e})")?,
                        _ => write!(f, "{e}")?,
                    }
                }
                Ok(())
            }
            Expr::Apply(g, a) => write!(f, "{}({a})", g.name()),
            Expr::Powi(b, k) => write!(f, "({b})^{k}"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;

    #[test]
    fn polynomial_folding() {
        let x: Expr<Rational> = Polynomial::var(0).into();
        let e = x.mul(&x).add(&Expr::constant(q(1, 2)));
        assert!(e.as_poly().is_some());
    }

    #[test]
    fn chain_rule() {
        let x: Expr<Rational> = Polynomial::var(0).into();
        let s = Expr::apply(Func::Sin, x.mul(&x));
        let d = s.derivative(0).to_real::<f64>();
        let v = d.eval(&[0.7]);
        assert!((v - 2.0 * 0.7 * (0.49f64).cos()).abs() < 1e-14);
        let l = Expr::apply(Func::Ln, x.add(&Expr::one())).derivative(0).to_real::<f64>();
        assert!((l.eval(&[1.0]) - 0.5).abs() < 1e-14);
    }
}
