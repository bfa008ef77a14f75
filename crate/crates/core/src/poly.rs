//! Sparse multivariate polynomials over a [`Scalar`] ring.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_traits::{One, Signed, Zero};

use crate::scalar::{Rational, Scalar};

/// Exponent multi-index. Trailing zeros are never stored, so the constant
/// monomial is the empty vector and polynomials in different numbers of
/// variables compare consistently.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Monomial(Vec<u32>);

impl Monomial {
    pub fn new(mut exps: Vec<u32>) -> Self {
        while exps.last() == Some(&0) {
            exps.pop();
        }
        Monomial(exps)
    }

    pub fn one() -> Self {
        Monomial(Vec::new())
    }

    pub fn var(i: usize) -> Self {
        let mut e = vec![0; i + 1];
        e[i] = 1;
        Monomial(e)
    }

    pub fn exponent(&self, i: usize) -> u32 {
        self.0.get(i).copied().unwrap_or(0)
    }

    pub fn exponents(&self) -> &[u32] {
        &self.0
    }

    /// Number of leading variables this monomial can depend on.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Weighted degree `Σ w_k α_k`.
    pub fn weighted_degree(&self, weights: &[u32]) -> i64 {
        self.0
            .iter()
            .zip(weights)
            .map(|(&a, &w)| a as i64 * w as i64)
            .sum()
    }

    pub fn mul(&self, other: &Monomial) -> Monomial {
        let n = self.0.len().max(other.0.len());
        let e = (0..n)
            .map(|i| self.exponent(i) + other.exponent(i))
            .collect();
        Monomial(e)
    }

    fn with_exponent(&self, i: usize, e: u32) -> Monomial {
        let mut v = self.0.clone();
        if v.len() <= i {
            v.resize(i + 1, 0);
        }
        v[i] = e;
        Monomial::new(v)
    }

    pub fn eval<T: Scalar>(&self, x: &[T]) -> T {
        let mut acc = T::one();
        for (i, &e) in self.0.iter().enumerate() {
            if e > 0 {
                acc = acc * x[i].powi(e);
            }
        }
        acc
    }
}

impl fmt::Display for Monomial {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (i, &e) in self.0.iter().enumerate() {
            if e == 0 {
                continue;
            }
            if !first {
                f.write_str("*")?;
            }
            first = false;
            write!(f, "x{}", i + 1)?;
            if e > 1 {
                write!(f, "^{e}")?;
            }
        }
        if first {
            f.write_str("1")?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Polynomial<T> {
    terms: BTreeMap<Monomial, T>,
}

impl<T: Scalar> Default for Polynomial<T> {
    fn default() -> Self {
        Self::zero()
    }
}

impl<T: Scalar> Polynomial<T> {
    pub fn zero() -> Self {
        Polynomial {
            terms: BTreeMap::new(),
        }
    }

    pub fn constant(c: T) -> Self {
        Self::term(Monomial::one(), c)
    }

    pub fn var(i: usize) -> Self {
        Self::term(Monomial::var(i), T::one())
    }

    pub fn term(m: Monomial, c: T) -> Self {
        let mut terms = BTreeMap::new();
        if !c.is_zero() {
            terms.insert(m, c);
        }
        Polynomial { terms }
    }

    pub fn from_terms(iter: impl IntoIterator<Item = (Monomial, T)>) -> Self {
        let mut p = Self::zero();
        for (m, c) in iter {
            p.add_term(m, c);
        }
        p
    }

    pub fn add_term(&mut self, m: Monomial, c: T) {
        if c.is_zero() {
            return;
        }
        match self.terms.remove(&m) {
            Some(old) => {
                let s = old + c;
                if !s.is_zero() {
                    self.terms.insert(m, s);
                }
            }
            None => {
                self.terms.insert(m, c);
            }
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&Monomial, &T)> {
        self.terms.iter()
    }

    pub fn num_terms(&self) -> usize {
        self.terms.len()
    }

    pub fn coefficient(&self, m: &Monomial) -> Option<&T> {
        self.terms.get(m)
    }

    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Smallest `n` such that the polynomial only involves `x_1..x_n`.
    pub fn nvars(&self) -> usize {
        self.terms.keys().map(Monomial::len).max().unwrap_or(0)
    }

    pub fn degree(&self) -> Option<u32> {
        self.terms.keys().map(Monomial::degree).max()
    }

    pub fn constant_value(&self) -> Option<T> {
        match self.terms.len() {
            0 => Some(T::zero()),
            1 => self.terms.get(&Monomial::one()).cloned(),
            _ => None,
        }
    }

    pub fn scale(&self, c: &T) -> Self {
        Self::from_terms(self.terms.iter().map(|(m, v)| (m.clone(), v.clone() * c.clone())))
    }

    pub fn derivative(&self, i: usize) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(i);
            if e == 0 {
                continue;
            }
            out.add_term(m.with_exponent(i, e - 1), c.clone() * T::from_int(e as i64));
        }
        out
    }

    /// Antiderivative in `x_i` vanishing on `x_i = 0`.
    pub fn integrate(&self, i: usize) -> Self {
        let mut out = Self::zero();
        for (m, c) in &self.terms {
            let e = m.exponent(i) + 1;
            let inv = T::from_rational(&Rational::new(1.into(), (e as i64).into()));
            out.add_term(m.with_exponent(i, e), c.clone() * inv);
        }
        out
    }

    pub fn eval(&self, x: &[T]) -> T {
        assert!(
            self.nvars() <= x.len(),
            "polynomial in {} variables evaluated at a point of dimension {}",
            self.nvars(),
            x.len()
        );
        self.terms
            .iter()
            .fold(T::zero(), |acc, (m, c)| acc + c.clone() * m.eval(x))
    }

    pub fn map_coeffs<U: Scalar>(&self, f: impl Fn(&T) -> U) -> Polynomial<U> {
        Polynomial::from_terms(self.terms.iter().map(|(m, c)| (m.clone(), f(c))))
    }

    /// Replaces `x_i` by `subs[i]`.
    pub fn substitute(&self, subs: &[Polynomial<T>]) -> Polynomial<T> {
        let mut out = Polynomial::zero();
        for (m, c) in &self.terms {
            let mut t = Polynomial::constant(c.clone());
            for (i, &e) in m.exponents().iter().enumerate() {
                for _ in 0..e {
                    t = &t * &subs[i];
                }
            }
            out = out + t;
        }
        out
    }

    /// Largest weighted degree among the terms.
    pub fn weighted_degree(&self, weights: &[u32]) -> Option<i64> {
        self.terms.keys().map(|m| m.weighted_degree(weights)).max()
    }
}

impl Polynomial<Rational> {
    pub fn to_real<R: Scalar>(&self) -> Polynomial<R> {
        self.map_coeffs(R::from_rational)
    }
}

impl<T: Scalar> Zero for Polynomial<T> {
    fn zero() -> Self {
        Polynomial::zero()
    }

    fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }
}

impl<T: Scalar> One for Polynomial<T> {
    fn one() -> Self {
        Polynomial::constant(T::one())
    }
}

impl<'a, T: Scalar> Add<&'a Polynomial<T>> for &'a Polynomial<T> {
    type Output = Polynomial<T>;
    fn add(self, rhs: &Polynomial<T>) -> Polynomial<T> {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), c.clone());
        }
        out
    }
}

impl<'a, T: Scalar> Sub<&'a Polynomial<T>> for &'a Polynomial<T> {
    type Output = Polynomial<T>;
    fn sub(self, rhs: &Polynomial<T>) -> Polynomial<T> {
        let mut out = self.clone();
        for (m, c) in &rhs.terms {
            out.add_term(m.clone(), -c.clone());
        }
        out
    }
}

impl<'a, T: Scalar> Mul<&'a Polynomial<T>> for &'a Polynomial<T> {
    type Output = Polynomial<T>;
    fn mul(self, rhs: &Polynomial<T>) -> Polynomial<T> {
        let mut out = Polynomial::zero();
        for (ma, ca) in &self.terms {
            for (mb, cb) in &rhs.terms {
                out.add_term(ma.mul(mb), ca.clone() * cb.clone());
            }
        }
        out
    }
}

impl<T: Scalar> Add for Polynomial<T> {
    type Output = Polynomial<T>;
    fn add(self, rhs: Self) -> Self {
        &self + &rhs
    }
}

impl<T: Scalar> Sub for Polynomial<T> {
    type Output = Polynomial<T>;
    fn sub(self, rhs: Self) -> Self {
        &self - &rhs
    }
}

impl<T: Scalar> Mul for Polynomial<T> {
    type Output = Polynomial<T>;
    fn mul(self, rhs: Self) -> Self {
        &self * &rhs
    }
}

impl<T: Scalar> Neg for Polynomial<T> {
    type Output = Polynomial<T>;
    fn neg(self) -> Self {
        Polynomial {
            terms: self.terms.into_iter().map(|(m, c)| (m, -c)).collect(),
        }
    }
}

impl<T: Scalar> Neg for &Polynomial<T> {
    type Output = Polynomial<T>;
    fn neg(self) -> Polynomial<T> {
        -(self.clone())
    }
}

/// Polynomials are themselves a scalar ring; this lets group laws and flows be
/// evaluated with symbolic inputs.
impl<T: Scalar> Scalar for Polynomial<T> {
    fn from_rational(q: &Rational) -> Self {
        Polynomial::constant(T::from_rational(q))
    }
}

/// Coefficient formatting for the text grammar.
pub trait CoeffFmt {
    fn is_negative(&self) -> bool;
    fn abs_string(&self) -> String;
    fn is_unit(&self) -> bool;
}

impl CoeffFmt for Rational {
    fn is_negative(&self) -> bool {
        Signed::is_negative(self)
    }
    fn abs_string(&self) -> String {
        let a = Signed::abs(self);
        if a.is_integer() {
            a.numer().to_string()
        } else {
            format!("{}/{}", a.numer(), a.denom())
        }
    }
    fn is_unit(&self) -> bool {
        Signed::abs(self).is_one()
    }
}

impl CoeffFmt for f64 {
    fn is_negative(&self) -> bool {
        *self < 0.0
    }
    fn abs_string(&self) -> String {
        format!("{:?}", self.abs())
    }
    fn is_unit(&self) -> bool {
        self.abs() == 1.0
    }
}

/// Writes `c*m` (sign excluded) in the grammar, optionally followed by `suffix`.
pub(crate) fn fmt_term<T: CoeffFmt>(c: &T, m: &Monomial, suffix: Option<&str>) -> String {
    let mut parts = Vec::new();
    if !c.is_unit() || (m.is_empty() && suffix.is_none()) {
        parts.push(c.abs_string());
    }
    if !m.is_empty() {
        parts.push(m.to_string());
    }
    if let Some(s) = suffix {
        parts.push(s.to_string());
    }
    parts.join("*")
}

impl<T: Scalar + CoeffFmt> fmt::Display for Polynomial<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.terms.is_empty() {
            return f.write_str("0");
        }
        for (k, (m, c)) in self.terms.iter().enumerate() {
            let neg = c.is_negative();
            match (k, neg) {
                (0, true) => f.write_str("-")?,
                (0, false) => {}
                (_, true) => f.write_str(" - ")?,
                (_, false) => f.write_str(" + ")?,
            }
            f.write_str(&fmt_term(c, m, None))?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;

    type P = Polynomial<Rational>;

    #[test]
    fn zero_coefficients_are_dropped() {
        let x = P::var(0);
        let d = &x - &x;
        assert!(d.is_zero());
        assert_eq!(d.num_terms(), 0);
    }

    #[test]
    fn product_and_derivative() {
        let x = P::var(0);
        let y = P::var(1);
        let p = &(&x * &x) * &y; // x1^2 x2
        assert_eq!(p.derivative(0), (&x * &y).scale(&q(2, 1)));
        assert_eq!(p.derivative(2), P::zero());
        assert_eq!(p.eval(&[q(1, 2), q(3, 1)]), q(3, 4));
    }

    #[test]
    fn integrate_inverts_derivative() {
        let p = P::from_terms([
            (Monomial::new(vec![2, 1]), q(3, 1)),
            (Monomial::new(vec![0, 0, 1]), q(-1, 2)),
        ]);
        assert_eq!(p.integrate(0).derivative(0), p);
    }

    #[test]
    fn substitution() {
        // (x1 + x2)^2 with x1 -> t, x2 -> 2t
        let x = P::var(0);
        let y = P::var(1);
        let s = &x + &y;
        let p = &s * &s;
        let t = P::var(0);
        let r = p.substitute(&[t.clone(), t.scale(&q(2, 1))]);
        assert_eq!(r, (&t * &t).scale(&q(9, 1)));
    }

    #[test]
    fn display() {
        let p = P::from_terms([
            (Monomial::new(vec![0, 1]), q(-1, 2)),
            (Monomial::new(vec![2]), q(1, 1)),
            (Monomial::one(), q(3, 1)),
        ]);
        assert_eq!(p.to_string(), "3 - 1/2*x2 + x1^2");
    }
}
