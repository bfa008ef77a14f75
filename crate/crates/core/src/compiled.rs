//! Flat `f64` evaluators for frames and their Jacobians, used in the inner
//! loops of the numerical solvers.

use crate::expr::Expr;
use crate::poly::Polynomial;
use crate::scalar::Rational;
use crate::structure::SubRiemannianStructure;
use crate::vectorfield::VectorField;

#[derive(Debug, Clone)]
enum Comp {
    Zero,
    /// Terms `c · Π x_v^e`.
    Poly(Vec<(f64, Vec<(usize, i32)>)>),
    Expr(Expr<f64>),
}

impl Comp {
    fn from_poly(p: &Polynomial<Rational>) -> Self {
        if p.is_zero() {
            return Comp::Zero;
        }
        let terms = p
            .terms()
            .map(|(m, c)| {
                let vars = m
                    .exponents()
                    .iter()
                    .enumerate()
                    .filter(|(_, &e)| e > 0)
                    .map(|(v, &e)| (v, e as i32))
                    .collect();
                (crate::scalar::Scalar::from_rational(c), vars)
            })
            .collect();
        Comp::Poly(terms)
    }

    fn from_expr(e: &Expr<Rational>) -> Self {
        match e.as_poly() {
            Some(p) => Self::from_poly(&p),
            None => Comp::Expr(e.to_real()),
        }
    }

    #[inline]
    fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Comp::Zero => 0.0,
            Comp::Poly(terms) => terms
                .iter()
                .map(|(c, vars)| vars.iter().fold(*c, |a, &(v, e)| a * x[v].powi(e)))
                .sum(),
            Comp::Expr(e) => e.eval(x),
        }
    }
}

/// A scalar function and its gradient compiled for fast evaluation.
#[derive(Debug, Clone)]
pub struct CompiledFunction {
    value: Comp,
    gradient: Vec<Comp>,
}

impl CompiledFunction {
    pub fn new(f: &Expr<Rational>, dim: usize) -> Self {
        CompiledFunction {
            value: Comp::from_expr(f),
            gradient: (0..dim).map(|j| Comp::from_expr(&f.derivative(j))).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        self.value.eval(x)
    }

    pub fn gradient(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.gradient) {
            *o = c.eval(x);
        }
    }
}

/// A frame `X_1..X_m` on `ℝⁿ` compiled for fast evaluation.
#[derive(Debug, Clone)]
pub struct CompiledFrame {
    n: usize,
    m: usize,
    /// `vals[i*n + a] = (X_i)_a`.
    vals: Vec<Comp>,
    /// `jac[(i*n + a)*n + b] = ∂_b (X_i)_a`.
    jac: Vec<Comp>,
}

impl CompiledFrame {
    pub fn new(frame: &[VectorField<Rational>]) -> Self {
        let m = frame.len();
        let n = frame.first().map_or(0, VectorField::dim);
        let mut vals = Vec::with_capacity(m * n);
        let mut jac = Vec::with_capacity(m * n * n);
        for f in frame {
            for c in f.components() {
                vals.push(Comp::from_expr(c));
                for b in 0..n {
                    jac.push(Comp::from_expr(&c.derivative(b)));
                }
            }
        }
        CompiledFrame { n, m, vals, jac }
    }

    pub fn of(s: &SubRiemannianStructure) -> Self {
        Self::new(s.frame())
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn rank(&self) -> usize {
        self.m
    }

    /// Writes all field values (`m·n`, field-major).
    pub fn values(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.vals) {
            *o = c.eval(x);
        }
    }

    /// Writes all Jacobians (`m·n·n`).
    pub fn jacobians(&self, x: &[f64], out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.jac) {
            *o = c.eval(x);
        }
    }

    pub fn field(&self, i: usize, x: &[f64], out: &mut [f64]) {
        for a in 0..self.n {
            out[a] = self.vals[i * self.n + a].eval(x);
        }
    }

    /// `Σ c_i X_i(x)`.
    pub fn combine(&self, x: &[f64], c: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &ci) in c.iter().enumerate() {
            if ci == 0.0 {
                continue;
            }
            for a in 0..self.n {
                out[a] += ci * self.vals[i * self.n + a].eval(x);
            }
        }
    }

    /// Divergence `Σ_a ∂_a (X_i)_a` of field `i`.
    pub fn euclidean_divergence(&self, i: usize, x: &[f64]) -> f64 {
        (0..self.n)
            .map(|a| self.jac[(i * self.n + a) * self.n + a].eval(x))
            .sum()
    }
}
