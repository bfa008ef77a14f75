//! Weighted gradings in privileged coordinates: nonholonomic orders,
//! homogeneous decomposition, truncation to the nilpotent approximation,
//! dilations and remainder rescaling.

use std::collections::BTreeMap;

use num_traits::{One, Zero};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::poly::{Monomial, Polynomial};
use crate::scalar::{Rational, Real, Scalar};
use crate::structure::{growth_vector, point_flag, FlagOptions, SubRiemannianStructure};
use crate::vectorfield::{lie_bracket, PolyVectorField};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Grading {
    weights: Vec<u32>,
}

impl Grading {
    /// Requires `w_1 = 1 ≤ w_2 ≤ … ≤ w_n`.
    pub fn new(weights: Vec<u32>) -> Result<Self> {
        if weights.first() != Some(&1) {
            return Err(Error::invalid("a grading starts with weight 1"));
        }
        if weights.windows(2).any(|w| w[0] > w[1]) {
            return Err(Error::invalid("grading weights must be non-decreasing"));
        }
        Ok(Grading { weights })
    }

    /// Weights of the bracket flag of `s` at the origin.
    pub fn at_origin(s: &SubRiemannianStructure) -> Result<Self> {
        let f = point_flag(s, &vec![0.0; s.dim()], &FlagOptions::default())?;
        Self::new(f.weights)
    }

    pub fn weights(&self) -> &[u32] {
        &self.weights
    }

    pub fn dim(&self) -> usize {
        self.weights.len()
    }

    pub fn weight(&self, j: usize) -> u32 {
        self.weights[j]
    }

    pub fn homogeneous_dimension(&self) -> u32 {
        self.weights.iter().sum()
    }

    pub fn step(&self) -> u32 {
        *self.weights.last().unwrap()
    }
}

/// Order of `x^α ∂_j`: `Σ w_k α_k − w_j`.
pub fn monomial_field_order(m: &Monomial, j: usize, g: &Grading) -> i64 {
    m.weighted_degree(g.weights()) - g.weight(j) as i64
}

fn check_dim<T>(x: &PolyVectorField<T>, g: &Grading) -> Result<()>
where
    T: Scalar,
{
    if x.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: x.dim(),
        });
    }
    Ok(())
}

/// Splits `x` into weighted-homogeneous parts, sorted by increasing order.
pub fn homogeneous_decompose<T: Scalar>(
    x: &PolyVectorField<T>,
    g: &Grading,
) -> Result<Vec<(i64, PolyVectorField<T>)>> {
    check_dim(x, g)?;
    let n = x.dim();
    let mut parts: BTreeMap<i64, Vec<Polynomial<T>>> = BTreeMap::new();
    for (j, p) in x.components().iter().enumerate() {
        for (m, c) in p.terms() {
            let s = monomial_field_order(m, j, g);
            let comps = parts.entry(s).or_insert_with(|| vec![Polynomial::zero(); n]);
            comps[j].add_term(m.clone(), c.clone());
        }
    }
    Ok(parts
        .into_iter()
        .map(|(s, comps)| (s, PolyVectorField::new(comps)))
        .collect())
}

/// Least order among the monomials of `x` (`None` for the zero field).
pub fn field_order<T: Scalar>(x: &PolyVectorField<T>, g: &Grading) -> Result<Option<i64>> {
    Ok(homogeneous_decompose(x, g)?.first().map(|(s, _)| *s))
}

pub fn is_homogeneous<T: Scalar>(x: &PolyVectorField<T>, g: &Grading, order: i64) -> Result<bool> {
    let parts = homogeneous_decompose(x, g)?;
    Ok(parts.iter().all(|(s, _)| *s == order))
}

#[derive(Debug, Clone, PartialEq)]
pub struct NilpotentApprox {
    pub grading: Grading,
    pub truncated: Vec<PolyVectorField<Rational>>,
    pub remainders: Vec<PolyVectorField<Rational>>,
}

impl NilpotentApprox {
    pub fn homogeneous_dimension(&self) -> u32 {
        self.grading.homogeneous_dimension()
    }

    /// `X̂_i + R_i`.
    pub fn reconstruct(&self) -> Vec<PolyVectorField<Rational>> {
        self.truncated
            .iter()
            .zip(&self.remainders)
            .map(|(a, b)| a.add(b).expect("same dimension"))
            .collect()
    }

    pub fn structure(&self, name: impl Into<String>) -> Result<SubRiemannianStructure> {
        SubRiemannianStructure::from_poly(name, self.truncated.clone())
    }
}

/// Component `j` of a field may only involve variables of weight `< w_j`.
pub(crate) fn is_triangular<T: Scalar>(x: &PolyVectorField<T>, g: &Grading) -> bool {
    x.components().iter().enumerate().all(|(j, p)| {
        p.terms().all(|(m, _)| {
            m.exponents()
                .iter()
                .enumerate()
                .all(|(k, &a)| a == 0 || g.weight(k) < g.weight(j))
        })
    })
}

/// Keeps the order −1 part of every frame field.
pub fn truncate(s: &SubRiemannianStructure, g: &Grading) -> Result<NilpotentApprox> {
    let frame = s.poly_frame()?;
    let n = s.dim();
    let mut truncated = Vec::with_capacity(frame.len());
    let mut remainders = Vec::with_capacity(frame.len());
    for (i, x) in frame.iter().enumerate() {
        let mut head = PolyVectorField::zero(n);
        let mut rest = PolyVectorField::zero(n);
        for (order, part) in homogeneous_decompose(x, g)? {
            if order <= -2 {
                let (j, p) = part
                    .components()
                    .iter()
                    .enumerate()
                    .find(|(_, p)| !p.is_zero())
                    .expect("non-empty part");
                let (m, _) = p.terms().next().expect("non-empty component");
                return Err(Error::NotPrivileged {
                    field: i + 1,
                    monomial: format!("{}", field_monomial(m, j)),
                    order,
                });
            }
            if order == -1 {
                head = part;
            } else {
                rest = rest.add(&part)?;
            }
        }
        if !is_triangular(&head, g) {
            return Err(Error::invalid(format!(
                "truncated field X{} is not in triangular form",
                i + 1
            )));
        }
        truncated.push(head);
        remainders.push(rest);
    }
    Ok(NilpotentApprox {
        grading: g.clone(),
        truncated,
        remainders,
    })
}

fn field_monomial(m: &Monomial, j: usize) -> String {
    if m.is_empty() {
        format!("d{}", j + 1)
    } else {
        format!("{m}*d{}", j + 1)
    }
}

/// `δ_λ z = (λ^{w_1} z_1, …, λ^{w_n} z_n)`.
pub fn dilate<R: Real>(z: &[R], g: &Grading, lambda: R) -> Result<Vec<R>> {
    if !(lambda > R::zero()) {
        return Err(Error::invalid("dilation factor must be positive"));
    }
    if z.len() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: z.len(),
        });
    }
    Ok(z.iter()
        .zip(g.weights())
        .map(|(&c, &w)| c * Scalar::powi(&lambda, w))
        .collect())
}

/// Exact dilation of a rational point.
pub fn dilate_exact(z: &[Rational], g: &Grading, lambda: &Rational) -> Result<Vec<Rational>> {
    if *lambda <= Rational::zero() {
        return Err(Error::invalid("dilation factor must be positive"));
    }
    Ok(z.iter()
        .zip(g.weights())
        .map(|(c, &w)| c * Scalar::powi(lambda, w))
        .collect())
}

/// Volume Jacobian `λ^Q` of `δ_λ`.
pub fn dilation_jacobian<R: Real>(g: &Grading, lambda: R) -> R {
    Scalar::powi(&lambda, g.homogeneous_dimension())
}

/// Push-forward `(δ_λ)_* X`: a monomial of order `s` is multiplied by `λ^{−s}`.
pub fn dilate_field(
    x: &PolyVectorField<Rational>,
    g: &Grading,
    lambda: &Rational,
) -> Result<PolyVectorField<Rational>> {
    if *lambda <= Rational::zero() {
        return Err(Error::invalid("dilation factor must be positive"));
    }
    check_dim(x, g)?;
    let inv = Rational::one() / lambda;
    let comps = x
        .components()
        .iter()
        .enumerate()
        .map(|(j, p)| {
            Polynomial::from_terms(p.terms().map(|(m, c)| {
                let s = monomial_field_order(m, j, g);
                let f = if s <= 0 {
                    Scalar::powi(lambda, (-s) as u32)
                } else {
                    Scalar::powi(&inv, s as u32)
                };
                (m.clone(), c * f)
            }))
        })
        .collect();
    Ok(PolyVectorField::new(comps))
}

/// `Y^r = r·(δ_{1/r})_* X`: a monomial of order `s ≥ 0` is multiplied by
/// `r^{s+1}`.
pub fn remainder_rescale<T: Scalar + PartialOrd>(
    x: &PolyVectorField<T>,
    g: &Grading,
    r: &T,
) -> Result<PolyVectorField<T>> {
    if !(*r > T::zero()) {
        return Err(Error::invalid("scale must be positive"));
    }
    check_dim(x, g)?;
    let mut comps = Vec::with_capacity(x.dim());
    for (j, p) in x.components().iter().enumerate() {
        let mut out = Polynomial::zero();
        for (m, c) in p.terms() {
            let s = monomial_field_order(m, j, g);
            if s < 0 {
                return Err(Error::NotARemainder {
                    monomial: field_monomial(m, j),
                    order: s,
                });
            }
            out.add_term(m.clone(), c.clone() * r.powi((s + 1) as u32));
        }
        comps.push(out);
    }
    Ok(PolyVectorField::new(comps))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NilpotencyReport {
    pub step_bound: usize,
    pub nilpotent: bool,
    /// A non-vanishing bracket of length `step_bound + 1`.
    pub witness: Option<String>,
    pub growth_truncated: Option<Vec<usize>>,
    pub growth_original: Option<Vec<usize>>,
    pub growth_matches: bool,
    pub passed: bool,
}

fn word_name(word: &[usize]) -> String {
    match word {
        [i] => format!("X{}", i + 1),
        [i, rest @ ..] => format!("[X{},{}]", i + 1, word_name(rest)),
        [] => String::new(),
    }
}

/// Checks that every bracket of length `k + 1` of the truncated frame vanishes
/// and that the truncated and original growth vectors agree at the origin.
pub fn nilpotency_check(na: &NilpotentApprox, k: usize) -> Result<NilpotencyReport> {
    if k == 0 {
        return Err(Error::invalid("step bound must be at least 1"));
    }
    let m = na.truncated.len();
    let mut level: Vec<(Vec<usize>, PolyVectorField<Rational>)> = na
        .truncated
        .iter()
        .enumerate()
        .filter(|(_, f)| !f.is_zero())
        .map(|(i, f)| (vec![i], f.clone()))
        .collect();
    for _ in 0..k {
        let mut next = Vec::new();
        for i in 0..m {
            for (w, y) in &level {
                let b = lie_bracket(&na.truncated[i], y)?;
                if !b.is_zero() {
                    let mut word = vec![i];
                    word.extend_from_slice(w);
                    next.push((word, b));
                }
            }
        }
        level = next;
    }
    let witness = level.first().map(|(w, _)| word_name(w));
    let nilpotent = witness.is_none();

    let n = na.grading.dim();
    let zero = vec![0.0; n];
    let growth_of = |frame: Vec<PolyVectorField<Rational>>| -> Option<Vec<usize>> {
        let s = SubRiemannianStructure::from_poly("probe", frame).ok()?;
        growth_vector(&s, &zero, FlagOptions::default().rank_tol).ok()
    };
    let growth_truncated = growth_of(na.truncated.clone());
    let growth_original = growth_of(na.reconstruct());
    let growth_matches = growth_truncated.is_some() && growth_truncated == growth_original;
    Ok(NilpotencyReport {
        step_bound: k,
        nilpotent,
        witness,
        growth_truncated,
        growth_original,
        growth_matches,
        passed: nilpotent && growth_matches,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;
    use crate::parse::parse_field;
    use crate::scalar::q;

    fn field(s: &str, n: usize) -> PolyVectorField<Rational> {
        parse_field(s, n).unwrap().as_poly().unwrap()
    }

    #[test]
    fn orders() {
        let g = Grading::new(vec![1, 1, 2]).unwrap();
        assert_eq!(monomial_field_order(&Monomial::one(), 0, &g), -1);
        assert_eq!(monomial_field_order(&Monomial::var(1), 2, &g), -1);
        let g2 = Grading::new(vec![1, 2]).unwrap();
        assert_eq!(monomial_field_order(&Monomial::var(0), 1, &g2), -1);
        assert!(Grading::new(vec![2, 2]).is_err());
        assert!(Grading::new(vec![1, 2, 1]).is_err());
    }

    #[test]
    fn decompose() {
        let g = Grading::new(vec![1, 2]).unwrap();
        let x = field("d1 + x1^2*d2", 2);
        let parts = homogeneous_decompose(&x, &g).unwrap();
        assert_eq!(parts.len(), 2);
        assert_eq!(parts[0], (-1, field("d1", 2)));
        assert_eq!(parts[1], (0, field("x1^2*d2", 2)));
        assert!(homogeneous_decompose(&PolyVectorField::<Rational>::zero(2), &g)
            .unwrap()
            .is_empty());
    }

    #[test]
    fn truncations() {
        let g = Grading::new(vec![1, 1, 2]).unwrap();
        let na = truncate(&library::singruppo(), &g).unwrap();
        let h = library::heisenberg().poly_frame().unwrap();
        assert_eq!(na.truncated[..2], h[..]);
        assert!(na.truncated[2].is_zero());
        assert_eq!(na.remainders[2], field("x3^2*d3", 3));
        assert_eq!(field_order(&na.remainders[2], &g).unwrap(), Some(2));
        let gg = Grading::new(vec![1, 2]).unwrap();
        let na = truncate(&library::grushin(), &gg).unwrap();
        assert_eq!(na.truncated, library::grushin().poly_frame().unwrap());
    }

    #[test]
    fn not_privileged() {
        let g = Grading::new(vec![1, 2]).unwrap();
        let s = SubRiemannianStructure::from_poly("bad", vec![field("d1", 2), field("d2", 2)]).unwrap();
        match truncate(&s, &g) {
            Err(Error::NotPrivileged { field, order, .. }) => {
                assert_eq!(field, 2);
                assert_eq!(order, -2);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn rescaling() {
        let g = Grading::new(vec![1, 1, 2]).unwrap();
        let r = q(1, 3);
        let y = remainder_rescale(&field("x3^2*d3", 3), &g, &r).unwrap();
        assert_eq!(y, field("x3^2*d3", 3).scale(&q(1, 27)));
        let g2 = Grading::new(vec![1, 2]).unwrap();
        let y = remainder_rescale(&field("x1*d1", 2), &g2, &r).unwrap();
        assert_eq!(y, field("x1*d1", 2).scale(&r));
        assert!(matches!(
            remainder_rescale(&field("d1", 2), &g2, &r),
            Err(Error::NotARemainder { .. })
        ));
    }

    #[test]
    fn dilations() {
        let g = Grading::new(vec![1, 1, 2]).unwrap();
        let z = dilate(&[1.0, 1.0, 1.0], &g, 3.0).unwrap();
        assert_eq!(z, vec![3.0, 3.0, 9.0]);
        assert_eq!(dilate(&[0.2, 0.5, 0.7], &g, 1.0).unwrap(), vec![0.2, 0.5, 0.7]);
        assert_eq!(dilation_jacobian(&g, 2.0), 16.0);
        assert!(dilate(&[0.0; 3], &g, 0.0).is_err());
        let x = library::heisenberg().poly_frame().unwrap();
        let r = q(1, 5);
        for xi in &x {
            let d = dilate_field(xi, &g, &(Rational::one() / &r)).unwrap().scale(&r);
            assert_eq!(&d, xi);
        }
    }

    #[test]
    fn nilpotency() {
        let g = Grading::new(vec![1, 1, 2]).unwrap();
        let na = truncate(&library::singruppo(), &g).unwrap();
        let rep = nilpotency_check(&na, 2).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert_eq!(rep.growth_truncated, Some(vec![2, 3]));
        let rep1 = nilpotency_check(&na, 1).unwrap();
        assert!(!rep1.nilpotent);
        assert!(rep1.witness.is_some());
        let e = library::euclidean(3);
        let na = truncate(&e, &Grading::new(vec![1, 1, 1]).unwrap()).unwrap();
        assert!(nilpotency_check(&na, 1).unwrap().passed);
    }

    #[test]
    fn grading_from_flag() {
        assert_eq!(Grading::at_origin(&library::heisenberg()).unwrap().weights(), &[1, 1, 2]);
        assert_eq!(Grading::at_origin(&library::grushin()).unwrap().weights(), &[1, 2]);
    }
}
