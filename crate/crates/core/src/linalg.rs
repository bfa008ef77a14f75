//! Small dense and exact linear-algebra helpers.

use std::collections::BTreeMap;

use nalgebra::{DMatrix, DVector};
use num_traits::{One, Zero};

use crate::poly::Monomial;
use crate::scalar::{Rational, Real};
use crate::vectorfield::PolyVectorField;

/// Singular values in decreasing order.
pub fn singular_values<R: Real>(m: &DMatrix<R>) -> Vec<R> {
    if m.nrows() == 0 || m.ncols() == 0 {
        return Vec::new();
    }
    let mut s: Vec<R> = m.clone().svd(false, false).singular_values.iter().copied().collect();
    s.sort_by(|a, b| b.partial_cmp(a).unwrap_or(std::cmp::Ordering::Equal));
    s
}

#[derive(Debug, Clone, PartialEq)]
pub struct NumericRank<R> {
    pub rank: usize,
    /// Smallest singular value counted in the rank (`None` when rank is 0).
    pub smallest_retained: Option<R>,
    /// Absolute threshold that was applied.
    pub threshold: R,
}

/// Rank with singular values above `rel_tol · σ_max`.
pub fn numeric_rank<R: Real>(m: &DMatrix<R>, rel_tol: R) -> NumericRank<R> {
    let s = singular_values(m);
    let smax = s.first().copied().unwrap_or(R::zero());
    let threshold = rel_tol * smax;
    if smax == R::zero() {
        return NumericRank {
            rank: 0,
            smallest_retained: None,
            threshold,
        };
    }
    let kept: Vec<R> = s.into_iter().filter(|v| *v > threshold).collect();
    NumericRank {
        rank: kept.len(),
        smallest_retained: kept.last().copied(),
        threshold,
    }
}

/// Tikhonov-damped least squares `argmin |Ax − b|² + (damp·σ_max)²|x|²`.
pub fn damped_solve<R: Real>(a: &DMatrix<R>, b: &DVector<R>, damp: R) -> DVector<R> {
    let svd = a.clone().svd(true, true);
    let smax = svd
        .singular_values
        .iter()
        .copied()
        .fold(R::zero(), |m, v| if v > m { v } else { m });
    let mut out = DVector::zeros(a.ncols());
    if smax == R::zero() {
        return out;
    }
    let alpha = damp * smax * damp * smax;
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    for (k, &s) in svd.singular_values.iter().enumerate() {
        let coef = u.column(k).dot(b) * s / (s * s + alpha);
        for j in 0..a.ncols() {
            out[j] += coef * vt[(k, j)];
        }
    }
    out
}

/// Minimum-norm least-squares solution of `A c = b`; singular values below
/// `rel_cut · σ_max` are treated as zero.
pub fn min_norm_solve<R: Real>(a: &DMatrix<R>, b: &DVector<R>, rel_cut: R) -> DVector<R> {
    let svd = a.clone().svd(true, true);
    let smax = svd
        .singular_values
        .iter()
        .copied()
        .fold(R::zero(), |m, v| if v > m { v } else { m });
    if smax == R::zero() {
        return DVector::zeros(a.ncols());
    }
    let eps = rel_cut * smax;
    let u = svd.u.as_ref().unwrap();
    let vt = svd.v_t.as_ref().unwrap();
    let mut out = DVector::zeros(a.ncols());
    for (k, &s) in svd.singular_values.iter().enumerate() {
        if s <= eps {
            continue;
        }
        let coef = u.column(k).dot(b) / s;
        for j in 0..a.ncols() {
            out[j] += coef * vt[(k, j)];
        }
    }
    out
}

/// Orthonormal basis of the kernel of `a` (columns with singular value below
/// `rel_cut · σ_max`, plus the trailing directions when `a` is wide).
pub fn kernel_basis<R: Real>(a: &DMatrix<R>, rel_cut: R) -> Vec<DVector<R>> {
    let m = a.ncols();
    // Work with AᵀA (m×m) so the full right-singular basis is available.
    let ata = a.transpose() * a;
    let eig = ata.symmetric_eigen();
    let lmax = eig
        .eigenvalues
        .iter()
        .copied()
        .fold(R::zero(), |acc, v| if v > acc { v } else { acc });
    let cut = rel_cut * rel_cut * lmax;
    (0..m)
        .filter(|&k| eig.eigenvalues[k] <= cut)
        .map(|k| eig.eigenvectors.column(k).into_owned())
        .collect()
}

/// Exact incremental row echelon form over ℚ for sparse vectors keyed by
/// arbitrary ordered coordinates.
#[derive(Debug, Clone, Default)]
pub struct ExactSpan<K: Ord + Clone> {
    basis: Vec<(K, BTreeMap<K, Rational>)>,
}

impl<K: Ord + Clone> ExactSpan<K> {
    pub fn new() -> Self {
        ExactSpan { basis: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    fn reduce(&self, mut v: BTreeMap<K, Rational>) -> BTreeMap<K, Rational> {
        for (pivot, b) in &self.basis {
            let Some(c) = v.get(pivot).cloned() else {
                continue;
            };
            let f = c / &b[pivot];
            for (k, bv) in b {
                let nv = v.get(k).cloned().unwrap_or_else(Rational::zero) - &f * bv;
                if nv.is_zero() {
                    v.remove(k);
                } else {
                    v.insert(k.clone(), nv);
                }
            }
        }
        v
    }

    pub fn contains(&self, v: &BTreeMap<K, Rational>) -> bool {
        self.reduce(v.clone()).is_empty()
    }

    /// Adds `v`; returns whether it was independent of the current span.
    pub fn insert(&mut self, v: BTreeMap<K, Rational>) -> bool {
        let r = self.reduce(v);
        match r.keys().next().cloned() {
            None => false,
            Some(p) => {
                self.basis.push((p, r));
                true
            }
        }
    }
}

/// Coordinates of a polynomial field in the monomial basis.
pub fn field_coordinates(f: &PolyVectorField<Rational>) -> BTreeMap<(usize, Monomial), Rational> {
    let mut out = BTreeMap::new();
    for (j, p) in f.components().iter().enumerate() {
        for (m, c) in p.terms() {
            out.insert((j, m.clone()), c.clone());
        }
    }
    out
}

/// Exact inverse of a square rational matrix (`None` if singular).
pub fn invert_exact(a: &[Vec<Rational>]) -> Option<Vec<Vec<Rational>>> {
    let n = a.len();
    let mut m: Vec<Vec<Rational>> = a
        .iter()
        .enumerate()
        .map(|(i, row)| {
            let mut r = row.clone();
            r.extend((0..n).map(|j| if i == j { Rational::one() } else { Rational::zero() }));
            r
        })
        .collect();
    for col in 0..n {
        let piv = (col..n).find(|&r| !m[r][col].is_zero())?;
        m.swap(col, piv);
        let p = m[col][col].clone();
        for v in m[col].iter_mut() {
            *v = &*v / &p;
        }
        for r in 0..n {
            if r != col && !m[r][col].is_zero() {
                let f = m[r][col].clone();
                let pivot_row = m[col].clone();
                for (v, pv) in m[r].iter_mut().zip(&pivot_row) {
                    *v = &*v - &f * pv;
                }
            }
        }
    }
    Some(m.into_iter().map(|r| r[n..].to_vec()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scalar::q;

    #[test]
    fn min_norm_of_redundant_frame() {
        let a = DMatrix::<f64>::from_row_slice(1, 2, &[1.0, 1.0]);
        let b = DVector::from_vec(vec![1.0]);
        let c = min_norm_solve(&a, &b, 1e-12);
        assert!((c[0] - 0.5).abs() < 1e-14 && (c[1] - 0.5).abs() < 1e-14);
        let k = kernel_basis(&a, 1e-9);
        assert_eq!(k.len(), 1);
        assert!((k[0][0] + k[0][1]).abs() < 1e-12);
    }

    #[test]
    fn exact_span() {
        let mut s: ExactSpan<usize> = ExactSpan::new();
        let v = |a: i64, b: i64| {
            let mut m = BTreeMap::new();
            if a != 0 {
                m.insert(0, q(a, 1));
            }
            if b != 0 {
                m.insert(1, q(b, 1));
            }
            m
        };
        assert!(s.insert(v(1, 2)));
        assert!(!s.insert(v(2, 4)));
        assert!(s.insert(v(0, 1)));
        assert!(s.contains(&v(5, -3)));
        assert_eq!(s.dim(), 2);
    }

    #[test]
    fn exact_inverse() {
        let a = vec![vec![q(2, 1), q(1, 1)], vec![q(1, 1), q(1, 1)]];
        let inv = invert_exact(&a).unwrap();
        assert_eq!(inv, vec![vec![q(1, 1), q(-1, 1)], vec![q(-1, 1), q(2, 1)]]);
        assert!(invert_exact(&[vec![q(1, 1), q(2, 1)], vec![q(2, 1), q(4, 1)]]).is_none());
    }
}
