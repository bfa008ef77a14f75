//! Sub-Riemannian structures given by a frame, and pointwise bracket-flag
//! analysis: growth vector, weights, step, homogeneous dimension and
//! regular/singular classification.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{field_coordinates, numeric_rank, ExactSpan};
use crate::scalar::{Rational, Real};
use crate::vectorfield::{PolyVectorField, VectorField, VolumeWeight};

#[derive(Debug, Clone)]
pub struct SubRiemannianStructure {
    pub name: String,
    dim: usize,
    frame: Vec<VectorField<Rational>>,
    pub volume_weight: VolumeWeight,
}

impl SubRiemannianStructure {
    pub fn new(
        name: impl Into<String>,
        frame: Vec<VectorField<Rational>>,
        volume_weight: VolumeWeight,
    ) -> Result<Self> {
        let Some(first) = frame.first() else {
            return Err(Error::invalid("a frame needs at least one field"));
        };
        let dim = first.dim();
        if dim == 0 {
            return Err(Error::invalid("ambient dimension must be positive"));
        }
        for f in &frame {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: f.dim(),
                });
            }
            let nv = f.components().iter().map(|e| e.nvars()).max().unwrap_or(0);
            if nv > dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: nv,
                });
            }
        }
        Ok(SubRiemannianStructure {
            name: name.into(),
            dim,
            frame,
            volume_weight,
        })
    }

    pub fn from_poly(
        name: impl Into<String>,
        frame: Vec<PolyVectorField<Rational>>,
    ) -> Result<Self> {
        Self::new(
            name,
            frame.into_iter().map(VectorField::from).collect(),
            VolumeWeight::One,
        )
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn rank(&self) -> usize {
        self.frame.len()
    }

    pub fn frame(&self) -> &[VectorField<Rational>] {
        &self.frame
    }

    pub fn is_polynomial(&self) -> bool {
        self.frame.iter().all(|f| f.as_poly().is_some())
    }

    pub fn poly_frame(&self) -> Result<Vec<PolyVectorField<Rational>>> {
        self.frame
            .iter()
            .map(|f| f.as_poly().ok_or(Error::NonPolynomial("this operation")))
            .collect()
    }

    pub fn numeric<R: Real>(&self) -> NumericFrame<R> {
        NumericFrame::new(&self.frame)
    }

    /// New frame `X'_i = Σ_j a_ij X_j` for a constant `m×m` matrix.
    pub fn recombine(&self, a: &[Vec<Rational>]) -> Result<Self> {
        let m = self.rank();
        if a.len() != m || a.iter().any(|r| r.len() != m) {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: a.len(),
            });
        }
        let frame = a
            .iter()
            .map(|row| {
                let comps = (0..self.dim)
                    .map(|k| {
                        row.iter()
                            .zip(&self.frame)
                            .fold(crate::expr::Expr::zero(), |acc, (c, f)| {
                                acc.add(&crate::expr::Expr::constant(c.clone()).mul(&f.components()[k]))
                            })
                    })
                    .collect();
                VectorField::new(comps)
            })
            .collect();
        Self::new(self.name.clone(), frame, self.volume_weight.clone())
    }

    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.rank() {
            return Err(Error::DimensionMismatch {
                expected: self.rank(),
                got: perm.len(),
            });
        }
        let frame = perm.iter().map(|&i| self.frame[i].clone()).collect();
        Self::new(self.name.clone(), frame, self.volume_weight.clone())
    }
}

/// A frame compiled to floating point, with the Jacobians of its fields.
#[derive(Debug, Clone)]
pub struct NumericFrame<R> {
    pub fields: Vec<VectorField<R>>,
    /// `jacobians[i][a][b] = ∂_b (X_i)_a`.
    pub jacobians: Vec<Vec<Vec<crate::expr::Expr<R>>>>,
}

impl<R: Real> NumericFrame<R> {
    pub fn new(frame: &[VectorField<Rational>]) -> Self {
        let fields = frame.iter().map(VectorField::to_real).collect();
        let jacobians = frame
            .iter()
            .map(|f| {
                let n = f.dim();
                f.components()
                    .iter()
                    .map(|c| (0..n).map(|b| c.derivative(b).to_real()).collect())
                    .collect()
            })
            .collect();
        NumericFrame { fields, jacobians }
    }

    pub fn dim(&self) -> usize {
        self.fields.first().map_or(0, VectorField::dim)
    }

    pub fn rank(&self) -> usize {
        self.fields.len()
    }

    /// `n × m` matrix whose columns are `X_i(x)`.
    pub fn matrix(&self, x: &[R]) -> DMatrix<R> {
        let n = self.dim();
        let mut m = DMatrix::zeros(n, self.rank());
        let mut col = vec![R::zero(); n];
        for (i, f) in self.fields.iter().enumerate() {
            f.eval_into(x, &mut col);
            for a in 0..n {
                m[(a, i)] = col[a];
            }
        }
        m
    }

    /// Writes `Σ c_i X_i(x)` into `out`.
    pub fn combine(&self, x: &[R], c: &[R], out: &mut [R]) {
        let n = self.dim();
        out.iter_mut().for_each(|o| *o = R::zero());
        let mut col = vec![R::zero(); n];
        for (f, &ci) in self.fields.iter().zip(c) {
            if ci == R::zero() {
                continue;
            }
            f.eval_into(x, &mut col);
            for a in 0..n {
                out[a] += ci * col[a];
            }
        }
    }
}

#[derive(Debug, Clone, Copy)]
pub struct FlagOptions {
    /// Relative singular-value threshold for numeric rank.
    pub rank_tol: f64,
    /// Maximal bracket length explored.
    pub depth_bound: usize,
    /// Radius of the neighbourhood sampled by regularity classification.
    pub regularity_radius: f64,
    pub regularity_samples: usize,
}

impl Default for FlagOptions {
    fn default() -> Self {
        FlagOptions {
            rank_tol: 1e-9,
            depth_bound: 6,
            regularity_radius: 0.05,
            regularity_samples: 16,
        }
    }
}

/// Brackets of the frame grouped by length. Each level only keeps brackets
/// that enlarge the span of all shorter ones (exactly, for polynomial frames).
#[derive(Debug, Clone)]
pub struct BracketTable {
    dim: usize,
    levels: Vec<Vec<VectorField<Rational>>>,
    numeric: Vec<Vec<VectorField<f64>>>,
}

impl BracketTable {
    pub fn new(s: &SubRiemannianStructure, depth_bound: usize) -> Result<Self> {
        let polynomial = s.is_polynomial();
        let mut span: ExactSpan<(usize, crate::poly::Monomial)> = ExactSpan::new();
        let mut seen: Vec<VectorField<Rational>> = Vec::new();
        let mut keep = |f: &VectorField<Rational>, span: &mut ExactSpan<_>| -> bool {
            if f.is_zero() {
                return false;
            }
            if polynomial {
                let p = f.as_poly().expect("polynomial frame");
                span.insert(field_coordinates(&p))
            } else {
                let neg = VectorField::new(f.components().iter().map(|e| e.neg()).collect());
                if seen.iter().any(|g| g == f || *g == neg) {
                    return false;
                }
                seen.push(f.clone());
                true
            }
        };
        let mut levels: Vec<Vec<VectorField<Rational>>> = Vec::new();
        let first: Vec<_> = s.frame().iter().filter(|f| keep(f, &mut span)).cloned().collect();
        levels.push(first);
        while levels.len() < depth_bound {
            let prev = levels.last().unwrap();
            if prev.is_empty() {
                break;
            }
            let mut next = Vec::new();
            for x in s.frame() {
                for y in prev {
                    let b = x.bracket(y)?;
                    if keep(&b, &mut span) {
                        next.push(b);
                    }
                }
            }
            levels.push(next);
        }
        let numeric = levels
            .iter()
            .map(|l| l.iter().map(VectorField::to_real).collect())
            .collect();
        Ok(BracketTable {
            dim: s.dim(),
            levels,
            numeric,
        })
    }

    pub fn depth(&self) -> usize {
        self.levels.len()
    }

    pub fn level(&self, s: usize) -> &[VectorField<Rational>] {
        &self.levels[s - 1]
    }

    /// Growth vector at `x`, with a flag for the rank gray zone.
    pub fn growth(&self, x: &[f64], rank_tol: f64) -> Result<Growth> {
        let n = self.dim;
        if x.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: x.len(),
            });
        }
        let mut cols: Vec<Vec<f64>> = Vec::new();
        let mut growth = Vec::new();
        let mut gray = false;
        for level in &self.numeric {
            for f in level {
                cols.push(f.eval(x));
            }
            let m = DMatrix::from_fn(n, cols.len(), |a, i| cols[i][a]);
            let r = numeric_rank(&m, rank_tol);
            if let Some(s) = r.smallest_retained {
                if s < 10.0 * r.threshold {
                    gray = true;
                }
            }
            growth.push(r.rank);
            if r.rank == n {
                return Ok(Growth { growth, gray });
            }
        }
        Err(Error::HormanderViolation {
            achieved: growth.last().copied().unwrap_or(0),
            dim: n,
            depth: growth.len(),
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Growth {
    pub growth: Vec<usize>,
    pub gray: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Regularity {
    Regular,
    Singular,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointFlag {
    pub point: Vec<f64>,
    pub growth: Vec<usize>,
    pub weights: Vec<u32>,
    pub step: usize,
    #[serde(rename = "Q")]
    pub homogeneous_dimension: u32,
    pub regular: Regularity,
}

impl PointFlag {
    fn from_growth(point: &[f64], growth: Vec<usize>, regular: Regularity) -> Self {
        let weights = weights_from_growth(&growth);
        let q = weights.iter().sum();
        PointFlag {
            point: point.to_vec(),
            step: growth.len(),
            growth,
            weights,
            homogeneous_dimension: q,
            regular,
        }
    }
}

/// `w_j = s` iff `n_{s−1} < j ≤ n_s`.
pub fn weights_from_growth(growth: &[usize]) -> Vec<u32> {
    let mut w = Vec::new();
    let mut prev = 0;
    for (s, &ns) in growth.iter().enumerate() {
        for _ in prev..ns {
            w.push(s as u32 + 1);
        }
        prev = ns;
    }
    w
}

pub fn growth_vector(s: &SubRiemannianStructure, x: &[f64], rank_tol: f64) -> Result<Vec<usize>> {
    if !(rank_tol > 0.0) {
        return Err(Error::invalid("rank_tol must be positive"));
    }
    let table = BracketTable::new(s, FlagOptions::default().depth_bound)?;
    Ok(table.growth(x, rank_tol)?.growth)
}

pub fn point_flag(s: &SubRiemannianStructure, x: &[f64], opts: &FlagOptions) -> Result<PointFlag> {
    let table = BracketTable::new(s, opts.depth_bound)?;
    let g = table.growth(x, opts.rank_tol)?;
    let regular = if g.gray {
        Regularity::Unknown
    } else {
        classify_with_table(&table, x, opts.regularity_radius, opts.regularity_samples, opts.rank_tol)?
            .verdict
    };
    Ok(PointFlag::from_growth(x, g.growth, regular))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegularityReport {
    pub verdict: Regularity,
    pub growth: Vec<usize>,
    /// First sampled point whose growth differs, with its growth vector.
    pub witness: Option<(Vec<f64>, Vec<usize>)>,
}

/// Radical inverse in base `b`.
fn radical_inverse(mut i: u64, b: u64) -> f64 {
    let mut f = 1.0;
    let mut r = 0.0;
    while i > 0 {
        f /= b as f64;
        r += f * (i % b) as f64;
        i /= b;
    }
    r
}

const PRIMES: [u64; 8] = [2, 3, 5, 7, 11, 13, 17, 19];

/// Quasi-random (Halton) points in the closed Euclidean ball.
pub fn halton_ball(center: &[f64], radius: f64, count: usize) -> Vec<Vec<f64>> {
    let n = center.len();
    let mut out = Vec::with_capacity(count);
    let mut i = 1u64;
    while out.len() < count {
        let u: Vec<f64> = (0..n)
            .map(|j| 2.0 * radical_inverse(i, PRIMES[j % PRIMES.len()]) - 1.0)
            .collect();
        i += 1;
        if u.iter().map(|v| v * v).sum::<f64>() <= 1.0 {
            out.push(center.iter().zip(&u).map(|(c, v)| c + radius * v).collect());
        }
    }
    out
}

fn classify_with_table(
    table: &BracketTable,
    x: &[f64],
    radius: f64,
    samples: usize,
    rank_tol: f64,
) -> Result<RegularityReport> {
    if samples < 8 {
        return Err(Error::invalid("regularity classification needs at least 8 samples"));
    }
    let g0 = table.growth(x, rank_tol)?;
    let mut gray = g0.gray;
    for p in halton_ball(x, radius, samples) {
        let g = table.growth(&p, rank_tol)?;
        gray |= g.gray;
        if g.growth != g0.growth {
            return Ok(RegularityReport {
                verdict: Regularity::Singular,
                growth: g0.growth,
                witness: Some((p, g.growth)),
            });
        }
    }
    Ok(RegularityReport {
        verdict: if gray {
            Regularity::Unknown
        } else {
            Regularity::Regular
        },
        growth: g0.growth,
        witness: None,
    })
}

pub fn classify_regularity(
    s: &SubRiemannianStructure,
    x: &[f64],
    radius: f64,
    samples: usize,
    opts: &FlagOptions,
) -> Result<RegularityReport> {
    let table = BracketTable::new(s, opts.depth_bound)?;
    classify_with_table(&table, x, radius, samples, opts.rank_tol)
}

/// Dimension of the real span of a set of polynomial fields (as fields, not
/// pointwise values).
pub fn span_dimension(fields: &[PolyVectorField<Rational>]) -> usize {
    let mut span = ExactSpan::new();
    for f in fields {
        span.insert(field_coordinates(f));
    }
    span.dim()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;

    #[test]
    fn examples_growth() {
        let g = library::grushin();
        assert_eq!(growth_vector(&g, &[0.0, 0.0], 1e-9).unwrap(), vec![1, 2]);
        assert_eq!(growth_vector(&g, &[1.0, 0.0], 1e-9).unwrap(), vec![2]);
        let h = library::heisenberg();
        for p in [[0.0, 0.0, 0.0], [0.3, -1.2, 4.0]] {
            assert_eq!(growth_vector(&h, &p, 1e-9).unwrap(), vec![2, 3]);
        }
    }

    #[test]
    fn point_flags() {
        let f = point_flag(&library::heisenberg(), &[0.0; 3], &FlagOptions::default()).unwrap();
        assert_eq!(f.weights, vec![1, 1, 2]);
        assert_eq!(f.homogeneous_dimension, 4);
        assert_eq!(f.regular, Regularity::Regular);
        let f = point_flag(&library::grushin(), &[0.0; 2], &FlagOptions::default()).unwrap();
        assert_eq!(f.weights, vec![1, 2]);
        assert_eq!(f.homogeneous_dimension, 3);
        assert_eq!(f.regular, Regularity::Singular);
        let f = point_flag(&library::euclidean(4), &[0.1; 4], &FlagOptions::default()).unwrap();
        assert_eq!(f.weights, vec![1; 4]);
        assert_eq!(f.homogeneous_dimension, 4);
    }

    #[test]
    fn regularity_examples() {
        let opts = FlagOptions::default();
        let g = library::grushin();
        let r = classify_regularity(&g, &[0.0, 0.3], 0.1, 16, &opts).unwrap();
        assert_eq!(r.verdict, Regularity::Singular);
        assert!(r.witness.is_some());
        let r = classify_regularity(&g, &[1.0, 0.0], 0.1, 16, &opts).unwrap();
        assert_eq!(r.verdict, Regularity::Regular);
        let s = library::singruppo();
        let r = classify_regularity(&s, &[0.0; 3], 0.1, 16, &opts).unwrap();
        assert_eq!(r.verdict, Regularity::Singular);
        assert_eq!(r.witness.unwrap().1, vec![3]);
        assert!(classify_regularity(&g, &[0.0, 0.0], 0.1, 4, &opts).is_err());
    }

    #[test]
    fn non_hormander_frame_is_rejected() {
        let s = SubRiemannianStructure::from_poly(
            "d1",
            vec![PolyVectorField::coordinate(2, 0)],
        )
        .unwrap();
        match growth_vector(&s, &[0.0, 0.0], 1e-9).unwrap_err() {
            Error::HormanderViolation { achieved, dim, .. } => {
                assert_eq!((achieved, dim), (1, 2));
            }
            e => panic!("{e:?}"),
        }
    }

    #[test]
    fn weights_consistency() {
        for growth in [vec![2, 3], vec![1, 2], vec![1, 1, 3], vec![3]] {
            let w = weights_from_growth(&growth);
            let q1: u32 = w.iter().sum();
            let mut prev = 0;
            let mut q2 = 0;
            for (s, &ns) in growth.iter().enumerate() {
                q2 += (s as u32 + 1) * (ns - prev) as u32;
                prev = ns;
            }
            assert_eq!(q1, q2);
            assert_eq!(w.len(), *growth.last().unwrap());
        }
    }

    #[test]
    fn rototranslation_flag() {
        let r = library::rototranslation();
        assert_eq!(growth_vector(&r, &[0.2, 0.1, 0.7], 1e-9).unwrap(), vec![2, 3]);
    }
}
