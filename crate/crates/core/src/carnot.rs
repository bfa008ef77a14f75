//! Tangent Carnot groups of step-2 nilpotent frames: the group law built from
//! exact polynomial flows, left-invariance checks and vertical halfspaces.

use num_traits::Zero;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::ccdist::DistanceField;
use crate::error::{Error, Result};
use crate::grid::Grid;
use crate::linalg::{field_coordinates, invert_exact, ExactSpan};
use crate::nilpotent::{dilate, is_triangular, Grading, NilpotentApprox};
use crate::poly::Polynomial;
use crate::scalar::{Rational, Scalar};
use crate::vectorfield::{lie_bracket, PolyVectorField};

/// Time-one flow of `v` from `x0`, computed exactly. `v` must be triangular
/// for the grading (component `j` depends only on coordinates of lower
/// weight), which holds for every field of negative order.
pub fn flow_exact<T: Scalar>(v: &PolyVectorField<T>, x0: &[T], g: &Grading) -> Result<Vec<T>> {
    let n = v.dim();
    if x0.len() != n || g.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if x0.len() != n { x0.len() } else { g.dim() },
        });
    }
    if !is_triangular(v, g) {
        return Err(Error::invalid("exact flows need a field of negative order"));
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&j| g.weight(j));
    let mut traj: Vec<Polynomial<T>> = vec![Polynomial::zero(); n];
    for j in order {
        let rhs = v.component(j).substitute(&traj);
        traj[j] = &Polynomial::constant(x0[j].clone()) + &rhs.integrate(0);
    }
    Ok(traj.iter().map(|p| p.eval(&[T::one()])).collect())
}

/// Element of the Lie basis: a field and the bracket layer it belongs to.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisField {
    pub layer: u32,
    /// Bracket word, e.g. `X1` or `[X1,X2]`.
    pub word: String,
    pub field: PolyVectorField<Rational>,
}

/// Basis of `Lie{X̂_i}` made of frame fields and their brackets.
pub fn lie_basis(na: &NilpotentApprox) -> Result<Vec<BasisField>> {
    let g = &na.grading;
    let n = g.dim();
    if g.step() > 2 {
        return Err(Error::UnsupportedStep(g.step() as usize));
    }
    let mut span = ExactSpan::new();
    let mut basis = Vec::new();
    for (i, x) in na.truncated.iter().enumerate() {
        if !x.is_zero() && span.insert(field_coordinates(x)) {
            basis.push(BasisField {
                layer: 1,
                word: format!("X{}", i + 1),
                field: x.clone(),
            });
        }
    }
    let m = na.truncated.len();
    let mut brackets = Vec::new();
    for i in 0..m {
        for j in i + 1..m {
            let b = lie_bracket(&na.truncated[i], &na.truncated[j])?;
            if !b.is_zero() {
                brackets.push(b.clone());
                if span.insert(field_coordinates(&b)) {
                    basis.push(BasisField {
                        layer: 2,
                        word: format!("[X{},X{}]", i + 1, j + 1),
                        field: b,
                    });
                }
            }
        }
    }
    for x in &na.truncated {
        for b in &brackets {
            if !lie_bracket(x, b)?.is_zero() {
                return Err(Error::UnsupportedStep(3));
            }
        }
    }
    if basis.len() != n {
        return Err(Error::IsotropyNotVerified {
            lie_dim: basis.len(),
            dim: n,
        });
    }
    Ok(basis)
}

type Sym = Polynomial<Rational>;

/// `Σ_k c_k B_k` with polynomial coefficients.
fn combination(basis: &[BasisField], coeffs: &[Sym]) -> PolyVectorField<Sym> {
    let n = basis[0].field.dim();
    let comps = (0..n)
        .map(|j| {
            basis.iter().zip(coeffs).fold(Polynomial::zero(), |acc, (b, c)| {
                let lifted = b.field.component(j).map_coeffs(|v| c.scale(v));
                &acc + &lifted
            })
        })
        .collect();
    PolyVectorField::new(comps)
}

fn vars(offset: usize, n: usize) -> Vec<Sym> {
    (0..n).map(|j| Polynomial::var(offset + j)).collect()
}

/// Step-2 group law `x★y = Φ₁^{log y}(x)` on privileged coordinates, where
/// `log` inverts `a ↦ Φ₁^{Σ a_k B_k}(0)` over a Lie basis `B`.
#[derive(Debug, Clone)]
pub struct GroupLaw {
    grading: Grading,
    basis: Vec<BasisField>,
    /// Components of `x★y` in `x_0..x_{n-1}, y_0..y_{n-1}`.
    law: Vec<Sym>,
    inverse: Vec<Sym>,
    log: Vec<Sym>,
    exp: Vec<Sym>,
    law_f: Vec<Polynomial<f64>>,
    inverse_f: Vec<Polynomial<f64>>,
}

impl GroupLaw {
    pub fn from_flows(na: &NilpotentApprox) -> Result<Self> {
        let basis = lie_basis(na)?;
        let g = na.grading.clone();
        let n = g.dim();
        let exp = flow_exact(&combination(&basis, &vars(0, n)), &vec![Polynomial::zero(); n], &g)?;
        let log = invert_exp(&exp, &basis, &g)?;
        let shifted: Vec<Sym> = log.iter().map(|l| l.substitute(&vars(n, n))).collect();
        let law = flow_exact(&combination(&basis, &shifted), &vars(0, n), &g)?;
        let neg_log: Vec<Sym> = log.iter().map(|l| -l).collect();
        let inverse: Vec<Sym> = exp.iter().map(|e| e.substitute(&neg_log)).collect();
        Ok(GroupLaw {
            law_f: law.iter().map(|p| p.to_real()).collect(),
            inverse_f: inverse.iter().map(|p| p.to_real()).collect(),
            grading: g,
            basis,
            law,
            inverse,
            log,
            exp,
        })
    }

    pub fn dim(&self) -> usize {
        self.grading.dim()
    }

    pub fn step(&self) -> u32 {
        self.grading.step()
    }

    pub fn grading(&self) -> &Grading {
        &self.grading
    }

    pub fn basis(&self) -> &[BasisField] {
        &self.basis
    }

    /// Symbolic components of `x★y` (variables `x` then `y`).
    pub fn symbolic(&self) -> &[Sym] {
        &self.law
    }

    pub fn symbolic_inverse(&self) -> &[Sym] {
        &self.inverse
    }

    /// `x = Φ₁^{Σ a_k B_k}(0)` as polynomials in `a`.
    pub fn symbolic_exp(&self) -> &[Sym] {
        &self.exp
    }

    /// Inverse of [`GroupLaw::symbolic_exp`].
    pub fn symbolic_log(&self) -> &[Sym] {
        &self.log
    }

    /// `x★y` over any scalar.
    pub fn op_in<T: Scalar>(&self, x: &[T], y: &[T]) -> Vec<T> {
        let xy: Vec<T> = x.iter().chain(y).cloned().collect();
        self.law.iter().map(|p| p.map_coeffs(T::from_rational).eval(&xy)).collect()
    }

    pub fn inverse_in<T: Scalar>(&self, x: &[T]) -> Vec<T> {
        self.inverse.iter().map(|p| p.map_coeffs(T::from_rational).eval(x)).collect()
    }

    /// Bilinear part of every second-layer coordinate:
    /// `(x★y)_k ∋ Σ c_{ij} x_i y_j`.
    pub fn structure_constants(&self) -> Vec<BilinearForm> {
        let n = self.dim();
        (0..n)
            .filter(|&k| self.grading.weight(k) == 2)
            .map(|k| {
                let mut coefficients = vec![vec![Rational::zero(); n]; n];
                for (m, c) in self.law[k].terms() {
                    if m.degree() != 2 {
                        continue;
                    }
                    let xi = (0..n).find(|&i| m.exponent(i) == 1);
                    let yj = (0..n).find(|&j| m.exponent(n + j) == 1);
                    if let (Some(i), Some(j)) = (xi, yj) {
                        coefficients[i][j] = c.clone();
                    }
                }
                BilinearForm {
                    coordinate: k,
                    entries: coefficients
                        .iter()
                        .map(|row| row.iter().map(|c| c.to_string()).collect())
                        .collect(),
                }
            })
            .collect()
    }
}

/// Second-layer bilinear form of a group law; `entries[i][j]` is the exact
/// coefficient of `x_i y_j`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BilinearForm {
    pub coordinate: usize,
    pub entries: Vec<Vec<String>>,
}

/// Layer-by-layer inversion of the exponential map.
fn invert_exp(exp: &[Sym], basis: &[BasisField], g: &Grading) -> Result<Vec<Sym>> {
    let n = g.dim();
    let mut log: Vec<Sym> = vec![Polynomial::zero(); n];
    for layer in 1..=g.step() {
        let coords: Vec<usize> = (0..n).filter(|&j| g.weight(j) == layer).collect();
        let ks: Vec<usize> = (0..n).filter(|&k| basis[k].layer == layer).collect();
        if coords.len() != ks.len() {
            return Err(Error::IsotropyNotVerified {
                lie_dim: basis.len(),
                dim: n,
            });
        }
        let higher = |v: usize| basis[v].layer >= layer;
        let mut mat = vec![vec![Rational::zero(); ks.len()]; coords.len()];
        let mut rest = Vec::with_capacity(coords.len());
        for (r, &j) in coords.iter().enumerate() {
            let mut q = Polynomial::zero();
            for (m, c) in exp[j].terms() {
                let used: Vec<usize> = (0..m.len()).filter(|&v| m.exponent(v) > 0).collect();
                if used.iter().all(|&v| !higher(v)) {
                    q.add_term(m.clone(), c.clone());
                } else if m.degree() == 1 && basis[used[0]].layer == layer {
                    let col = ks.iter().position(|&k| k == used[0]).expect("same layer");
                    mat[r][col] = c.clone();
                } else {
                    return Err(Error::UnsupportedStep(layer as usize + 1));
                }
            }
            rest.push(q);
        }
        let inv = invert_exact(&mat).ok_or(Error::IsotropyNotVerified {
            lie_dim: basis.len(),
            dim: n,
        })?;
        let known = log.clone();
        for (row, &k) in ks.iter().enumerate() {
            let mut acc = Polynomial::zero();
            for (col, &j) in coords.iter().enumerate() {
                let rhs = &Polynomial::var(j) - &rest[col].substitute(&known);
                acc = &acc + &rhs.scale(&inv[row][col]);
            }
            log[k] = acc;
        }
    }
    Ok(log)
}

/// A group operation on `ℝⁿ` evaluated in floating point.
pub trait GroupOp {
    fn dim(&self) -> usize;
    fn op(&self, x: &[f64], y: &[f64]) -> Vec<f64>;
    fn inverse(&self, x: &[f64]) -> Vec<f64>;
}

impl GroupOp for GroupLaw {
    fn dim(&self) -> usize {
        self.grading.dim()
    }

    fn op(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
        let xy: Vec<f64> = x.iter().chain(y).copied().collect();
        self.law_f.iter().map(|p| p.eval(&xy)).collect()
    }

    fn inverse(&self, x: &[f64]) -> Vec<f64> {
        self.inverse_f.iter().map(|p| p.eval(x)).collect()
    }
}

pub fn group_law_from_flows(na: &NilpotentApprox) -> Result<GroupLaw> {
    GroupLaw::from_flows(na)
}

fn random_point(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-1.0..=1.0)).collect()
}

fn max_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(u, v)| (u - v).abs()).fold(0.0, f64::max)
}

/// Largest violations of the group axioms over random samples in `[−1,1]ⁿ`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LawInvariants {
    pub samples: usize,
    pub identity: f64,
    pub inverse: f64,
    pub associativity: f64,
    /// `|δ_λ(x★y) − δ_λx ★ δ_λy|` for `λ ∈ {1/2, 3}`.
    pub dilation: f64,
}

impl LawInvariants {
    pub fn max(&self) -> f64 {
        self.identity.max(self.inverse).max(self.associativity).max(self.dilation)
    }
}

pub fn law_invariants(law: &dyn GroupOp, g: &Grading, samples: usize, seed: u64) -> Result<LawInvariants> {
    let n = law.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let zero = vec![0.0; n];
    let mut r = LawInvariants {
        samples,
        identity: 0.0,
        inverse: 0.0,
        associativity: 0.0,
        dilation: 0.0,
    };
    for _ in 0..samples {
        let x = random_point(&mut rng, n);
        let y = random_point(&mut rng, n);
        let z = random_point(&mut rng, n);
        r.identity = r
            .identity
            .max(max_diff(&law.op(&zero, &x), &x))
            .max(max_diff(&law.op(&x, &zero), &x));
        let xi = law.inverse(&x);
        r.inverse = r
            .inverse
            .max(max_diff(&law.op(&x, &xi), &zero))
            .max(max_diff(&law.op(&xi, &x), &zero));
        let left = law.op(&law.op(&x, &y), &z);
        let right = law.op(&x, &law.op(&y, &z));
        r.associativity = r.associativity.max(max_diff(&left, &right));
        for lambda in [0.5, 3.0] {
            let a = dilate(&law.op(&x, &y), g, lambda)?;
            let b = law.op(&dilate(&x, g, lambda)?, &dilate(&y, g, lambda)?);
            r.dilation = r.dilation.max(max_diff(&a, &b));
        }
    }
    Ok(r)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InvarianceWitness {
    /// 1-based frame index.
    pub field: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub coordinate: usize,
    pub pushed: f64,
    pub expected: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeftInvarianceReport {
    pub pairs: usize,
    pub max_error: f64,
    pub passed: bool,
    pub witness: Option<InvarianceWitness>,
}

/// Compares `D_y(x★y)·X̂_i(y)` (central differences) with `X̂_i(x★y)` on
/// random pairs.
pub fn left_invariance_check(
    law: &dyn GroupOp,
    na: &NilpotentApprox,
    pairs: usize,
    seed: u64,
    tol: f64,
) -> Result<LeftInvarianceReport> {
    let n = law.dim();
    if na.grading.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: na.grading.dim(),
        });
    }
    let fields: Vec<PolyVectorField<f64>> = na.truncated.iter().map(|f| f.to_real()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 1e-4;
    let mut worst: Option<(f64, InvarianceWitness)> = None;
    for _ in 0..pairs {
        let x = random_point(&mut rng, n);
        let y = random_point(&mut rng, n);
        let xy = law.op(&x, &y);
        for (i, f) in fields.iter().enumerate() {
            if f.is_zero() {
                continue;
            }
            let v = f.eval(&y);
            let yp: Vec<f64> = y.iter().zip(&v).map(|(a, b)| a + h * b).collect();
            let ym: Vec<f64> = y.iter().zip(&v).map(|(a, b)| a - h * b).collect();
            let (p, m) = (law.op(&x, &yp), law.op(&x, &ym));
            let expected = f.eval(&xy);
            for a in 0..n {
                let pushed = (p[a] - m[a]) / (2.0 * h);
                let err = (pushed - expected[a]).abs();
                if worst.as_ref().map_or(true, |(e, _)| err > *e) {
                    worst = Some((
                        err,
                        InvarianceWitness {
                            field: i + 1,
                            x: x.clone(),
                            y: y.clone(),
                            coordinate: a,
                            pushed,
                            expected: expected[a],
                        },
                    ));
                }
            }
        }
    }
    let max_error = worst.as_ref().map_or(0.0, |(e, _)| *e);
    let passed = max_error <= tol;
    Ok(LeftInvarianceReport {
        pairs,
        max_error,
        passed,
        witness: if passed { None } else { worst.map(|(_, w)| w) },
    })
}

/// `F = {z : ⟨z, w⟩ > 0}` where `w` holds the first-layer components of
/// `Σ ν_i X̂_i(0)`. `F` is monotone along `Σ ν_i X̂_i`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerticalHalfspace {
    pub normal: Vec<f64>,
    pub direction: Vec<f64>,
}

impl VerticalHalfspace {
    /// Level function; `F = {level < 0}`.
    pub fn level(&self, z: &[f64]) -> f64 {
        -z.iter().zip(&self.direction).map(|(a, b)| a * b).sum::<f64>()
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        self.level(z) < 0.0
    }

    pub fn indicator(&self, z: &[f64]) -> f64 {
        if self.contains(z) {
            1.0
        } else {
            0.0
        }
    }

    /// Level function as an exact polynomial (when `direction` is rational).
    pub fn level_polynomial(&self) -> Polynomial<Rational> {
        let mut p = Polynomial::zero();
        for (j, &w) in self.direction.iter().enumerate() {
            if w != 0.0 {
                let c = crate::scalar::rational_from_f64(-w).expect("finite");
                p = &p + &Polynomial::var(j).scale(&c);
            }
        }
        p
    }
}

pub fn vertical_halfspace(nu: &[f64], na: &NilpotentApprox) -> Result<VerticalHalfspace> {
    let m = na.truncated.len();
    if nu.len() != m {
        return Err(Error::DimensionMismatch {
            expected: m,
            got: nu.len(),
        });
    }
    let norm = nu.iter().map(|v| v * v).sum::<f64>().sqrt();
    if (norm - 1.0).abs() > 1e-9 {
        return Err(Error::invalid(format!("normal must be a unit vector, |ν| = {norm}")));
    }
    let g = &na.grading;
    let n = g.dim();
    let zero = vec![0.0; n];
    let mut w = vec![0.0; n];
    for (f, &c) in na.truncated.iter().zip(nu) {
        let v = f.to_real::<f64>().eval(&zero);
        for j in 0..n {
            if g.weight(j) == 1 {
                w[j] += c * v[j];
            }
        }
    }
    if w.iter().map(|v| v * v).sum::<f64>().sqrt() < 1e-12 {
        return Err(Error::DegenerateNormal);
    }
    Ok(VerticalHalfspace {
        normal: nu.to_vec(),
        direction: w,
    })
}

/// `‖D_ĝ 1_F‖(B̂₁)`, `Leb(B̂₁)` and their ratio.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HalfspacePerimeter {
    pub perimeter: f64,
    pub volume: f64,
    pub ratio: f64,
    /// Hyperplane samples where the distance field had no value.
    pub unknown_samples: usize,
}

/// Integrates `|(⟨X̂_i, n⟩)_i|` over `∂F ∩ B̂₁` (graph quadrature on the grid
/// axes) and counts the voxels of `B̂₁`. `field` is the distance from the
/// origin of the truncated structure.
pub fn halfspace_perimeter_unit_ball(
    f: &VerticalHalfspace,
    na: &NilpotentApprox,
    field: &DistanceField,
    grid: &Grid,
) -> Result<HalfspacePerimeter> {
    let n = grid.dim();
    if f.direction.len() != n || na.grading.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: f.direction.len(),
        });
    }
    let volume = field.ball_mask(None, 1.0, grid, 0.0)?.volume();
    let len = f.direction.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nrm: Vec<f64> = f.direction.iter().map(|v| v / len).collect();
    let solve_for = (0..n)
        .max_by(|&a, &b| nrm[a].abs().partial_cmp(&nrm[b].abs()).unwrap())
        .expect("n ≥ 1");
    let free: Vec<usize> = (0..n).filter(|&j| j != solve_for).collect();
    let h = grid.spacing();
    let area: f64 = free.iter().map(|&j| h[j]).product::<f64>() / nrm[solve_for].abs();
    let fields: Vec<PolyVectorField<f64>> = na.truncated.iter().map(|x| x.to_real()).collect();
    let counts: Vec<usize> = free.iter().map(|&j| grid.res[j]).collect();
    let total: usize = counts.iter().product();
    let mut perimeter = 0.0;
    let mut unknown = 0;
    let mut z = vec![0.0; n];
    for idx in 0..total {
        let mut rem = idx;
        for (k, &j) in free.iter().enumerate() {
            let c = rem % counts[k];
            rem /= counts[k];
            z[j] = grid.bounds.lo[j] + (c as f64 + 0.5) * h[j];
        }
        let s: f64 = free.iter().map(|&j| nrm[j] * z[j]).sum();
        z[solve_for] = -s / nrm[solve_for];
        if z[solve_for] < grid.bounds.lo[solve_for] || z[solve_for] > grid.bounds.hi[solve_for] {
            continue;
        }
        match field.query(&z) {
            None => unknown += 1,
            Some(d) if d < 1.0 => {
                let nx: f64 = fields
                    .iter()
                    .map(|x| {
                        let v = x.eval(&z);
                        let p: f64 = v.iter().zip(&nrm).map(|(a, b)| a * b).sum();
                        p * p
                    })
                    .sum::<f64>()
                    .sqrt();
                perimeter += nx * area;
            }
            Some(_) => {}
        }
    }
    Ok(HalfspacePerimeter {
        perimeter,
        volume,
        ratio: perimeter / volume,
        unknown_samples: unknown,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;
    use crate::nilpotent::truncate;
    use crate::scalar::q;

    fn law_of(s: &crate::structure::SubRiemannianStructure) -> GroupLaw {
        let g = Grading::at_origin(s).unwrap();
        GroupLaw::from_flows(&truncate(s, &g).unwrap()).unwrap()
    }

    #[test]
    fn heisenberg_law_is_exact() {
        let law = law_of(&library::heisenberg());
        let x = [q(1, 2), q(-3, 1), q(2, 7)];
        let y = [q(5, 3), q(1, 4), q(-1, 1)];
        let z = law.op_in(&x, &y);
        assert_eq!(z[0], &x[0] + &y[0]);
        assert_eq!(z[1], &x[1] + &y[1]);
        let want = &x[2] + &y[2] + (&x[0] * &y[1] - &x[1] * &y[0]) * q(1, 2);
        assert_eq!(z[2], want);
        let forms = law.structure_constants();
        assert_eq!(forms.len(), 1);
        assert_eq!(forms[0].entries[0][1], "1/2");
        assert_eq!(forms[0].entries[1][0], "-1/2");
    }

    #[test]
    fn euclidean_law_adds() {
        let law = law_of(&library::euclidean(3));
        assert_eq!(law.op(&[1.0, 2.0, 3.0], &[0.5, -1.0, 4.0]), vec![1.5, 1.0, 7.0]);
        assert_eq!(law.inverse(&[1.0, -2.0, 0.0]), vec![-1.0, 2.0, 0.0]);
    }

    #[test]
    fn axioms_hold_for_contact_group() {
        let s = library::contact_corank1(2).unwrap();
        let law = law_of(&s);
        let inv = law_invariants(&law, law.grading(), 20, 3).unwrap();
        assert!(inv.max() < 1e-12, "{inv:?}");
    }

    #[test]
    fn singular_frame_truncates_to_heisenberg_group() {
        let law = law_of(&library::singruppo());
        let z = law.op(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]);
        assert!((z[2] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn grushin_has_no_group() {
        let s = library::grushin();
        let g = Grading::at_origin(&s).unwrap();
        let err = GroupLaw::from_flows(&truncate(&s, &g).unwrap()).unwrap_err();
        assert!(matches!(err, Error::IsotropyNotVerified { lie_dim: 3, dim: 2 }), "{err}");
    }

    #[test]
    fn flows_of_positive_order_are_rejected() {
        let g = Grading::new(vec![1, 1]).unwrap();
        let v: PolyVectorField<Rational> = PolyVectorField::new(vec![Polynomial::var(0), Polynomial::zero()]);
        assert!(flow_exact(&v.to_real::<f64>(), &[1.0, 0.0], &g).is_err());
    }

    struct Additive(usize);

    impl GroupOp for Additive {
        fn dim(&self) -> usize {
            self.0
        }
        fn op(&self, x: &[f64], y: &[f64]) -> Vec<f64> {
            x.iter().zip(y).map(|(a, b)| a + b).collect()
        }
        fn inverse(&self, x: &[f64]) -> Vec<f64> {
            x.iter().map(|a| -a).collect()
        }
    }

    #[test]
    fn left_invariance() {
        let s = library::heisenberg();
        let g = Grading::at_origin(&s).unwrap();
        let na = truncate(&s, &g).unwrap();
        let law = GroupLaw::from_flows(&na).unwrap();
        let ok = left_invariance_check(&law, &na, 20, 1, 1e-6).unwrap();
        assert!(ok.passed, "{ok:?}");
        let bad = left_invariance_check(&Additive(3), &na, 20, 1, 1e-6).unwrap();
        assert!(!bad.passed);
        assert_eq!(bad.witness.unwrap().coordinate, 2);
    }

    #[test]
    fn halfspace_orientation() {
        let s = library::heisenberg();
        let g = Grading::at_origin(&s).unwrap();
        let na = truncate(&s, &g).unwrap();
        let f = vertical_halfspace(&[1.0, 0.0], &na).unwrap();
        assert!(f.contains(&[0.1, -3.0, 5.0]));
        assert!(!f.contains(&[-0.1, 3.0, 5.0]));
        assert_eq!(f.contains(&[0.2, 0.0, 0.0]), f.contains(&[0.2, 0.0, -7.0]));
        let f2 = vertical_halfspace(&[0.0, 1.0], &na).unwrap();
        assert!(f2.contains(&[-1.0, 0.5, 0.0]));
        let sg = library::singruppo();
        let na3 = truncate(&sg, &Grading::at_origin(&sg).unwrap()).unwrap();
        assert_eq!(vertical_halfspace(&[0.0, 0.0, 1.0], &na3), Err(Error::DegenerateNormal));
    }
}
