//! Vector fields on ℝⁿ: exact polynomial algebra (brackets, divergence), the
//! expression-valued variant used for non-polynomial frames, numerical flows
//! with Liouville Jacobians, and the distributional pairing `⟨D_X u, φ⟩`.

use std::fmt;

use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{BoxRegion, GridFunction};
use crate::poly::{fmt_term, CoeffFmt, Polynomial};
use crate::scalar::{Rational, Real, Scalar};

/// `Σ_j p_j(x) ∂_j` with polynomial coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct PolyVectorField<T> {
    comps: Vec<Polynomial<T>>,
}

impl<T: Scalar> PolyVectorField<T> {
    pub fn new(comps: Vec<Polynomial<T>>) -> Self {
        PolyVectorField { comps }
    }

    pub fn zero(dim: usize) -> Self {
        PolyVectorField {
            comps: vec![Polynomial::zero(); dim],
        }
    }

    /// The coordinate field `∂_j`.
    pub fn coordinate(dim: usize, j: usize) -> Self {
        let mut f = Self::zero(dim);
        f.comps[j] = Polynomial::constant(T::one());
        f
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn component(&self, j: usize) -> &Polynomial<T> {
        &self.comps[j]
    }

    pub fn components(&self) -> &[Polynomial<T>] {
        &self.comps
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Polynomial::is_zero)
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(PolyVectorField::new(
            self.comps.iter().zip(&other.comps).map(|(a, b)| a + b).collect(),
        ))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.check_dim(other)?;
        Ok(PolyVectorField::new(
            self.comps.iter().zip(&other.comps).map(|(a, b)| a - b).collect(),
        ))
    }

    pub fn scale(&self, c: &T) -> Self {
        PolyVectorField::new(self.comps.iter().map(|p| p.scale(c)).collect())
    }

    pub fn mul_poly(&self, f: &Polynomial<T>) -> Self {
        PolyVectorField::new(self.comps.iter().map(|p| p * f).collect())
    }

    /// Directional derivative `X f = Σ X_j ∂_j f`.
    pub fn apply(&self, f: &Polynomial<T>) -> Polynomial<T> {
        let mut out = Polynomial::zero();
        for (j, c) in self.comps.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let d = f.derivative(j);
            if !d.is_zero() {
                out = &out + &(c * &d);
            }
        }
        out
    }

    /// Euclidean divergence `Σ ∂_j X_j`.
    pub fn euclidean_divergence(&self) -> Polynomial<T> {
        self.comps
            .iter()
            .enumerate()
            .fold(Polynomial::zero(), |acc, (j, c)| &acc + &c.derivative(j))
    }

    pub fn eval(&self, x: &[T]) -> Vec<T> {
        self.comps.iter().map(|p| p.eval(x)).collect()
    }

    pub fn map_coeffs<U: Scalar>(&self, f: impl Fn(&T) -> U + Copy) -> PolyVectorField<U> {
        PolyVectorField::new(self.comps.iter().map(|p| p.map_coeffs(f)).collect())
    }

    pub fn to_expr(&self) -> VectorField<T> {
        VectorField::new(self.comps.iter().cloned().map(Expr::Poly).collect())
    }
}

impl PolyVectorField<Rational> {
    pub fn to_real<R: Scalar>(&self) -> PolyVectorField<R> {
        self.map_coeffs(R::from_rational)
    }
}

/// `[X, Y]`, component `j` being `Σ_i (X_i ∂_i Y_j − Y_i ∂_i X_j)`.
pub fn lie_bracket<T: Scalar>(
    x: &PolyVectorField<T>,
    y: &PolyVectorField<T>,
) -> Result<PolyVectorField<T>> {
    x.check_dim(y)?;
    let comps = (0..x.dim())
        .map(|j| &x.apply(&y.comps[j]) - &y.apply(&x.comps[j]))
        .collect();
    Ok(PolyVectorField::new(comps))
}

impl<T: Scalar + CoeffFmt> fmt::Display for PolyVectorField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut first = true;
        for (j, p) in self.comps.iter().enumerate() {
            let d = format!("d{}", j + 1);
            for (m, c) in p.terms() {
                let neg = c.is_negative();
                match (first, neg) {
                    (true, true) => f.write_str("-")?,
                    (true, false) => {}
                    (false, true) => f.write_str(" - ")?,
                    (false, false) => f.write_str(" + ")?,
                }
                first = false;
                f.write_str(&fmt_term(c, m, Some(&d)))?;
            }
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// Vector field with expression coefficients; polynomial frames round-trip
/// through [`VectorField::as_poly`].
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField<T> {
    comps: Vec<Expr<T>>,
}

impl<T: Scalar> From<PolyVectorField<T>> for VectorField<T> {
    fn from(p: PolyVectorField<T>) -> Self {
        p.to_expr()
    }
}

impl<T: Scalar> VectorField<T> {
    pub fn new(comps: Vec<Expr<T>>) -> Self {
        VectorField { comps }
    }

    pub fn dim(&self) -> usize {
        self.comps.len()
    }

    pub fn components(&self) -> &[Expr<T>] {
        &self.comps
    }

    pub fn is_zero(&self) -> bool {
        self.comps.iter().all(Expr::is_zero)
    }

    pub fn as_poly(&self) -> Option<PolyVectorField<T>> {
        self.comps
            .iter()
            .map(|e| e.as_poly().cloned())
            .collect::<Option<Vec<_>>>()
            .map(PolyVectorField::new)
    }

    pub fn apply(&self, f: &Expr<T>) -> Expr<T> {
        let mut out = Expr::zero();
        for (j, c) in self.comps.iter().enumerate() {
            if c.is_zero() {
                continue;
            }
            let d = f.derivative(j);
            if !d.is_zero() {
                out = out.add(&c.mul(&d));
            }
        }
        out
    }

    pub fn bracket(&self, other: &Self) -> Result<Self> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: other.dim(),
            });
        }
        let comps = (0..self.dim())
            .map(|j| self.apply(&other.comps[j]).sub(&other.apply(&self.comps[j])))
            .collect();
        Ok(VectorField::new(comps))
    }

    pub fn euclidean_divergence(&self) -> Expr<T> {
        self.comps
            .iter()
            .enumerate()
            .fold(Expr::zero(), |acc, (j, c)| acc.add(&c.derivative(j)))
    }

    pub fn map_coeffs<U: Scalar>(&self, f: &impl Fn(&T) -> U) -> VectorField<U> {
        VectorField::new(self.comps.iter().map(|e| e.map_coeffs(f)).collect())
    }
}

impl VectorField<Rational> {
    pub fn to_real<R: Scalar>(&self) -> VectorField<R> {
        self.map_coeffs(&R::from_rational)
    }
}

impl<R: Real> VectorField<R> {
    pub fn eval(&self, x: &[R]) -> Vec<R> {
        self.comps.iter().map(|e| e.eval(x)).collect()
    }

    pub fn eval_into(&self, x: &[R], out: &mut [R]) {
        for (o, e) in out.iter_mut().zip(&self.comps) {
            *o = e.eval(x);
        }
    }
}

impl<T: Scalar + CoeffFmt> fmt::Display for VectorField<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if let Some(p) = self.as_poly() {
            return write!(f, "{p}");
        }
        let mut first = true;
        for (j, e) in self.comps.iter().enumerate() {
            if e.is_zero() {
                continue;
            }
            if !first {
                f.write_str(" + ")?;
            }
            first = false;
            write!(f, "({e})*d{}", j + 1)?;
        }
        if first {
            f.write_str("0")?;
        }
        Ok(())
    }
}

/// Density `ω̄` of the volume form with respect to Lebesgue measure.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum VolumeWeight {
    #[default]
    One,
    Density(Expr<Rational>),
}

impl VolumeWeight {
    pub fn is_one(&self) -> bool {
        matches!(self, VolumeWeight::One)
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            VolumeWeight::One => 1.0,
            VolumeWeight::Density(e) => e.to_real::<f64>().eval(x),
        }
    }

    pub fn numeric(&self) -> Option<Expr<f64>> {
        match self {
            VolumeWeight::One => None,
            VolumeWeight::Density(e) => Some(e.to_real()),
        }
    }

    /// Samples the weight on a `per_axis`-point lattice of the box (corners
    /// included) and rejects any nonpositive value.
    pub fn check_positive(&self, bounds: &BoxRegion, per_axis: usize) -> Result<()> {
        let Some(e) = self.numeric() else {
            return Ok(());
        };
        let n = bounds.dim();
        let k = per_axis.max(2);
        let total = k.pow(n as u32);
        let mut x = vec![0.0; n];
        for idx in 0..total {
            let mut r = idx;
            for j in 0..n {
                let i = r % k;
                r /= k;
                x[j] = bounds.lo[j] + (bounds.hi[j] - bounds.lo[j]) * i as f64 / (k - 1) as f64;
            }
            let v = e.eval(&x);
            if !(v > 0.0) {
                return Err(Error::NonPositiveWeight { point: x });
            }
        }
        Ok(())
    }
}

/// `div_ω X = Σ ∂_i X_i + X(ω̄)/ω̄`. With `ω̄ ≡ 1` the result is a polynomial
/// whenever `X` is. The weight is checked for positivity on `working_box`.
pub fn divergence(
    x: &VectorField<Rational>,
    weight: &VolumeWeight,
    working_box: Option<&BoxRegion>,
) -> Result<Expr<Rational>> {
    let base = x.euclidean_divergence();
    match weight {
        VolumeWeight::One => Ok(base),
        VolumeWeight::Density(w) => {
            if let Some(b) = working_box {
                if b.dim() != x.dim() {
                    return Err(Error::DimensionMismatch {
                        expected: x.dim(),
                        got: b.dim(),
                    });
                }
                weight.check_positive(b, 9)?;
            }
            Ok(base.add(&x.apply(w).mul(&w.powi(-1))))
        }
    }
}

/// A field compiled for floating-point evaluation, together with its
/// Euclidean divergence (for Liouville Jacobians).
#[derive(Debug, Clone)]
pub struct NumericField<R> {
    pub field: VectorField<R>,
    pub divergence: Expr<R>,
}

impl<R: Real> NumericField<R> {
    pub fn new(x: &VectorField<Rational>) -> Self {
        NumericField {
            field: x.to_real(),
            divergence: x.euclidean_divergence().to_real(),
        }
    }

    pub fn dim(&self) -> usize {
        self.field.dim()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult<R> {
    pub endpoint: Vec<R>,
    /// Jacobian determinant of `x ↦ Φ_t(x)` at the start point.
    pub jacobian: R,
    pub steps: usize,
}

#[derive(Debug, Clone)]
pub struct FlowOptions {
    /// Fixed step count; `None` selects the adaptive doubling rule.
    pub steps: Option<usize>,
    pub safety_box: Option<BoxRegion>,
    pub tol: f64,
    pub max_steps: usize,
}

impl Default for FlowOptions {
    fn default() -> Self {
        FlowOptions {
            steps: None,
            safety_box: None,
            tol: 1e-9,
            max_steps: 1 << 20,
        }
    }
}

impl FlowOptions {
    pub fn fixed(steps: usize) -> Self {
        FlowOptions {
            steps: Some(steps),
            ..Default::default()
        }
    }
}

fn flow_fixed<R: Real>(
    x: &NumericField<R>,
    x0: &[R],
    t: R,
    steps: usize,
    safety: Option<&BoxRegion>,
) -> Result<FlowResult<R>> {
    let n = x.dim();
    let h = t / R::from_usize(steps).unwrap();
    let half = R::lit(0.5);
    let sixth = R::lit(1.0 / 6.0);
    let two = R::lit(2.0);
    let mut y = x0.to_vec();
    let mut log_j = R::zero();
    let mut tmp = vec![R::zero(); n];
    let mut k = [vec![R::zero(); n], vec![R::zero(); n], vec![R::zero(); n], vec![R::zero(); n]];
    let mut kd = [R::zero(); 4];
    for step in 0..steps {
        for s in 0..4 {
            let c = match s {
                0 => R::zero(),
                3 => h,
                _ => h * half,
            };
            for i in 0..n {
                tmp[i] = if s == 0 { y[i] } else { y[i] + c * k[s - 1][i] };
            }
            x.field.eval_into(&tmp, &mut k[s]);
            kd[s] = x.divergence.eval(&tmp);
        }
        for i in 0..n {
            y[i] += h * sixth * (k[0][i] + two * k[1][i] + two * k[2][i] + k[3][i]);
        }
        log_j += h * sixth * (kd[0] + two * kd[1] + two * kd[2] + kd[3]);
        if let Some(b) = safety {
            let yf: Vec<f64> = y.iter().map(|v| v.as_f64()).collect();
            if !b.contains(&yf) || yf.iter().any(|v| !v.is_finite()) {
                return Err(Error::LeftSafetyBox {
                    time: (step + 1) as f64 * h.as_f64(),
                });
            }
        }
    }
    Ok(FlowResult {
        endpoint: y,
        jacobian: log_j.exp(),
        steps,
    })
}

/// Approximates `Φ^X_t(x0)` with classical RK4, and the Jacobian
/// `exp(∫₀ᵗ div X(Φ_s) ds)` with the same stages.
///
/// Without a fixed step count the rule is `max(64, ⌈256|t|⌉)` steps, doubled
/// until two successive endpoints agree to `tol` in max norm or `max_steps` is
/// reached.
pub fn flow<R: Real>(
    x: &NumericField<R>,
    x0: &[R],
    t: R,
    opts: &FlowOptions,
) -> Result<FlowResult<R>> {
    if x0.len() != x.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: x0.len(),
        });
    }
    let safety = opts.safety_box.as_ref();
    if let Some(steps) = opts.steps {
        if steps == 0 {
            return Err(Error::invalid("flow needs at least one step"));
        }
        return flow_fixed(x, x0, t, steps, safety);
    }
    if t == R::zero() {
        return Ok(FlowResult {
            endpoint: x0.to_vec(),
            jacobian: R::one(),
            steps: 0,
        });
    }
    let tf = t.as_f64().abs();
    let mut steps = ((tf * 256.0).ceil() as usize).max(64);
    let mut prev = flow_fixed(x, x0, t, steps, safety)?;
    while steps < opts.max_steps {
        steps *= 2;
        let next = flow_fixed(x, x0, t, steps, safety)?;
        let diff = prev
            .endpoint
            .iter()
            .zip(&next.endpoint)
            .map(|(a, b)| (*a - *b).abs().as_f64())
            .fold(0.0, f64::max);
        prev = next;
        if diff < opts.tol {
            break;
        }
    }
    Ok(prev)
}

/// Smooth compactly supported test function.
pub trait TestFunction: Sync {
    fn value(&self, x: &[f64]) -> f64;
    fn gradient(&self, x: &[f64], out: &mut [f64]);
    /// Closed box containing the support.
    fn support(&self) -> BoxRegion;
}

/// Bump profiles supported by [`Bump`].
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BumpKind {
    /// `Π_j (1 − s_j²)₊²` with `s_j = (x_j − c_j)/ρ_j`.
    Polynomial,
    /// `exp(1 − 1/(1 − |s|²))` inside the unit `s`-ball, `C^∞`.
    Smooth,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bump {
    pub center: Vec<f64>,
    pub radii: Vec<f64>,
    pub kind: BumpKind,
    pub amplitude: f64,
}

impl Bump {
    pub fn polynomial(center: Vec<f64>, radii: Vec<f64>) -> Self {
        Bump {
            center,
            radii,
            kind: BumpKind::Polynomial,
            amplitude: 1.0,
        }
    }

    pub fn smooth(center: Vec<f64>, radii: Vec<f64>) -> Self {
        Bump {
            center,
            radii,
            kind: BumpKind::Smooth,
            amplitude: 1.0,
        }
    }

    pub fn scaled(mut self, a: f64) -> Self {
        self.amplitude *= a;
        self
    }
}

impl TestFunction for Bump {
    fn value(&self, x: &[f64]) -> f64 {
        match self.kind {
            BumpKind::Polynomial => {
                let mut v = self.amplitude;
                for j in 0..x.len() {
                    let s = (x[j] - self.center[j]) / self.radii[j];
                    let a = 1.0 - s * s;
                    if a <= 0.0 {
                        return 0.0;
                    }
                    v *= a * a;
                }
                v
            }
            BumpKind::Smooth => {
                let r2: f64 = (0..x.len())
                    .map(|j| ((x[j] - self.center[j]) / self.radii[j]).powi(2))
                    .sum();
                if r2 >= 1.0 {
                    0.0
                } else {
                    self.amplitude * (1.0 - 1.0 / (1.0 - r2)).exp()
                }
            }
        }
    }

    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let n = x.len();
        match self.kind {
            BumpKind::Polynomial => {
                let mut f = vec![0.0; n];
                let mut df = vec![0.0; n];
                for j in 0..n {
                    let s = (x[j] - self.center[j]) / self.radii[j];
                    let a = 1.0 - s * s;
                    if a <= 0.0 {
                        out.iter_mut().for_each(|o| *o = 0.0);
                        return;
                    }
                    f[j] = a * a;
                    df[j] = 2.0 * a * (-2.0 * s) / self.radii[j];
                }
                for j in 0..n {
                    let mut p = self.amplitude * df[j];
                    for k in 0..n {
                        if k != j {
                            p *= f[k];
                        }
                    }
                    out[j] = p;
                }
            }
            BumpKind::Smooth => {
                let s: Vec<f64> = (0..n)
                    .map(|j| (x[j] - self.center[j]) / self.radii[j])
                    .collect();
                let r2: f64 = s.iter().map(|v| v * v).sum();
                if r2 >= 1.0 {
                    out.iter_mut().for_each(|o| *o = 0.0);
                    return;
                }
                let d = 1.0 - r2;
                let v = self.amplitude * (1.0 - 1.0 / d).exp();
                for j in 0..n {
                    out[j] = v * (-2.0 * s[j] / (d * d)) / self.radii[j];
                }
            }
        }
    }

    fn support(&self) -> BoxRegion {
        BoxRegion {
            lo: self.center.iter().zip(&self.radii).map(|(c, r)| c - r).collect(),
            hi: self.center.iter().zip(&self.radii).map(|(c, r)| c + r).collect(),
        }
    }
}

/// Checks that `supp φ` lies strictly inside the grid box with at least one
/// cell of margin on every side.
pub fn check_compact_support(phi: &dyn TestFunction, u: &GridFunction) -> Result<()> {
    let s = phi.support();
    let g = &u.grid;
    if s.dim() != g.dim() {
        return Err(Error::DimensionMismatch {
            expected: g.dim(),
            got: s.dim(),
        });
    }
    let h = g.spacing();
    for j in 0..g.dim() {
        if s.lo[j] < g.bounds.lo[j] + h[j] || s.hi[j] > g.bounds.hi[j] - h[j] {
            return Err(Error::SupportTouchesBoundary);
        }
    }
    Ok(())
}

/// `⟨D_X u, φ⟩ = −∫ u φ div_ω X ω − ∫ u (Xφ) ω`, midpoint quadrature over the
/// cells of `u`'s grid.
pub fn pair_distributional(
    x: &VectorField<Rational>,
    u: &GridFunction,
    phi: &dyn TestFunction,
    weight: &VolumeWeight,
) -> Result<f64> {
    if x.dim() != u.grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: x.dim(),
            got: u.grid.dim(),
        });
    }
    check_compact_support(phi, u)?;
    let div = divergence(x, weight, Some(&u.grid.bounds))?.to_real::<f64>();
    let xf = x.to_real::<f64>();
    let w = weight.numeric();
    let n = x.dim();
    let g = &u.grid;
    let mut grad = vec![0.0; n];
    let mut xv = vec![0.0; n];
    let mut acc = 0.0;
    for (idx, &uv) in u.values.iter().enumerate() {
        if uv == 0.0 {
            continue;
        }
        let p = g.center(idx);
        let phv = phi.value(&p);
        phi.gradient(&p, &mut grad);
        if phv == 0.0 && grad.iter().all(|v| *v == 0.0) {
            continue;
        }
        xf.eval_into(&p, &mut xv);
        let xphi: f64 = xv.iter().zip(&grad).map(|(a, b)| a * b).sum();
        let om = w.as_ref().map_or(1.0, |e| e.eval(&p));
        acc += -uv * (phv * div.eval(&p) + xphi) * om;
    }
    Ok(acc * g.cell_volume())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::Grid;
    use crate::scalar::q;

    type F = PolyVectorField<Rational>;

    fn heis() -> (F, F) {
        let x1 = F::new(vec![
            Polynomial::constant(q(1, 1)),
            Polynomial::zero(),
            Polynomial::var(1).scale(&q(-1, 2)),
        ]);
        let x2 = F::new(vec![
            Polynomial::zero(),
            Polynomial::constant(q(1, 1)),
            Polynomial::var(0).scale(&q(1, 2)),
        ]);
        (x1, x2)
    }

    #[test]
    fn bracket_examples() {
        let d1 = F::coordinate(2, 0);
        let x1d2 = F::new(vec![Polynomial::zero(), Polynomial::var(0)]);
        assert_eq!(lie_bracket(&d1, &x1d2).unwrap(), F::coordinate(2, 1));
        assert!(lie_bracket(&x1d2, &x1d2).unwrap().is_zero());
        let (a, b) = heis();
        assert_eq!(lie_bracket(&a, &b).unwrap(), F::coordinate(3, 2));
    }

    #[test]
    fn bracket_dimension_mismatch() {
        let err = lie_bracket(&F::coordinate(2, 0), &F::coordinate(3, 0)).unwrap_err();
        assert!(matches!(err, Error::DimensionMismatch { .. }));
    }

    #[test]
    fn divergence_examples() {
        let d1: VectorField<Rational> = F::coordinate(2, 0).into();
        assert!(divergence(&d1, &VolumeWeight::One, None).unwrap().is_zero());
        let (a, _) = heis();
        assert!(divergence(&a.into(), &VolumeWeight::One, None).unwrap().is_zero());
        let x1d1: VectorField<Rational> = F::new(vec![Polynomial::var(0), Polynomial::zero()]).into();
        let d = divergence(&x1d1, &VolumeWeight::One, None).unwrap();
        assert_eq!(d.as_poly().unwrap(), &Polynomial::constant(q(1, 1)));
    }

    #[test]
    fn weighted_divergence() {
        // ω̄ = 1 + x1²; div_ω ∂1 = 2x1/(1+x1²)
        let w = Expr::Poly(&Polynomial::constant(q(1, 1)) + &(&Polynomial::var(0) * &Polynomial::var(0)));
        let weight = VolumeWeight::Density(w);
        let d1: VectorField<Rational> = F::coordinate(1, 0).into();
        let d = divergence(&d1, &weight, Some(&BoxRegion::cube(1, 1.0))).unwrap();
        let v = d.to_real::<f64>().eval(&[0.5]);
        assert!((v - 1.0 / 1.25).abs() < 1e-14);
    }

    #[test]
    fn nonpositive_weight_rejected() {
        let weight = VolumeWeight::Density(Expr::Poly(Polynomial::var(0)));
        let d1: VectorField<Rational> = F::coordinate(1, 0).into();
        let err = divergence(&d1, &weight, Some(&BoxRegion::cube(1, 1.0))).unwrap_err();
        assert!(matches!(err, Error::NonPositiveWeight { .. }));
    }

    #[test]
    fn flow_examples() {
        let d1 = NumericField::<f64>::new(&F::coordinate(3, 0).into());
        let r = flow(&d1, &[0.0, 0.0, 0.0], 0.7, &FlowOptions::default()).unwrap();
        assert!((r.endpoint[0] - 0.7).abs() < 1e-12 && r.endpoint[1] == 0.0);
        assert!((r.jacobian - 1.0).abs() < 1e-14);

        let (a, _) = heis();
        let h1 = NumericField::<f64>::new(&a.into());
        let r = flow(&h1, &[0.0; 3], 1.0, &FlowOptions::default()).unwrap();
        assert!((r.endpoint[0] - 1.0).abs() < 1e-12);
        assert!(r.endpoint[1].abs() < 1e-12 && r.endpoint[2].abs() < 1e-12);

        let lin = NumericField::<f64>::new(&F::new(vec![Polynomial::var(0), Polynomial::zero()]).into());
        let r = flow(&lin, &[1.0, 0.0], 0.5, &FlowOptions::default()).unwrap();
        assert!((r.endpoint[0] - 0.5f64.exp()).abs() < 1e-10);
        assert!((r.jacobian - 0.5f64.exp()).abs() < 1e-10);
    }

    #[test]
    fn flow_at_zero_time_is_identity() {
        let lin = NumericField::<f64>::new(&F::new(vec![Polynomial::var(0), Polynomial::zero()]).into());
        let r = flow(&lin, &[0.3, 0.1], 0.0, &FlowOptions::default()).unwrap();
        assert_eq!(r.endpoint, vec![0.3, 0.1]);
        assert_eq!(r.jacobian, 1.0);
    }

    #[test]
    fn flow_safety_box() {
        let lin = NumericField::<f64>::new(&F::new(vec![Polynomial::var(0), Polynomial::zero()]).into());
        let opts = FlowOptions {
            safety_box: Some(BoxRegion::cube(2, 2.0)),
            ..Default::default()
        };
        match flow(&lin, &[1.0, 0.0], 2.0, &opts) {
            Err(Error::LeftSafetyBox { time }) => assert!((time - 2f64.ln()).abs() < 0.02),
            other => panic!("expected exit, got {other:?}"),
        }
    }

    #[test]
    fn pairing_examples() {
        let grid = Grid::uniform(BoxRegion::cube(2, 1.0), 200);
        let d1: VectorField<Rational> = F::coordinate(2, 0).into();
        let phi = Bump::polynomial(vec![0.1, -0.05], vec![0.5, 0.6]);
        let one = GridFunction::constant(grid.clone(), 1.0);
        let v = pair_distributional(&d1, &one, &phi, &VolumeWeight::One).unwrap();
        assert!(v.abs() < 1e-10);

        let u = grid.sample(|x| x[0]);
        let int_phi = grid.sample(|x| phi.value(x)).integral();
        let v = pair_distributional(&d1, &u, &phi, &VolumeWeight::One).unwrap();
        assert!((v - int_phi).abs() < 1e-3 * int_phi.abs());
    }

    #[test]
    fn pairing_rejects_support_on_boundary() {
        let grid = Grid::uniform(BoxRegion::cube(2, 1.0), 20);
        let d1: VectorField<Rational> = F::coordinate(2, 0).into();
        let phi = Bump::polynomial(vec![0.8, 0.0], vec![0.5, 0.5]);
        let one = GridFunction::constant(grid, 1.0);
        assert_eq!(
            pair_distributional(&d1, &one, &phi, &VolumeWeight::One).unwrap_err(),
            Error::SupportTouchesBoundary
        );
    }
}
