//! Pointwise quadratic form `G_x`, minimal-norm control lift `P_x` and the
//! scalar product `g_x` induced by a frame.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{kernel_basis, min_norm_solve};
use crate::scalar::Real;
use crate::structure::{NumericFrame, SubRiemannianStructure};

pub const DEFAULT_SPAN_TOL: f64 = 1e-8;
const SVD_CUT: f64 = 1e-12;

/// A value of `G_x`: either finite or the tagged `+∞` for vectors outside
/// the horizontal space.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase", tag = "kind", content = "value")]
pub enum FormValue<R> {
    Finite(R),
    Infinite,
}

impl<R: Real> FormValue<R> {
    pub fn is_finite(&self) -> bool {
        matches!(self, FormValue::Finite(_))
    }

    pub fn finite(&self) -> Option<R> {
        match self {
            FormValue::Finite(v) => Some(*v),
            FormValue::Infinite => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MetricEval<R> {
    pub value: FormValue<R>,
    /// `P_x(v)`, present only when the value is finite.
    pub controls: Option<Vec<R>>,
    /// Euclidean distance from `v` to the span of the frame at `x`.
    pub residual: R,
}

fn check_dims<R>(frame: &NumericFrame<R>, x: &[R], v: &[R]) -> Result<()>
where
    R: Real,
{
    let n = frame.dim();
    for len in [x.len(), v.len()] {
        if len != n {
            return Err(Error::DimensionMismatch { expected: n, got: len });
        }
    }
    Ok(())
}

fn norm<R: Real>(v: &[R]) -> R {
    v.iter().fold(R::zero(), |a, &b| a + b * b).sqrt()
}

/// `G_x(v)` for a compiled frame.
pub fn quadratic_form_frame<R: Real>(
    frame: &NumericFrame<R>,
    x: &[R],
    v: &[R],
    span_tol: R,
) -> Result<MetricEval<R>> {
    if !(span_tol > R::zero()) {
        return Err(Error::invalid("span_tol must be positive"));
    }
    check_dims(frame, x, v)?;
    let a = frame.matrix(x);
    let b = DVector::from_column_slice(v);
    let c = min_norm_solve(&a, &b, R::lit(SVD_CUT));
    let residual = (&a * &c - &b).norm();
    if residual > span_tol * norm(v) {
        return Ok(MetricEval {
            value: FormValue::Infinite,
            controls: None,
            residual,
        });
    }
    Ok(MetricEval {
        value: FormValue::Finite(c.norm_squared()),
        controls: Some(c.iter().copied().collect()),
        residual,
    })
}

pub fn quadratic_form<R: Real>(
    s: &SubRiemannianStructure,
    x: &[R],
    v: &[R],
    span_tol: R,
) -> Result<MetricEval<R>> {
    quadratic_form_frame(&s.numeric(), x, v, span_tol)
}

fn lift<R: Real>(frame: &NumericFrame<R>, x: &[R], v: &[R], span_tol: R) -> Result<Vec<R>> {
    let e = quadratic_form_frame(frame, x, v, span_tol)?;
    e.controls.ok_or_else(|| Error::NotInSpan {
        point: x.iter().map(|c| c.as_f64()).collect(),
        residual: e.residual.as_f64(),
    })
}

/// `P_x(v)`: the minimum-norm controls with `Σ c_i X_i(x) = v`.
pub fn min_norm_controls<R: Real>(
    s: &SubRiemannianStructure,
    x: &[R],
    v: &[R],
    span_tol: R,
) -> Result<Vec<R>> {
    lift(&s.numeric(), x, v, span_tol)
}

/// `g_x(v, w) = ⟨P_x(v), P_x(w)⟩`.
pub fn scalar_product<R: Real>(
    s: &SubRiemannianStructure,
    x: &[R],
    v: &[R],
    w: &[R],
    span_tol: R,
) -> Result<R> {
    let frame = s.numeric();
    let pv = lift(&frame, x, v, span_tol)?;
    let pw = lift(&frame, x, w, span_tol)?;
    Ok(pv.iter().zip(&pw).fold(R::zero(), |a, (&p, &q)| a + p * q))
}

/// Orthonormal basis of the kernel of the frame matrix at `x`.
pub fn frame_kernel<R: Real>(s: &SubRiemannianStructure, x: &[R]) -> Vec<Vec<R>> {
    let a: DMatrix<R> = s.numeric().matrix(x);
    kernel_basis(&a, R::lit(1e-9))
        .into_iter()
        .map(|k| k.iter().copied().collect())
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;
    use crate::parse::parse_field;
    use crate::vectorfield::VolumeWeight;

    #[test]
    fn grushin_form() {
        let g = library::grushin();
        let e = quadratic_form::<f64>(&g, &[2.0, 0.3], &[1.0, 3.0], 1e-8).unwrap();
        let v = e.value.finite().unwrap();
        assert!((v - (1.0 + 9.0 / 4.0)).abs() < 1e-12);
        let e = quadratic_form(&g, &[0.0, 0.3], &[0.0, 1.0], 1e-8).unwrap();
        assert_eq!(e.value, FormValue::Infinite);
        assert!(e.controls.is_none());
        let sp = scalar_product::<f64>(&g, &[2.0, 0.0], &[1.0, 2.0], &[3.0, -1.0], 1e-8).unwrap();
        assert!((sp - (3.0 - 2.0 / 4.0)).abs() < 1e-12);
        let z = scalar_product(&g, &[2.0, 0.0], &[1.0, 2.0], &[0.0, 0.0], 1e-8).unwrap();
        assert_eq!(z, 0.0);
    }

    #[test]
    fn generalized_grushin_lift() {
        let x1: f64 = 1.7;
        for alpha in 1..4u32 {
            let g = library::grushin_alpha(alpha).unwrap();
            let c = min_norm_controls(&g, &[x1, 0.2], &[0.0, x1], 1e-8).unwrap();
            assert!(c[0].abs() < 1e-12);
            assert!((c[1] - x1.powi(1 - alpha as i32)).abs() < 1e-12);
            let v = quadratic_form(&g, &[x1, 0.2], &[0.0, x1], 1e-8).unwrap().value;
            let want = x1.powi(2 - 2 * alpha as i32);
            assert!((v.finite().unwrap() - want).abs() < 1e-12 * want.max(1.0));
        }
    }

    #[test]
    fn redundant_frame() {
        let f = parse_field("d1", 1).unwrap();
        let s = SubRiemannianStructure::new("r", vec![f.clone(), f], VolumeWeight::One).unwrap();
        let c = min_norm_controls::<f64>(&s, &[0.0], &[1.0], 1e-8).unwrap();
        assert!((c[0] - 0.5).abs() < 1e-14 && (c[1] - 0.5).abs() < 1e-14);
        let k = frame_kernel::<f64>(&s, &[0.0]);
        assert_eq!(k.len(), 1);
        assert!((c[0] * k[0][0] + c[1] * k[0][1]).abs() < 1e-12);
    }

    #[test]
    fn independent_frame_unit_lift() {
        let h = library::heisenberg();
        let x = [0.4, -0.3, 1.0];
        let x1 = h.numeric::<f64>().fields[0].eval(&x);
        let c = min_norm_controls(&h, &x, &x1, 1e-8).unwrap();
        assert!((c[0] - 1.0).abs() < 1e-12 && c[1].abs() < 1e-12);
    }

    #[test]
    fn works_in_single_precision() {
        let g = library::grushin();
        let e = quadratic_form::<f32>(&g, &[2.0, 0.0], &[1.0, 2.0], 1e-5).unwrap();
        assert!((e.value.finite().unwrap() - 2.0).abs() < 1e-5);
    }
}
