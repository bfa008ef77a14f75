//! Sub-Riemannian geometry toolkit: polynomial frames and Lie brackets,
//! flags and weights, nilpotent approximations, Carnot–Carathéodory
//! distances, tangent Carnot groups, perimeters of level sets and blowups.
//!
//! The symbolic layer is generic over [`Scalar`] (exact rationals, `f32`,
//! `f64`, polynomials); the aliases below fix the common choices.

pub mod blowup;
pub mod carnot;
pub mod ccdist;
pub mod compiled;
pub mod error;
pub mod expr;
pub mod grid;
pub mod library;
pub mod linalg;
pub mod metric;
pub mod nilpotent;
pub mod parse;
pub mod perimeter;
pub mod poly;
pub mod scalar;
pub mod structure;
pub mod vectorfield;

pub use error::{Error, Result};
pub use scalar::{q, Rational, Real, Scalar};

/// Exact polynomial.
pub type Poly = poly::Polynomial<Rational>;
/// Exact polynomial vector field.
pub type PolyField = vectorfield::PolyVectorField<Rational>;
/// Exact vector field with polynomial or transcendental coefficients.
pub type Field = vectorfield::VectorField<Rational>;
/// Double-precision polynomial vector field.
pub type PolyField64 = vectorfield::PolyVectorField<f64>;
/// Single-precision polynomial vector field.
pub type PolyField32 = vectorfield::PolyVectorField<f32>;
/// Double-precision evaluator of a frame.
pub type Frame64 = structure::NumericFrame<f64>;
