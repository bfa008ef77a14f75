//! Built-in example structures.

use crate::error::{Error, Result};
use crate::parse::parse_field;
use crate::structure::SubRiemannianStructure;
use crate::vectorfield::{PolyVectorField, VectorField, VolumeWeight};

fn build(name: &str, dim: usize, fields: &[&str]) -> SubRiemannianStructure {
    let frame: Vec<VectorField<_>> = fields
        .iter()
        .map(|s| parse_field(s, dim).expect("built-in field parses"))
        .collect();
    SubRiemannianStructure::new(name, frame, VolumeWeight::One).expect("built-in frame is valid")
}

/// `(∂_1, …, ∂_n)`.
pub fn euclidean(n: usize) -> SubRiemannianStructure {
    let frame = (0..n).map(|j| PolyVectorField::coordinate(n, j)).collect();
    SubRiemannianStructure::from_poly(format!("euclidean:{n}"), frame).expect("valid")
}

/// `X1 = ∂1 − x2/2 ∂3`, `X2 = ∂2 + x1/2 ∂3`.
pub fn heisenberg() -> SubRiemannianStructure {
    build("heisenberg", 3, &["d1 - 1/2*x2*d3", "d2 + 1/2*x1*d3"])
}

/// `X1 = ∂1`, `X2 = x1 ∂2`.
pub fn grushin() -> SubRiemannianStructure {
    build("grushin", 2, &["d1", "x1*d2"])
}

/// `X1 = ∂1`, `X2 = x1^α ∂2` for an integer `α ≥ 1`.
pub fn grushin_alpha(alpha: u32) -> Result<SubRiemannianStructure> {
    if alpha == 0 {
        return Err(Error::invalid("grushin_alpha needs α ≥ 1"));
    }
    let x2 = format!("x1^{alpha}*d2");
    Ok(build(&format!("grushin_alpha:{alpha}"), 2, &["d1", &x2]))
}

/// Heisenberg frame plus `X3 = x3² ∂3`; singular on `{x3 = 0}`.
pub fn singruppo() -> SubRiemannianStructure {
    build(
        "singruppo",
        3,
        &["d1 - 1/2*x2*d3", "d2 + 1/2*x1*d3", "x3^2*d3"],
    )
}

/// `X1 = cos θ ∂x + sin θ ∂y`, `X2 = ∂θ` on coordinates `(x, y, θ)`.
pub fn rototranslation() -> SubRiemannianStructure {
    build("rototranslation", 3, &["cos(x3)*d1 + sin(x3)*d2", "d3"])
}

/// Standard contact distribution on ℝ^{2k+1}: `∂_{x_i} − y_i/2 ∂_z` and
/// `∂_{y_i} + x_i/2 ∂_z`, coordinates ordered `(x_1..x_k, y_1..y_k, z)`.
pub fn contact_corank1(k: usize) -> Result<SubRiemannianStructure> {
    if k == 0 {
        return Err(Error::invalid("contact structure needs k ≥ 1"));
    }
    let n = 2 * k + 1;
    let mut fields = Vec::new();
    for i in 1..=k {
        fields.push(format!("d{i} - 1/2*x{}*d{n}", k + i));
    }
    for i in 1..=k {
        fields.push(format!("d{} + 1/2*x{i}*d{n}", k + i));
    }
    let refs: Vec<&str> = fields.iter().map(String::as_str).collect();
    Ok(build(&format!("contact_corank1_standard:{k}"), n, &refs))
}

pub const BUILTIN_NAMES: &[&str] = &[
    "euclidean:<n>",
    "heisenberg",
    "grushin",
    "grushin_alpha:<a>",
    "singruppo",
    "rototranslation",
    "contact_corank1_standard[:<k>]",
];

/// Resolves names such as `heisenberg`, `euclidean:3`, `grushin_alpha:2`.
pub fn builtin(name: &str) -> Result<SubRiemannianStructure> {
    let (base, arg) = match name.split_once(':') {
        Some((b, a)) => (b.trim(), Some(a.trim())),
        None => (name.trim(), None),
    };
    let int_arg = |default: Option<usize>| -> Result<usize> {
        match arg {
            Some(a) => a
                .parse::<usize>()
                .map_err(|_| Error::invalid(format!("bad parameter '{a}' for {base}"))),
            None => default.ok_or_else(|| Error::invalid(format!("{base} needs a parameter"))),
        }
    };
    match base {
        "euclidean" => {
            let n = int_arg(None)?;
            if n == 0 {
                return Err(Error::invalid("euclidean needs n ≥ 1"));
            }
            Ok(euclidean(n))
        }
        "heisenberg" => Ok(heisenberg()),
        "grushin" => Ok(grushin()),
        "grushin_alpha" => grushin_alpha(int_arg(None)? as u32),
        "singruppo" => Ok(singruppo()),
        "rototranslation" => Ok(rototranslation()),
        "contact_corank1_standard" | "contact" => contact_corank1(int_arg(Some(1))?),
        _ => Err(Error::invalid(format!(
            "unknown structure '{name}'; built-ins: {}",
            BUILTIN_NAMES.join(", ")
        ))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn resolves_names() {
        assert_eq!(builtin("euclidean:3").unwrap().dim(), 3);
        assert_eq!(builtin("contact_corank1_standard:2").unwrap().dim(), 5);
        assert_eq!(builtin("contact").unwrap().rank(), 2);
        assert!(builtin("grushin_alpha:3").unwrap().is_polynomial());
        assert!(!builtin("rototranslation").unwrap().is_polynomial());
        assert!(builtin("nope").is_err());
        assert!(builtin("euclidean").is_err());
    }
}
