//! Blowups `E_r = δ_{1/r} E` of a set at a boundary point of a step-2
//! structure: convergence to the predicted vertical halfspace, monotonicity
//! and invariance pairings, and the two sides of the density limit.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::carnot::{group_law_from_flows, halfspace_perimeter_unit_ball, vertical_halfspace, HalfspacePerimeter, VerticalHalfspace};
use crate::ccdist::{unit_ball_field, BallOptions, DistanceField, DistanceSolver, Lattice, SolverOptions};
use crate::error::{Error, Result};
use crate::grid::{BoxRegion, Grid};
use crate::nilpotent::{truncate, Grading, NilpotentApprox};
use crate::perimeter::{density_ratio, dual_normal, DensityRatio, SetRep};
use crate::poly::Polynomial;
use crate::scalar::{rational_from_f64, Scalar};
use crate::structure::SubRiemannianStructure;
use crate::vectorfield::{divergence, pair_distributional, Bump, PolyVectorField, TestFunction, VectorField, VolumeWeight};

/// `{ z : φ(p + δ_r z) < 0 }` on the box `δ_{1/r}(box − p)`.
pub fn rescale_set(set: &SetRep, p: &[f64], g: &Grading, r: f64) -> Result<SetRep> {
    let n = set.dim();
    if p.len() != n || g.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: if p.len() != n { p.len() } else { g.dim() },
        });
    }
    if !(r > 0.0) {
        return Err(Error::invalid("blowup radius must be positive"));
    }
    let rq = rational_from_f64(r).ok_or_else(|| Error::invalid("radius must be finite"))?;
    let subs = (0..n)
        .map(|j| {
            let pj = rational_from_f64(p[j]).ok_or_else(|| Error::invalid("point must be finite"))?;
            Ok(&Polynomial::constant(pj) + &Polynomial::var(j).scale(&rq.powi(g.weight(j))))
        })
        .collect::<Result<Vec<_>>>()?;
    let scale = |j: usize| r.powi(g.weight(j) as i32);
    let bounds = BoxRegion::new(
        (0..n).map(|j| (set.bounds.lo[j] - p[j]) / scale(j)).collect(),
        (0..n).map(|j| (set.bounds.hi[j] - p[j]) / scale(j)).collect(),
    )?;
    let mut out = SetRep::new(set.level.substitute(&subs), bounds, set.resolution)?;
    out.grad_floor = set.grad_floor;
    Ok(out)
}

/// Sign changes of `f` on `[a, b]` sampled at `k + 1` points, refined by
/// bisection. Returns the sorted breakpoints and whether `a` is inside.
fn column_breaks(f: &dyn Fn(f64) -> f64, a: f64, b: f64, k: usize) -> (bool, Vec<f64>) {
    let h = (b - a) / k as f64;
    let mut out = Vec::new();
    let mut prev = f(a);
    let start = prev < 0.0;
    for i in 1..=k {
        let t = if i == k { b } else { a + i as f64 * h };
        let v = f(t);
        if (v < 0.0) != (prev < 0.0) {
            let (mut lo, mut hi) = (t - h, t);
            let lo_in = prev < 0.0;
            for _ in 0..60 {
                let mid = 0.5 * (lo + hi);
                if (f(mid) < 0.0) == lo_in {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            out.push(0.5 * (lo + hi));
        }
        prev = v;
    }
    (start, out)
}

/// Length of `{φ_A < 0} Δ {φ_B < 0}` along one column.
fn xor_length(a: (bool, Vec<f64>), b: (bool, Vec<f64>), lo: f64, hi: f64) -> f64 {
    let mut pts: Vec<(f64, usize)> = a.1.iter().map(|&t| (t, 0)).chain(b.1.iter().map(|&t| (t, 1))).collect();
    pts.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap());
    let mut state = [a.0, b.0];
    let mut last = lo;
    let mut acc = 0.0;
    for (t, which) in pts {
        if state[0] != state[1] {
            acc += t - last;
        }
        state[which] = !state[which];
        last = t;
    }
    if state[0] != state[1] {
        acc += hi - last;
    }
    acc
}

/// Volume of `(A Δ B) ∩ window`: midpoint quadrature over the cross-section
/// orthogonal to the axis where `∇φ_B` is largest at the window center, and
/// bracketed root finding along that axis (`resolution` samples per axis).
pub fn l1loc_gap(a: &SetRep, b: &SetRep, window: &BoxRegion, resolution: usize) -> Result<f64> {
    let n = window.dim();
    if a.dim() != n || b.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: a.dim().min(b.dim()),
        });
    }
    if resolution < 2 {
        return Err(Error::invalid("resolution must be at least 2"));
    }
    let c = window.center();
    let mut grad = vec![0.0; n];
    b.gradient(&c, &mut grad);
    let axis = (0..n)
        .max_by(|&i, &j| grad[i].abs().partial_cmp(&grad[j].abs()).unwrap())
        .expect("n ≥ 1");
    let others: Vec<usize> = (0..n).filter(|&j| j != axis).collect();
    let h: Vec<f64> = (0..n).map(|j| (window.hi[j] - window.lo[j]) / resolution as f64).collect();
    let columns = resolution.pow(others.len() as u32);
    let (lo, hi) = (window.lo[axis], window.hi[axis]);
    let lengths: Vec<f64> = (0..columns)
        .into_par_iter()
        .map(|k| {
            let mut z = vec![0.0; n];
            let mut r = k;
            for &j in &others {
                z[j] = window.lo[j] + ((r % resolution) as f64 + 0.5) * h[j];
                r /= resolution;
            }
            let along = |s: &SetRep, t: f64| {
                let mut w = z.clone();
                w[axis] = t;
                s.value(&w)
            };
            let fa = |t: f64| along(a, t);
            let fb = |t: f64| along(b, t);
            xor_length(
                column_breaks(&fa, lo, hi, resolution),
                column_breaks(&fb, lo, hi, resolution),
                lo,
                hi,
            )
        })
        .collect();
    let section: f64 = others.iter().map(|&j| h[j]).product();
    Ok(lengths.iter().sum::<f64>() * section)
}

/// `∫ 1_set div(ψ X) dz` on `grid`. The set is monotone along `X` when this
/// is `≤ 0` for every `ψ ≥ 0`.
pub fn monotonicity_pairing(set: &SetRep, x: &VectorField<crate::scalar::Rational>, psi: &dyn TestFunction, grid: &Grid) -> Result<f64> {
    for z in grid.centers() {
        if psi.value(&z) < 0.0 {
            return Err(Error::NegativeTestFunction { point: z });
        }
    }
    let u = set.indicator_on(grid);
    Ok(-pair_distributional(x, &u, psi, &VolumeWeight::One)?)
}

/// `h_max · ∫ |div(ψ X)| dz`: the size of the boundary-cut error of the
/// midpoint rule used by [`monotonicity_pairing`].
pub fn pairing_tolerance(x: &VectorField<crate::scalar::Rational>, psi: &dyn TestFunction, grid: &Grid) -> Result<f64> {
    let div = divergence(x, &VolumeWeight::One, None)?.to_real::<f64>();
    let xf = x.to_real::<f64>();
    let n = grid.dim();
    let mut g = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut acc = 0.0;
    for z in grid.centers() {
        let p = psi.value(&z);
        psi.gradient(&z, &mut g);
        if p == 0.0 && g.iter().all(|a| *a == 0.0) {
            continue;
        }
        xf.eval_into(&z, &mut v);
        let xp: f64 = v.iter().zip(&g).map(|(a, b)| a * b).sum();
        acc += (p * div.eval(&z) + xp).abs();
    }
    let hmax = grid.spacing().into_iter().fold(0.0, f64::max);
    Ok(hmax * acc * grid.cell_volume())
}

/// Centered and offset bumps `Π (1 − s_j²)₊²` inside `window`.
pub fn standard_bumps(window: &BoxRegion) -> Vec<Bump> {
    let c = window.center();
    let half: Vec<f64> = window.lo.iter().zip(&window.hi).map(|(l, h)| 0.5 * (h - l)).collect();
    let shifted = |s: f64| -> Vec<f64> { c.iter().zip(&half).map(|(c, h)| c + s * h).collect() };
    let radii = |s: f64| -> Vec<f64> { half.iter().map(|h| s * h).collect() };
    vec![
        Bump::polynomial(c.clone(), radii(0.6)),
        Bump::polynomial(shifted(0.2), radii(0.5)),
        Bump::polynomial(shifted(-0.2), radii(0.5)),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BlowupOptions {
    /// Decreasing radii.
    pub radii: Vec<f64>,
    /// Half-widths of the comparison window; defaults to the weighted box
    /// `{|z_j| ≤ 1}`.
    pub window: Option<Vec<f64>>,
    /// Voxels per axis for gaps, pairings and density grids.
    pub resolution: usize,
    /// Whether to compute the density ratios (requires distance fields).
    pub density: bool,
    pub ball: BallOptions,
    /// Lattice nodes per axis for per-radius distance fields when the
    /// structure is not itself homogeneous.
    pub local_nodes: usize,
    pub solver: SolverOptions,
}

impl Default for BlowupOptions {
    fn default() -> Self {
        BlowupOptions {
            radii: vec![0.5, 0.25, 0.125, 0.0625],
            window: None,
            resolution: 128,
            density: true,
            ball: BallOptions::default(),
            local_nodes: 9,
            solver: SolverOptions::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlowupReport {
    pub radii: Vec<f64>,
    pub dual_normal: Vec<f64>,
    pub predicted: VerticalHalfspace,
    pub window: BoxRegion,
    pub window_volume: f64,
    pub l1_gap: Vec<f64>,
    /// Per radius, one value per bump.
    pub monotone_pairings: Vec<Vec<f64>>,
    /// Per radius, bumps × orthogonal directions (direction-major).
    pub invariance_pairings: Vec<Vec<f64>>,
    /// Largest [`pairing_tolerance`] over bumps and directions.
    pub quadrature_tolerance: f64,
    pub density_lhs: Vec<Option<f64>>,
    pub density_rhs: Option<f64>,
    pub density_details: Vec<Option<DensityRatio>>,
    pub halfspace: Option<HalfspacePerimeter>,
    /// Radii whose ball masks had undecided voxels.
    pub dropped: Vec<f64>,
}

/// Orthonormal basis of `ν^⊥` in `ℝ^m`.
fn orthogonal_complement(nu: &[f64]) -> Vec<Vec<f64>> {
    let m = nu.len();
    let mut basis: Vec<Vec<f64>> = vec![nu.to_vec()];
    for k in 0..m {
        let mut v = vec![0.0; m];
        v[k] = 1.0;
        for b in &basis {
            let d: f64 = v.iter().zip(b).map(|(a, c)| a * c).sum();
            for (vi, bi) in v.iter_mut().zip(b) {
                *vi -= d * bi;
            }
        }
        let len = v.iter().map(|a| a * a).sum::<f64>().sqrt();
        if len > 1e-9 {
            basis.push(v.iter().map(|a| a / len).collect());
        }
    }
    basis.remove(0);
    basis
}

fn combine_fields(na: &NilpotentApprox, c: &[f64]) -> Result<VectorField<crate::scalar::Rational>> {
    let n = na.grading.dim();
    let mut acc = PolyVectorField::zero(n);
    for (f, &ci) in na.truncated.iter().zip(c) {
        if ci != 0.0 {
            let q = rational_from_f64(ci).ok_or_else(|| Error::invalid("coefficients must be finite"))?;
            acc = acc.add(&f.scale(&q))?;
        }
    }
    Ok(acc.into())
}

/// The blowup experiment at the origin of privileged coordinates.
pub fn blowup_run(s: &SubRiemannianStructure, set: &SetRep, g: &Grading, opts: &BlowupOptions) -> Result<BlowupReport> {
    let n = s.dim();
    if set.dim() != n || g.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: set.dim(),
        });
    }
    if opts.radii.is_empty() || opts.radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::invalid("blowup radii must be positive"));
    }
    let p = vec![0.0; n];
    let na = truncate(s, g)?;
    group_law_from_flows(&na)?;
    let nu = dual_normal(s, set, &p)?;
    let predicted = vertical_halfspace(&nu, &na)?;
    let window = BoxRegion::symmetric(opts.window.as_deref().unwrap_or(&vec![1.0; n]));
    let grid = Grid::uniform(window.clone(), opts.resolution);
    let f_set = SetRep::from_poly(predicted.level_polynomial(), window.clone(), opts.resolution)?;
    let monotone_field = combine_fields(&na, &nu)?;
    let invariant_fields = orthogonal_complement(&nu)
        .iter()
        .map(|mu| combine_fields(&na, mu))
        .collect::<Result<Vec<_>>>()?;
    let bumps = standard_bumps(&window);
    let mut quadrature_tolerance: f64 = 0.0;
    for b in &bumps {
        quadrature_tolerance = quadrature_tolerance.max(pairing_tolerance(&monotone_field, b, &grid)?);
        for x in &invariant_fields {
            quadrature_tolerance = quadrature_tolerance.max(pairing_tolerance(x, b, &grid)?);
        }
    }

    type Row = (f64, Vec<f64>, Vec<f64>);
    let rows: Vec<Row> = opts
        .radii
        .par_iter()
        .map(|&r| {
            let er = rescale_set(set, &p, g, r)?.with_bounds(window.clone())?;
            let gap = l1loc_gap(&er, &f_set, &window, opts.resolution)?;
            let mono = bumps
                .iter()
                .map(|b| monotonicity_pairing(&er, &monotone_field, b, &grid))
                .collect::<Result<Vec<_>>>()?;
            let mut inv = Vec::new();
            for x in &invariant_fields {
                for b in &bumps {
                    inv.push(monotonicity_pairing(&er, x, b, &grid)?);
                }
            }
            Ok((gap, mono, inv))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut density_lhs = vec![None; opts.radii.len()];
    let mut density_details = vec![None; opts.radii.len()];
    let mut density_rhs = None;
    let mut halfspace = None;
    let mut dropped = Vec::new();
    if opts.density {
        let hat = na.structure(format!("{}^", s.name))?;
        let hat_solver = DistanceSolver::new(&hat, opts.solver.clone())?;
        let hat_field = unit_ball_field(&hat_solver, g, &opts.ball)?;
        let homogeneous = na.remainders.iter().all(|r| r.is_zero());
        let local = set.with_resolution(opts.resolution)?;
        for (k, &r) in opts.radii.iter().enumerate() {
            let d = if homogeneous {
                density_ratio(s, &local, &hat_field, r)?
            } else {
                let bounds = hat_field
                    .ball_bounds(r, 0.5)
                    .ok_or_else(|| Error::NonConvergence("unit ball field has no solved nodes".into()))?;
                let solver = DistanceSolver::new(s, opts.solver.clone())?;
                let lattice = Lattice::uniform(bounds, opts.local_nodes)?;
                let field = DistanceField::compute(&solver, &p, lattice, &opts.ball.sweep)?;
                density_ratio(s, &local, &field, r)?
            };
            if d.unknown > 0 {
                dropped.push(r);
            } else {
                density_lhs[k] = Some(d.ratio);
            }
            density_details[k] = Some(d);
        }
        let bounds = hat_field
            .ball_bounds(1.0, 0.15)
            .ok_or_else(|| Error::NonConvergence("unit ball field has no solved nodes".into()))?;
        let hgrid = Grid::uniform(bounds, opts.resolution);
        let hp = halfspace_perimeter_unit_ball(&predicted, &na, &hat_field, &hgrid)?;
        density_rhs = Some(hp.ratio);
        halfspace = Some(hp);
    }

    Ok(BlowupReport {
        radii: opts.radii.clone(),
        dual_normal: nu,
        predicted,
        window_volume: window.volume(),
        window,
        l1_gap: rows.iter().map(|r| r.0).collect(),
        monotone_pairings: rows.iter().map(|r| r.1.clone()).collect(),
        invariance_pairings: rows.iter().map(|r| r.2.clone()).collect(),
        quadrature_tolerance,
        density_lhs,
        density_rhs,
        density_details,
        halfspace,
        dropped,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;
    use crate::parse::parse_scalar;

    #[test]
    fn rescaling_is_exact_composition() {
        let g = Grading::new(vec![1, 1, 2]).unwrap();
        let set = SetRep::parse("x1 + x3^2", BoxRegion::cube(3, 1.0), 8).unwrap();
        let r = rescale_set(&set, &[0.0; 3], &g, 0.5).unwrap();
        assert_eq!(r.level, parse_scalar("1/2*x1 + 1/16*x3^2", Some(3)).unwrap());
        assert_eq!(r.bounds.hi, vec![2.0, 2.0, 4.0]);
        let same = rescale_set(&set, &[0.0; 3], &g, 1.0).unwrap();
        assert_eq!(same.level, set.level);
    }

    #[test]
    fn gap_examples() {
        let w = BoxRegion::cube(3, 1.0);
        let a = SetRep::parse("x1", w.clone(), 8).unwrap();
        let b = SetRep::parse("x1 - 1/10", w.clone(), 8).unwrap();
        assert_eq!(l1loc_gap(&a, &a, &w, 16).unwrap(), 0.0);
        let ab = l1loc_gap(&a, &b, &w, 16).unwrap();
        assert!((ab - 0.4).abs() < 1e-9, "{ab}");
        assert!((ab - l1loc_gap(&b, &a, &w, 16).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn pairing_examples() {
        let w = BoxRegion::cube(2, 1.0);
        let grid = Grid::uniform(w.clone(), 128);
        let f = SetRep::parse("-x1", w.clone(), 128).unwrap();
        let e = library::euclidean(2);
        let psi = Bump::polynomial(vec![0.0, 0.0], vec![0.5, 0.5]);
        let mono = monotonicity_pairing(&f, &e.frame()[0], &psi, &grid).unwrap();
        let line: f64 = 16.0 / 15.0 * 0.5;
        assert!((mono + line).abs() < 1e-3, "{mono} vs {}", -line);
        let inv = monotonicity_pairing(&f, &e.frame()[1], &psi, &grid).unwrap();
        assert!(inv.abs() < 1e-12);
        let full = SetRep::parse("-1", w, 128).unwrap();
        assert!(monotonicity_pairing(&full, &e.frame()[0], &psi, &grid).unwrap().abs() < 1e-12);
    }

    #[test]
    fn characteristic_points_are_refused() {
        let s = library::heisenberg();
        let g = Grading::at_origin(&s).unwrap();
        let set = SetRep::parse("x3 - x1^2 - x2^2", BoxRegion::cube(3, 1.0), 16).unwrap();
        let opts = BlowupOptions {
            density: false,
            ..BlowupOptions::default()
        };
        let err = blowup_run(&s, &set, &g, &opts).unwrap_err();
        assert!(matches!(err, Error::CharacteristicPoint { .. }), "{err}");
    }

    #[test]
    fn halfspace_blowup_is_stationary() {
        let s = library::heisenberg();
        let g = Grading::at_origin(&s).unwrap();
        let set = SetRep::parse("x1", BoxRegion::cube(3, 1.0), 32).unwrap();
        let opts = BlowupOptions {
            density: false,
            resolution: 32,
            ..BlowupOptions::default()
        };
        let r = blowup_run(&s, &set, &g, &opts).unwrap();
        assert_eq!(r.dual_normal, vec![-1.0, 0.0]);
        assert!(r.l1_gap.iter().all(|v| *v == 0.0), "{:?}", r.l1_gap);
        assert!(r.monotone_pairings.iter().flatten().all(|v| *v < 0.0));
    }
}
