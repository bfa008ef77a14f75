//! Sub-Riemannian perimeter of smooth level-set regions `E = {φ < 0}`:
//! surface, flow and mollified estimators, dual and geometric normals,
//! reduced-boundary scores and density ratios.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ccdist::DistanceField;
use crate::compiled::{CompiledFrame, CompiledFunction};
use crate::error::{Error, Result};
use crate::expr::Expr;
use crate::grid::{BoxRegion, Grid, GridFunction};
use crate::metric::{quadratic_form, FormValue};
use crate::parse::parse_scalar;
use crate::poly::Polynomial;
use crate::scalar::Rational;
use crate::structure::SubRiemannianStructure;
use crate::vectorfield::{VectorField, VolumeWeight};

/// Default lower bound for `|∇φ|` on the boundary.
pub const DEFAULT_GRAD_FLOOR: f64 = 1e-9;
/// `|N_X|` below this marks a characteristic point.
pub const CHARACTERISTIC_TOL: f64 = 1e-10;

/// The region `E = {φ < 0}` observed inside `bounds` at `resolution` voxels
/// per axis.
#[derive(Debug, Clone)]
pub struct SetRep {
    pub level: Expr<Rational>,
    pub bounds: BoxRegion,
    pub resolution: usize,
    pub grad_floor: f64,
    compiled: CompiledFunction,
}

impl SetRep {
    pub fn new(level: Expr<Rational>, bounds: BoxRegion, resolution: usize) -> Result<Self> {
        let n = bounds.dim();
        if level.nvars() > n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: level.nvars(),
            });
        }
        if resolution < 2 {
            return Err(Error::invalid("resolution must be at least 2"));
        }
        Ok(SetRep {
            compiled: CompiledFunction::new(&level, n),
            level,
            bounds,
            resolution,
            grad_floor: DEFAULT_GRAD_FLOOR,
        })
    }

    pub fn from_poly(level: Polynomial<Rational>, bounds: BoxRegion, resolution: usize) -> Result<Self> {
        Self::new(Expr::Poly(level), bounds, resolution)
    }

    /// Parses the level function, e.g. `x1 + x3^2`.
    pub fn parse(level: &str, bounds: BoxRegion, resolution: usize) -> Result<Self> {
        let dim = bounds.dim();
        Self::new(parse_scalar(level, Some(dim))?, bounds, resolution)
    }

    pub fn with_bounds(&self, bounds: BoxRegion) -> Result<Self> {
        let mut s = Self::new(self.level.clone(), bounds, self.resolution)?;
        s.grad_floor = self.grad_floor;
        Ok(s)
    }

    pub fn with_resolution(&self, resolution: usize) -> Result<Self> {
        let mut s = Self::new(self.level.clone(), self.bounds.clone(), resolution)?;
        s.grad_floor = self.grad_floor;
        Ok(s)
    }

    pub fn dim(&self) -> usize {
        self.bounds.dim()
    }

    pub fn grid(&self) -> Grid {
        Grid::uniform(self.bounds.clone(), self.resolution)
    }

    pub fn value(&self, z: &[f64]) -> f64 {
        self.compiled.eval(z)
    }

    pub fn gradient(&self, z: &[f64], out: &mut [f64]) {
        self.compiled.gradient(z, out)
    }

    pub fn contains(&self, z: &[f64]) -> bool {
        self.compiled.eval(z) < 0.0
    }

    /// `1_E` sampled at voxel centers.
    pub fn indicator(&self) -> GridFunction {
        self.indicator_on(&self.grid())
    }

    pub fn indicator_on(&self, grid: &Grid) -> GridFunction {
        grid.sample(|z| if self.contains(z) { 1.0 } else { 0.0 })
    }

    /// Inner unit normal `−∇φ/|∇φ|` and `|∇φ|`.
    pub fn inner_normal(&self, z: &[f64]) -> (Vec<f64>, f64) {
        let mut g = vec![0.0; self.dim()];
        self.gradient(z, &mut g);
        let len = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        (g.iter().map(|v| -v / len).collect(), len)
    }
}

/// Boundary facets (segments in 2D, triangles in 3D) of the piecewise-linear
/// interpolant of `φ` on the vertices of the voxel grid.
#[derive(Debug, Clone, Default)]
pub struct Facets {
    pub dim: usize,
    /// Centroids, flattened.
    pub centroids: Vec<f64>,
    pub areas: Vec<f64>,
}

impl Facets {
    pub fn len(&self) -> usize {
        self.areas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.areas.is_empty()
    }

    pub fn centroid(&self, k: usize) -> &[f64] {
        &self.centroids[k * self.dim..(k + 1) * self.dim]
    }

    pub fn total_area(&self) -> f64 {
        self.areas.iter().sum()
    }
}

/// Vertex bitmasks of the Kuhn simplices of the unit cube.
fn kuhn_simplices(n: usize) -> Vec<Vec<usize>> {
    fn perms(items: Vec<usize>) -> Vec<Vec<usize>> {
        if items.len() <= 1 {
            return vec![items];
        }
        let mut out = Vec::new();
        for i in 0..items.len() {
            let mut rest = items.clone();
            let head = rest.remove(i);
            for mut p in perms(rest) {
                p.insert(0, head);
                out.push(p);
            }
        }
        out
    }
    perms((0..n).collect())
        .into_iter()
        .map(|p| {
            let mut v = vec![0usize];
            let mut mask = 0;
            for a in p {
                mask |= 1 << a;
                v.push(mask);
            }
            v
        })
        .collect()
}

fn lerp(a: &[f64], b: &[f64], fa: f64, fb: f64) -> Vec<f64> {
    let t = fa / (fa - fb);
    a.iter().zip(b).map(|(x, y)| x + t * (y - x)).collect()
}

fn push_triangle(out: &mut Facets, a: &[f64], b: &[f64], c: &[f64]) {
    let u = [b[0] - a[0], b[1] - a[1], b[2] - a[2]];
    let v = [c[0] - a[0], c[1] - a[1], c[2] - a[2]];
    let cr = [u[1] * v[2] - u[2] * v[1], u[2] * v[0] - u[0] * v[2], u[0] * v[1] - u[1] * v[0]];
    let area = 0.5 * (cr[0] * cr[0] + cr[1] * cr[1] + cr[2] * cr[2]).sqrt();
    if area > 0.0 {
        for j in 0..3 {
            out.centroids.push((a[j] + b[j] + c[j]) / 3.0);
        }
        out.areas.push(area);
    }
}

/// Extracts the boundary of `set` inside its box (dimensions 2 and 3).
pub fn boundary_facets(set: &SetRep) -> Result<Facets> {
    let n = set.dim();
    if n != 2 && n != 3 {
        return Err(Error::UnsupportedDimension(n));
    }
    let res = set.resolution;
    let nodes = res + 1;
    let lo = &set.bounds.lo;
    let h: Vec<f64> = (0..n).map(|j| (set.bounds.hi[j] - lo[j]) / res as f64).collect();
    let node_pos = |m: &[usize]| -> Vec<f64> { (0..n).map(|j| lo[j] + m[j] as f64 * h[j]).collect() };
    let total = nodes.pow(n as u32);
    let values: Vec<f64> = (0..total)
        .into_par_iter()
        .map(|idx| {
            let mut m = vec![0; n];
            let mut r = idx;
            for mj in m.iter_mut() {
                *mj = r % nodes;
                r /= nodes;
            }
            set.value(&node_pos(&m))
        })
        .collect();
    let simplices = kuhn_simplices(n);
    let stride: Vec<usize> = (0..n).map(|j| nodes.pow(j as u32)).collect();
    let slabs: Vec<Facets> = (0..res)
        .into_par_iter()
        .map(|top| {
            let mut out = Facets {
                dim: n,
                ..Facets::default()
            };
            let inner = res.pow(n as u32 - 1);
            let mut cell = vec![0usize; n];
            let corners = 1usize << n;
            let mut cv = vec![0.0; corners];
            let mut cp: Vec<Vec<f64>> = vec![vec![0.0; n]; corners];
            for k in 0..inner {
                let mut r = k;
                for cj in cell.iter_mut().take(n - 1) {
                    *cj = r % res;
                    r /= res;
                }
                cell[n - 1] = top;
                let mut any_in = false;
                let mut any_out = false;
                for (c, v) in cv.iter_mut().enumerate() {
                    let idx: usize = (0..n).map(|j| (cell[j] + ((c >> j) & 1)) * stride[j]).sum();
                    *v = values[idx];
                    if *v < 0.0 {
                        any_in = true;
                    } else {
                        any_out = true;
                    }
                }
                if !(any_in && any_out) {
                    continue;
                }
                for (c, p) in cp.iter_mut().enumerate() {
                    for j in 0..n {
                        p[j] = lo[j] + (cell[j] + ((c >> j) & 1)) as f64 * h[j];
                    }
                }
                for s in &simplices {
                    let ins: Vec<usize> = s.iter().copied().filter(|&c| cv[c] < 0.0).collect();
                    let outs: Vec<usize> = s.iter().copied().filter(|&c| cv[c] >= 0.0).collect();
                    if ins.is_empty() || outs.is_empty() {
                        continue;
                    }
                    let e = |a: usize, b: usize| lerp(&cp[a], &cp[b], cv[a], cv[b]);
                    if n == 2 {
                        let pts: Vec<Vec<f64>> = ins
                            .iter()
                            .flat_map(|&a| outs.iter().map(move |&b| (a, b)))
                            .map(|(a, b)| e(a, b))
                            .collect();
                        let (p, q) = (&pts[0], &pts[1]);
                        let len = ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt();
                        if len > 0.0 {
                            out.centroids.push(0.5 * (p[0] + q[0]));
                            out.centroids.push(0.5 * (p[1] + q[1]));
                            out.areas.push(len);
                        }
                    } else if ins.len() == 2 {
                        let q0 = e(ins[0], outs[0]);
                        let q1 = e(ins[0], outs[1]);
                        let q2 = e(ins[1], outs[1]);
                        let q3 = e(ins[1], outs[0]);
                        push_triangle(&mut out, &q0, &q1, &q2);
                        push_triangle(&mut out, &q0, &q2, &q3);
                    } else {
                        let pts: Vec<Vec<f64>> = ins
                            .iter()
                            .flat_map(|&a| outs.iter().map(move |&b| (a, b)))
                            .map(|(a, b)| e(a, b))
                            .collect();
                        push_triangle(&mut out, &pts[0], &pts[1], &pts[2]);
                    }
                }
            }
            out
        })
        .collect();
    let mut all = Facets {
        dim: n,
        ..Facets::default()
    };
    for s in slabs {
        all.centroids.extend(s.centroids);
        all.areas.extend(s.areas);
    }
    Ok(all)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Estimator {
    Surface,
    Flow,
    Mollified,
}

/// Values at one scale of an extrapolated estimator.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleValue {
    pub scale: f64,
    pub per_field: Vec<f64>,
    pub per_field_variation: Vec<f64>,
    pub total_variation: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerimeterReport {
    pub estimator: Estimator,
    /// `D_{X_i} 1_E(region)`.
    pub per_field: Vec<f64>,
    /// `|D_{X_i} 1_E|(region)`.
    pub per_field_variation: Vec<f64>,
    /// `‖D_g 1_E‖(region)`.
    pub total_variation: f64,
    pub resolution: usize,
    /// Per-scale values (flow times or mollification radii) before
    /// extrapolation; empty for the surface estimator.
    pub schedule: Vec<ScaleValue>,
}

fn check_dim(s: &SubRiemannianStructure, set: &SetRep) -> Result<()> {
    if s.dim() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: set.dim(),
        });
    }
    Ok(())
}

/// `N_X = (⟨X_i, n⟩)_i` with the inner normal `n`, times the volume density.
fn horizontal_normal(frame: &CompiledFrame, weight: &VolumeWeight, set: &SetRep, z: &[f64], buf: &mut [f64]) -> Result<Vec<f64>> {
    let (nrm, len) = set.inner_normal(z);
    if !(len >= set.grad_floor) {
        return Err(Error::DegenerateLevelSet {
            point: z.to_vec(),
            gradient: len,
        });
    }
    let n = frame.dim();
    frame.values(z, buf);
    let om = weight.eval(z);
    Ok((0..frame.rank())
        .map(|i| om * (0..n).map(|a| buf[i * n + a] * nrm[a]).sum::<f64>())
        .collect())
}

/// Surface integrals over the facets accepted by `keep`.
fn integrate_facets(
    s: &SubRiemannianStructure,
    set: &SetRep,
    facets: &Facets,
    keep: impl Fn(&[f64]) -> bool,
) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let frame = CompiledFrame::of(s);
    let m = frame.rank();
    let mut buf = vec![0.0; m * s.dim()];
    let mut per = vec![0.0; m];
    let mut var = vec![0.0; m];
    let mut tv = 0.0;
    for k in 0..facets.len() {
        let c = facets.centroid(k);
        if !keep(c) {
            continue;
        }
        let a = facets.areas[k];
        let nx = horizontal_normal(&frame, &s.volume_weight, set, c, &mut buf)?;
        for i in 0..m {
            per[i] += nx[i] * a;
            var[i] += nx[i].abs() * a;
        }
        tv += nx.iter().map(|v| v * v).sum::<f64>().sqrt() * a;
    }
    Ok((per, var, tv))
}

/// `∫_{∂E ∩ region} ⟨X_i, n⟩ ω dH^{n−1}` with the inner normal `n`, so that
/// the result is `D_{X_i} 1_E(region)`. `region` defaults to the set's box.
pub fn surface_estimator(s: &SubRiemannianStructure, set: &SetRep, region: Option<&BoxRegion>) -> Result<PerimeterReport> {
    check_dim(s, set)?;
    let facets = boundary_facets(set)?;
    let (per_field, per_field_variation, total_variation) =
        integrate_facets(s, set, &facets, |c| region.map_or(true, |r| r.contains(c)))?;
    Ok(PerimeterReport {
        estimator: Estimator::Surface,
        per_field,
        per_field_variation,
        total_variation,
        resolution: set.resolution,
        schedule: Vec::new(),
    })
}

/// Intercept of the least-squares line through `(x_k, y_k)`; a single point
/// is returned unchanged.
pub fn extrapolate_to_zero(x: &[f64], y: &[f64]) -> f64 {
    let k = x.len() as f64;
    if x.len() < 2 {
        return y.first().copied().unwrap_or(0.0);
    }
    let mx = x.iter().sum::<f64>() / k;
    let my = y.iter().sum::<f64>() / k;
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    if sxx == 0.0 {
        return my;
    }
    my - sxy / sxx * mx
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlowReport {
    /// `(t, ∫ |1_E(Φ_t) − 1_E| ω / |t|)`.
    pub values: Vec<(f64, f64)>,
    /// Extrapolation to `t → 0`, the estimate of `|D_X 1_E|(region)`.
    pub value: f64,
    /// Voxels whose flow left the set's box at the largest `|t|`.
    pub exited: usize,
    pub resolution: usize,
}

/// Default times for [`flow_estimator`]: 8, 16 and 32 voxel widths.
pub fn default_flow_schedule(set: &SetRep) -> Vec<f64> {
    let h = set.grid().spacing().into_iter().fold(f64::INFINITY, f64::min);
    vec![8.0 * h, 16.0 * h, 32.0 * h]
}

fn rk4_flow(frame: &CompiledFrame, z: &[f64], t: f64, steps: usize) -> Vec<f64> {
    let n = z.len();
    let h = t / steps as f64;
    let one = [1.0];
    let mut y = z.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut w = vec![0.0; n];
    for _ in 0..steps {
        frame.combine(&y, &one, &mut k1);
        for a in 0..n {
            w[a] = y[a] + 0.5 * h * k1[a];
        }
        frame.combine(&w, &one, &mut k2);
        for a in 0..n {
            w[a] = y[a] + 0.5 * h * k2[a];
        }
        frame.combine(&w, &one, &mut k3);
        for a in 0..n {
            w[a] = y[a] + h * k3[a];
        }
        frame.combine(&w, &one, &mut k4);
        for a in 0..n {
            y[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        }
    }
    y
}

/// `|D_X 1_E|(region)` from `∫_region |1_E(Φ_t^X) − 1_E| ω / |t|` over the
/// `t` schedule, extrapolated linearly to `t = 0`. The region is the set's
/// box.
pub fn flow_estimator(s: &SubRiemannianStructure, set: &SetRep, x: &VectorField<Rational>, schedule: &[f64]) -> Result<FlowReport> {
    check_dim(s, set)?;
    if x.dim() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            got: x.dim(),
        });
    }
    if schedule.is_empty() || schedule.iter().any(|t| !(t.abs() > 0.0) || !t.is_finite()) {
        return Err(Error::invalid("flow times must be finite and nonzero"));
    }
    let frame = CompiledFrame::new(std::slice::from_ref(x));
    let grid = set.grid();
    let vol = grid.cell_volume();
    let tmax = schedule.iter().fold(0.0f64, |a, t| a.max(t.abs()));
    let rows: Vec<(Vec<f64>, usize)> = (0..grid.len())
        .into_par_iter()
        .map(|idx| {
            let z = grid.center(idx);
            let inside = set.contains(&z);
            let om = s.volume_weight.eval(&z);
            let mut exited = 0;
            let row = schedule
                .iter()
                .map(|&t| {
                    let y = rk4_flow(&frame, &z, t, 8);
                    if t.abs() == tmax && !set.bounds.contains(&y) {
                        exited += 1;
                    }
                    if set.contains(&y) != inside {
                        om
                    } else {
                        0.0
                    }
                })
                .collect();
            (row, exited)
        })
        .collect();
    let mut sums = vec![0.0; schedule.len()];
    let mut exited = 0;
    for (row, e) in &rows {
        for (s, v) in sums.iter_mut().zip(row) {
            *s += v;
        }
        exited += e;
    }
    let values: Vec<(f64, f64)> = schedule
        .iter()
        .zip(&sums)
        .map(|(&t, &v)| (t, v * vol / t.abs()))
        .collect();
    let ts: Vec<f64> = values.iter().map(|v| v.0.abs()).collect();
    let vs: Vec<f64> = values.iter().map(|v| v.1).collect();
    Ok(FlowReport {
        value: extrapolate_to_zero(&ts, &vs),
        values,
        exited,
        resolution: set.resolution,
    })
}

/// Default radii for [`mollified_estimator`]: 4 and 8 voxel widths.
pub fn default_mollifier_schedule(set: &SetRep) -> Vec<f64> {
    let h = set.grid().spacing().into_iter().fold(0.0, f64::max);
    vec![4.0 * h, 8.0 * h]
}

/// Samples of `ρ(s) ∝ (1 − s²)³` and of its derivative at spacing `h` for
/// radius `eps`, normalized so that constants and linear functions are
/// reproduced exactly.
fn kernel_1d(eps: f64, h: f64) -> (Vec<f64>, Vec<f64>) {
    let k = (eps / h).floor() as i64;
    let taps: Vec<i64> = (-k..=k).collect();
    let rho: Vec<f64> = taps
        .iter()
        .map(|&i| {
            let s = i as f64 * h / eps;
            (1.0 - s * s).max(0.0).powi(3)
        })
        .collect();
    let total: f64 = rho.iter().sum();
    let rho: Vec<f64> = rho.iter().map(|v| v / total).collect();
    let drho: Vec<f64> = taps
        .iter()
        .map(|&i| {
            let s = i as f64 * h / eps;
            let a = (1.0 - s * s).max(0.0);
            -6.0 * s * a * a / eps
        })
        .collect();
    let moment: f64 = taps.iter().zip(&drho).map(|(&i, d)| d * (-(i as f64) * h)).sum();
    (rho, drho.iter().map(|d| d / moment).collect())
}

/// Convolution along `axis` of an array with extents `dims` (first axis
/// fastest); entries that would read outside the array are left at zero.
fn convolve_axis(data: &[f64], dims: &[usize], axis: usize, kernel: &[f64]) -> Vec<f64> {
    let k = (kernel.len() / 2) as i64;
    let stride: usize = dims[..axis].iter().product();
    let len = dims[axis] as i64;
    data.par_iter()
        .enumerate()
        .map(|(idx, _)| {
            let pos = ((idx / stride) % dims[axis]) as i64;
            if pos < k || pos >= len - k {
                return 0.0;
            }
            let mut acc = 0.0;
            for (t, w) in kernel.iter().enumerate() {
                let off = t as i64 - k;
                let j = (idx as i64 - off * stride as i64) as usize;
                acc += w * data[j];
            }
            acc
        })
        .collect()
}

/// `∫ X_i u_ε ω` and `∫ |X u_ε| ω` over the set's box for `u_ε = 1_E * ρ_ε`,
/// extrapolated linearly to `ε = 0` over `schedule`.
pub fn mollified_estimator(s: &SubRiemannianStructure, set: &SetRep, schedule: &[f64]) -> Result<PerimeterReport> {
    check_dim(s, set)?;
    let n = set.dim();
    let grid = set.grid();
    let h = grid.spacing();
    let hmax = h.iter().fold(0.0f64, |a, b| a.max(*b));
    if schedule.is_empty() || schedule.iter().any(|e| !(*e >= 2.0 * hmax)) {
        return Err(Error::invalid(format!(
            "mollification radii must be at least two voxel widths ({})",
            2.0 * hmax
        )));
    }
    let frame = CompiledFrame::of(s);
    let m = frame.rank();
    let mut scales = Vec::with_capacity(schedule.len());
    for &eps in schedule {
        let pad: Vec<usize> = h.iter().map(|hj| (eps / hj).floor() as usize + 1).collect();
        let dims: Vec<usize> = (0..n).map(|j| set.resolution + 2 * pad[j]).collect();
        let lo: Vec<f64> = (0..n).map(|j| set.bounds.lo[j] - pad[j] as f64 * h[j]).collect();
        let total: usize = dims.iter().product();
        let center = |idx: usize| -> Vec<f64> {
            let mut r = idx;
            (0..n)
                .map(|j| {
                    let i = r % dims[j];
                    r /= dims[j];
                    lo[j] + (i as f64 + 0.5) * h[j]
                })
                .collect()
        };
        let u: Vec<f64> = (0..total)
            .into_par_iter()
            .map(|idx| if set.contains(&center(idx)) { 1.0 } else { 0.0 })
            .collect();
        let kernels: Vec<(Vec<f64>, Vec<f64>)> = (0..n).map(|j| kernel_1d(eps, h[j])).collect();
        let mut grads = Vec::with_capacity(n);
        for d in 0..n {
            let mut acc = u.clone();
            for j in 0..n {
                let k = if j == d { &kernels[j].1 } else { &kernels[j].0 };
                acc = convolve_axis(&acc, &dims, j, k);
            }
            grads.push(acc);
        }
        let mut buf = vec![0.0; m * n];
        let mut per = vec![0.0; m];
        let mut var = vec![0.0; m];
        let mut tv = 0.0;
        let mut mi = vec![0usize; n];
        for cell in 0..grid.len() {
            grid.index_to_multi(cell, &mut mi);
            let idx: usize = (0..n)
                .rev()
                .fold(0, |acc, j| acc * dims[j] + mi[j] + pad[j]);
            let z = grid.center(cell);
            let g: Vec<f64> = grads.iter().map(|gr| gr[idx]).collect();
            if g.iter().all(|v| *v == 0.0) {
                continue;
            }
            frame.values(&z, &mut buf);
            let om = s.volume_weight.eval(&z);
            let mut sq = 0.0;
            for i in 0..m {
                let xu: f64 = (0..n).map(|a| buf[i * n + a] * g[a]).sum::<f64>() * om;
                per[i] += xu;
                var[i] += xu.abs();
                sq += xu * xu;
            }
            tv += sq.sqrt();
        }
        let vol = grid.cell_volume();
        scales.push(ScaleValue {
            scale: eps,
            per_field: per.iter().map(|v| v * vol).collect(),
            per_field_variation: var.iter().map(|v| v * vol).collect(),
            total_variation: tv * vol,
        });
    }
    let xs: Vec<f64> = scales.iter().map(|v| v.scale).collect();
    let pick = |f: &dyn Fn(&ScaleValue) -> f64| -> f64 {
        let ys: Vec<f64> = scales.iter().map(f).collect();
        extrapolate_to_zero(&xs, &ys)
    };
    Ok(PerimeterReport {
        estimator: Estimator::Mollified,
        per_field: (0..m).map(|i| pick(&|v| v.per_field[i])).collect(),
        per_field_variation: (0..m).map(|i| pick(&|v| v.per_field_variation[i]).max(0.0)).collect(),
        total_variation: pick(&|v| v.total_variation).max(0.0),
        resolution: set.resolution,
        schedule: scales,
    })
}

fn check_on_boundary(set: &SetRep, x: &[f64]) -> Result<()> {
    if x.len() != set.dim() {
        return Err(Error::DimensionMismatch {
            expected: set.dim(),
            got: x.len(),
        });
    }
    let (_, len) = set.inner_normal(x);
    if !(len >= set.grad_floor) {
        return Err(Error::DegenerateLevelSet {
            point: x.to_vec(),
            gradient: len,
        });
    }
    if set.value(x).abs() > 1e-8 * len.max(1.0) {
        return Err(Error::invalid(format!("point {x:?} is not on the boundary")));
    }
    Ok(())
}

/// `ν*_E(x) = N_X/|N_X|` with the inner normal, so that
/// `D_{X_i} 1_E = ν*_i ‖D_g 1_E‖`.
pub fn dual_normal(s: &SubRiemannianStructure, set: &SetRep, x: &[f64]) -> Result<Vec<f64>> {
    check_dim(s, set)?;
    check_on_boundary(set, x)?;
    let frame = CompiledFrame::of(s);
    let mut buf = vec![0.0; frame.rank() * s.dim()];
    let nx = horizontal_normal(&frame, &VolumeWeight::One, set, x, &mut buf)?;
    let len = nx.iter().map(|v| v * v).sum::<f64>().sqrt();
    if len <= CHARACTERISTIC_TOL {
        return Err(Error::CharacteristicPoint { point: x.to_vec() });
    }
    Ok(nx.iter().map(|v| v / len).collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GeometricNormal {
    pub dual: Vec<f64>,
    /// `ν_E = Σ ν*_i X_i(x)`.
    pub vector: Vec<f64>,
    /// `G_x(ν_E)`.
    pub metric: f64,
    pub passed: bool,
}

/// `ν_E(x)` together with the check `G_x(ν_E) = 1` to `1e-6`.
pub fn geometric_normal(s: &SubRiemannianStructure, set: &SetRep, x: &[f64]) -> Result<GeometricNormal> {
    let dual = dual_normal(s, set, x)?;
    let frame = CompiledFrame::of(s);
    let mut vector = vec![0.0; s.dim()];
    frame.combine(x, &dual, &mut vector);
    let metric = match quadratic_form(s, x, &vector, crate::metric::DEFAULT_SPAN_TOL)?.value {
        FormValue::Finite(v) => v,
        FormValue::Infinite => f64::INFINITY,
    };
    Ok(GeometricNormal {
        passed: (metric - 1.0).abs() <= 1e-6,
        dual,
        vector,
        metric,
    })
}

/// Random points of `∂E` inside the set's box: uniform seeds pushed onto the
/// level set by Newton steps along the gradient.
pub fn boundary_samples(set: &SetRep, count: usize, seed: u64) -> Vec<Vec<f64>> {
    let n = set.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(count);
    let mut g = vec![0.0; n];
    let mut attempts = 0;
    while out.len() < count && attempts < 100 * count.max(1) {
        attempts += 1;
        let mut z: Vec<f64> = (0..n)
            .map(|j| rng.gen_range(set.bounds.lo[j]..=set.bounds.hi[j]))
            .collect();
        for _ in 0..60 {
            let f = set.value(&z);
            set.gradient(&z, &mut g);
            let g2: f64 = g.iter().map(|v| v * v).sum();
            if !(g2 > set.grad_floor * set.grad_floor) {
                break;
            }
            for j in 0..n {
                z[j] -= f * g[j] / g2;
            }
            if f.abs() < 1e-14 {
                break;
            }
        }
        let (_, len) = set.inner_normal(&z);
        if set.bounds.contains(&z) && len >= set.grad_floor && set.value(&z).abs() <= 1e-10 * len.max(1.0) {
            out.push(z);
        }
    }
    out
}

/// Mean oscillation of `ν*_E` around `ν*_E(p)` over `B_r(p)` for each radius;
/// `field` holds `d(p, ·)`. `None` where the ball contains no boundary.
pub fn reduced_boundary_score(
    s: &SubRiemannianStructure,
    set: &SetRep,
    field: &DistanceField,
    radii: &[f64],
) -> Result<Vec<Option<f64>>> {
    check_dim(s, set)?;
    let p = field.origin.clone();
    let nu_p = dual_normal(s, set, &p)?;
    let frame = CompiledFrame::of(s);
    let mut buf = vec![0.0; frame.rank() * s.dim()];
    let mut out = Vec::with_capacity(radii.len());
    for &r in radii {
        let bounds = field
            .ball_bounds(r, 0.15)
            .ok_or_else(|| Error::NonConvergence("distance field has no solved nodes".into()))?;
        let local = set.with_bounds(bounds)?;
        let facets = boundary_facets(&local)?;
        let mut num = 0.0;
        let mut den = 0.0;
        for k in 0..facets.len() {
            let c = facets.centroid(k);
            if !matches!(field.query(c), Some(d) if d < r) {
                continue;
            }
            let nx = horizontal_normal(&frame, &s.volume_weight, &local, c, &mut buf)?;
            let len = nx.iter().map(|v| v * v).sum::<f64>().sqrt();
            if len <= CHARACTERISTIC_TOL {
                continue;
            }
            let w = len * facets.areas[k];
            let osc: f64 = nx.iter().zip(&nu_p).map(|(a, b)| (a / len - b).powi(2)).sum();
            num += w * osc;
            den += w;
        }
        out.push((den > 0.0).then(|| num / den));
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityRatio {
    pub radius: f64,
    /// `‖D_g 1_E‖(B_r(p))`.
    pub perimeter: f64,
    /// `m(B_r(p))` by voxel counting.
    pub volume: f64,
    pub ratio: f64,
    /// Voxels or facets whose ball membership was undecided.
    pub unknown: usize,
}

/// `‖D_g 1_E‖(B_r(p)) / (m(B_r(p))/r)` on a grid fitted to the ball, with
/// `set.resolution` voxels per axis; `field` holds `d(p, ·)`.
pub fn density_ratio(s: &SubRiemannianStructure, set: &SetRep, field: &DistanceField, r: f64) -> Result<DensityRatio> {
    check_dim(s, set)?;
    let bounds = field
        .ball_bounds(r, 0.15)
        .ok_or_else(|| Error::NonConvergence("distance field has no solved nodes".into()))?;
    let local = set.with_bounds(bounds)?;
    let grid = local.grid();
    let mask = field.ball_mask(None, r, &grid, 0.0)?;
    let volume = if s.volume_weight.is_one() {
        mask.volume()
    } else {
        (0..grid.len())
            .filter(|&i| mask.inside(i))
            .map(|i| s.volume_weight.eval(&grid.center(i)))
            .sum::<f64>()
            * grid.cell_volume()
    };
    let facets = boundary_facets(&local)?;
    let mut unknown = mask.unknown;
    let undecided = std::cell::Cell::new(0);
    let (_, _, perimeter) = integrate_facets(s, &local, &facets, |c| match field.query(c) {
        Some(d) => d < r,
        None => {
            undecided.set(undecided.get() + 1);
            false
        }
    })?;
    unknown += undecided.get();
    Ok(DensityRatio {
        radius: r,
        perimeter,
        volume,
        ratio: perimeter * r / volume,
        unknown,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;

    fn halfplane(level: &str, lo: f64, hi: f64, res: usize) -> SetRep {
        SetRep::parse(level, BoxRegion::new(vec![lo, lo], vec![hi, hi]).unwrap(), res).unwrap()
    }

    #[test]
    fn grushin_surface_examples() {
        let s = library::grushin();
        let a = surface_estimator(&s, &halfplane("x1 - 1/2", 0.0, 1.0, 64), None).unwrap();
        assert!((a.total_variation - 1.0).abs() < 1e-9, "{a:?}");
        let b = surface_estimator(&s, &halfplane("x2 - 1/2", 0.0, 1.0, 64), None).unwrap();
        assert!((b.total_variation - 0.5).abs() < 1e-3, "{b:?}");
        assert!((b.per_field[1] + 0.5).abs() < 1e-3);
        let empty = surface_estimator(&s, &halfplane("1", 0.0, 1.0, 16), None).unwrap();
        assert_eq!(empty.total_variation, 0.0);
        assert!(empty.per_field.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn circle_perimeter() {
        let s = library::euclidean(2);
        let set = halfplane("x1^2 + x2^2 - 1/4", -1.0, 1.0, 128);
        let r = surface_estimator(&s, &set, None).unwrap();
        assert!((r.total_variation - std::f64::consts::PI).abs() < 2e-3, "{r:?}");
        let sphere = SetRep::parse("x1^2 + x2^2 + x3^2 - 1/4", BoxRegion::cube(3, 1.0), 48).unwrap();
        let f = boundary_facets(&sphere).unwrap();
        assert!((f.total_area() - std::f64::consts::PI).abs() < 0.01, "{}", f.total_area());
    }

    #[test]
    fn flow_examples() {
        let s = library::euclidean(2);
        let set = halfplane("x1", -1.0, 1.0, 64);
        let d1 = s.frame()[0].clone();
        let r = flow_estimator(&s, &set, &d1, &[0.25, 0.5]).unwrap();
        for (_, v) in &r.values {
            assert!((v - 2.0).abs() < 1e-9, "{r:?}");
        }
        let d2 = s.frame()[1].clone();
        assert_eq!(flow_estimator(&s, &set, &d2, &[0.25]).unwrap().value, 0.0);
    }

    #[test]
    fn mollified_examples() {
        let s = library::euclidean(2);
        let set = halfplane("x1", -1.0, 1.0, 64);
        let sch = default_mollifier_schedule(&set);
        let r = mollified_estimator(&s, &set, &sch).unwrap();
        assert!((r.total_variation - 2.0).abs() < 0.02, "{r:?}");
        assert!((r.per_field[0] + 2.0).abs() < 0.02);
        let full = mollified_estimator(&s, &halfplane("-1", -1.0, 1.0, 32), &[0.25]).unwrap();
        assert!(full.total_variation.abs() < 1e-12);
        assert!(mollified_estimator(&s, &set, &[0.01]).is_err());
    }

    #[test]
    fn dual_normals() {
        let e = library::euclidean(2);
        let set = halfplane("x1", -1.0, 1.0, 8);
        assert_eq!(dual_normal(&e, &set, &[0.0, 0.3]).unwrap(), vec![-1.0, 0.0]);
        let g = library::grushin();
        let set = halfplane("x2", -3.0, 3.0, 8);
        let nu = dual_normal(&g, &set, &[1.5, 0.0]).unwrap();
        assert!((nu[0]).abs() < 1e-15 && (nu[1] + 1.0).abs() < 1e-15);
        let gn = geometric_normal(&g, &set, &[2.0, 0.0]).unwrap();
        assert!((gn.vector[1] + 2.0).abs() < 1e-12 && gn.passed, "{gn:?}");
        assert!(matches!(
            dual_normal(&g, &set, &[0.0, 0.0]),
            Err(Error::CharacteristicPoint { .. })
        ));
    }

    #[test]
    fn samples_lie_on_boundary() {
        let set = SetRep::parse("x1^2 + 2*x2^2 + x3^2 - 1/2", BoxRegion::cube(3, 1.0), 16).unwrap();
        let pts = boundary_samples(&set, 20, 4);
        assert_eq!(pts.len(), 20);
        for p in pts {
            assert!(set.value(&p).abs() < 1e-10);
        }
    }
}
