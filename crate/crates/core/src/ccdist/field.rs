//! Distance fields on node lattices and CC-ball voxel masks.

use serde::{Deserialize, Serialize};

use super::{DistanceSolver, SolverOptions};
use crate::error::{Error, Result};
use crate::grid::{BoxRegion, Grid};
use crate::nilpotent::Grading;

/// Nodes `lo + i·(hi − lo)/(nodes − 1)` on every axis (first axis fastest).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Lattice {
    pub bounds: BoxRegion,
    pub nodes: Vec<usize>,
}

impl Lattice {
    pub fn new(bounds: BoxRegion, nodes: Vec<usize>) -> Result<Self> {
        if nodes.len() != bounds.dim() {
            return Err(Error::DimensionMismatch {
                expected: bounds.dim(),
                got: nodes.len(),
            });
        }
        if nodes.iter().any(|&k| k < 2) {
            return Err(Error::invalid("a lattice needs at least 2 nodes per axis"));
        }
        Ok(Lattice { bounds, nodes })
    }

    pub fn uniform(bounds: BoxRegion, nodes: usize) -> Result<Self> {
        let n = bounds.dim();
        Self::new(bounds, vec![nodes; n])
    }

    pub fn dim(&self) -> usize {
        self.nodes.len()
    }

    pub fn len(&self) -> usize {
        self.nodes.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    fn step(&self, j: usize) -> f64 {
        (self.bounds.hi[j] - self.bounds.lo[j]) / (self.nodes[j] - 1) as f64
    }

    fn multi(&self, mut idx: usize) -> Vec<usize> {
        self.nodes
            .iter()
            .map(|&k| {
                let i = idx % k;
                idx /= k;
                i
            })
            .collect()
    }

    fn index(&self, m: &[usize]) -> usize {
        m.iter()
            .zip(&self.nodes)
            .rev()
            .fold(0, |acc, (&i, &k)| acc * k + i)
    }

    pub fn position(&self, idx: usize) -> Vec<f64> {
        self.multi(idx)
            .iter()
            .enumerate()
            .map(|(j, &i)| self.bounds.lo[j] + i as f64 * self.step(j))
            .collect()
    }

    fn on_boundary(&self, idx: usize) -> bool {
        self.multi(idx)
            .iter()
            .zip(&self.nodes)
            .any(|(&i, &k)| i == 0 || i == k - 1)
    }

    fn neighbours(&self, idx: usize) -> Vec<usize> {
        let m = self.multi(idx);
        let mut out = Vec::new();
        for j in 0..m.len() {
            for d in [-1i64, 1] {
                let v = m[j] as i64 + d;
                if v >= 0 && (v as usize) < self.nodes[j] {
                    let mut mm = m.clone();
                    mm[j] = v as usize;
                    out.push(self.index(&mm));
                }
            }
        }
        out
    }

    /// Multilinear weights of `x` (corners with zero weight are dropped).
    fn weights(&self, x: &[f64]) -> Option<Vec<(usize, f64)>> {
        let n = self.dim();
        let mut base = Vec::with_capacity(n);
        let mut frac = Vec::with_capacity(n);
        for j in 0..n {
            let t = (x[j] - self.bounds.lo[j]) / self.step(j);
            let last = (self.nodes[j] - 1) as f64;
            if !(t >= -1e-9 && t <= last + 1e-9) {
                return None;
            }
            let t = t.clamp(0.0, last);
            let i = (t.floor() as usize).min(self.nodes[j] - 2);
            let mut f = t - i as f64;
            if f < 1e-9 {
                f = 0.0;
            } else if f > 1.0 - 1e-9 {
                f = 1.0;
            }
            base.push(i);
            frac.push(f);
        }
        let mut out = Vec::with_capacity(1 << n);
        let mut corner = vec![0usize; n];
        for mask in 0..(1usize << n) {
            let mut w = 1.0;
            for j in 0..n {
                let hi = (mask >> j) & 1 == 1;
                corner[j] = base[j] + hi as usize;
                w *= if hi { frac[j] } else { 1.0 - frac[j] };
            }
            if w > 0.0 {
                out.push((self.index(&corner), w));
            }
        }
        Some(out)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct NodeSolution {
    value: f64,
    controls: Vec<f64>,
    segments: usize,
}

/// Sampled `d(p, ·)` on a lattice. In the homogeneous variant (`p = 0`, frame
/// homogeneous of order −1 for a grading) only the boundary shell of a
/// symmetric box is solved and other points are reached through
/// `d(0, δ_λ z) = λ d(0, z)`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DistanceField {
    pub origin: Vec<f64>,
    pub lattice: Lattice,
    nodes: Vec<Option<NodeSolution>>,
    grading: Option<Grading>,
    /// Nodes whose solve did not converge.
    pub unknown_nodes: usize,
    pub solved_nodes: usize,
}

impl DistanceField {
    /// Solves every lattice node, sweeping outward from `origin` with warm
    /// starts and falling back to cold solves.
    pub fn compute(solver: &DistanceSolver, origin: &[f64], lattice: Lattice, sweep: &SolverOptions) -> Result<Self> {
        if origin.len() != lattice.dim() || lattice.dim() != solver.dim() {
            return Err(Error::DimensionMismatch {
                expected: solver.dim(),
                got: lattice.dim(),
            });
        }
        let active: Vec<usize> = (0..lattice.len()).collect();
        let mut f = DistanceField {
            origin: origin.to_vec(),
            nodes: vec![None; lattice.len()],
            lattice,
            grading: None,
            unknown_nodes: 0,
            solved_nodes: 0,
        };
        f.sweep(solver, &active, sweep)?;
        Ok(f)
    }

    /// Homogeneous variant around the origin; `lattice.bounds` must be a box
    /// symmetric about 0.
    pub fn compute_homogeneous(
        solver: &DistanceSolver,
        grading: &Grading,
        lattice: Lattice,
        sweep: &SolverOptions,
    ) -> Result<Self> {
        let n = solver.dim();
        if lattice.dim() != n || grading.dim() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: lattice.dim(),
            });
        }
        let b = &lattice.bounds;
        if b.lo.iter().zip(&b.hi).any(|(l, h)| (l + h).abs() > 1e-12 * h.abs()) {
            return Err(Error::invalid("homogeneous fields need a box symmetric about 0"));
        }
        let active: Vec<usize> = (0..lattice.len()).filter(|&i| lattice.on_boundary(i)).collect();
        let mut f = DistanceField {
            origin: vec![0.0; n],
            nodes: vec![None; lattice.len()],
            lattice,
            grading: Some(grading.clone()),
            unknown_nodes: 0,
            solved_nodes: 0,
        };
        f.sweep(solver, &active, sweep)?;
        Ok(f)
    }

    pub fn is_homogeneous(&self) -> bool {
        self.grading.is_some()
    }

    fn sweep(&mut self, solver: &DistanceSolver, active: &[usize], sweep: &SolverOptions) -> Result<()> {
        let warm = DistanceSolver {
            opts: sweep.clone(),
            ..solver.clone()
        };
        let dist2 = |p: &[f64]| -> f64 { p.iter().zip(&self.origin).map(|(a, b)| (a - b).powi(2)).sum() };
        let mut order: Vec<(f64, usize)> = active
            .iter()
            .map(|&i| (dist2(&self.lattice.position(i)), i))
            .collect();
        order.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut is_active = vec![false; self.lattice.len()];
        for &i in active {
            is_active[i] = true;
        }
        for (_, idx) in order {
            let target = self.lattice.position(idx);
            let mut from: Vec<&NodeSolution> = self
                .lattice
                .neighbours(idx)
                .into_iter()
                .filter(|&j| is_active[j])
                .filter_map(|j| self.nodes[j].as_ref())
                .filter(|s| s.value > 0.0)
                .collect();
            from.sort_by(|a, b| a.value.partial_cmp(&b.value).unwrap());
            from.truncate(2);
            let mut best: Option<NodeSolution> = None;
            for s in from {
                let r = warm.distance_from(&self.origin, &target, &s.controls, s.segments)?;
                if r.path.endpoint_gap <= warm.opts.endpoint_tol
                    && best.as_ref().map_or(true, |b| r.value < b.value)
                {
                    best = Some(NodeSolution {
                        value: r.value,
                        segments: r.path.segments,
                        controls: r.path.controls,
                    });
                }
            }
            if best.is_none() {
                let r = solver.distance(&self.origin, &target)?;
                if r.path.endpoint_gap <= solver.opts.endpoint_tol {
                    best = Some(NodeSolution {
                        value: r.value,
                        segments: r.path.segments,
                        controls: r.path.controls,
                    });
                }
            }
            match best {
                Some(b) => {
                    self.solved_nodes += 1;
                    self.nodes[idx] = Some(b);
                }
                None => self.unknown_nodes += 1,
            }
        }
        Ok(())
    }

    fn interpolate(&self, x: &[f64]) -> Option<f64> {
        let w = self.lattice.weights(x)?;
        let mut acc = 0.0;
        for (i, wi) in w {
            acc += wi * self.nodes[i].as_ref()?.value;
        }
        Some(acc)
    }

    /// Scale `ρ` with `δ_{1/ρ} z` on the boundary of the lattice box.
    fn shell_point(&self, g: &Grading, z: &[f64]) -> Option<(f64, Vec<f64>)> {
        let hi = &self.lattice.bounds.hi;
        let mut rho: f64 = 0.0;
        let mut arg = 0;
        for (j, (&v, &b)) in z.iter().zip(hi).enumerate() {
            let r = (v.abs() / b).powf(1.0 / g.weight(j) as f64);
            if r > rho {
                rho = r;
                arg = j;
            }
        }
        if rho == 0.0 {
            return None;
        }
        let mut u: Vec<f64> = z
            .iter()
            .enumerate()
            .map(|(j, &v)| v / rho.powi(g.weight(j) as i32))
            .collect();
        u[arg] = hi[arg].copysign(z[arg]);
        Some((rho, u))
    }

    /// Interpolated `d(p, z)`; `None` outside the lattice (non-homogeneous
    /// case) or next to unknown nodes.
    pub fn query(&self, z: &[f64]) -> Option<f64> {
        match &self.grading {
            None => self.interpolate(z),
            Some(g) => match self.shell_point(g, z) {
                None => Some(0.0),
                Some((rho, u)) => self.interpolate(&u).map(|d| rho * d),
            },
        }
    }

    /// Box containing `B_r(p)`, widened by the relative `margin`.
    pub fn ball_bounds(&self, r: f64, margin: f64) -> Option<BoxRegion> {
        let n = self.lattice.dim();
        let mut half = vec![0.0f64; n];
        let mut lo = vec![f64::INFINITY; n];
        let mut hi = vec![f64::NEG_INFINITY; n];
        for (idx, node) in self.nodes.iter().enumerate() {
            let Some(s) = node else { continue };
            let x = self.lattice.position(idx);
            match &self.grading {
                Some(g) if s.value > 0.0 => {
                    for j in 0..n {
                        let u = x[j].abs() / s.value.powi(g.weight(j) as i32);
                        half[j] = half[j].max(u * r.powi(g.weight(j) as i32));
                    }
                }
                None if s.value <= r * (1.0 + margin) => {
                    for j in 0..n {
                        lo[j] = lo[j].min(x[j]);
                        hi[j] = hi[j].max(x[j]);
                    }
                }
                _ => {}
            }
        }
        if self.grading.is_some() {
            if half.iter().any(|h| !(*h > 0.0)) {
                return None;
            }
            let half: Vec<f64> = half.iter().map(|h| h * (1.0 + margin)).collect();
            return Some(BoxRegion::symmetric(&half));
        }
        if lo.iter().any(|v| !v.is_finite()) {
            return None;
        }
        let pad: Vec<f64> = (0..n).map(|j| self.lattice.step(j)).collect();
        BoxRegion::new(
            lo.iter().zip(&pad).map(|(l, p)| l - p).collect(),
            hi.iter().zip(&pad).map(|(h, p)| h + p).collect(),
        )
        .ok()
    }

    /// Warm-start controls for a direct solve towards `z`.
    fn warm_start(&self, z: &[f64]) -> Option<(Vec<f64>, usize)> {
        let (scale, u) = match &self.grading {
            None => (1.0, z.to_vec()),
            Some(g) => {
                let (rho, u) = self.shell_point(g, z)?;
                (rho, u)
            }
        };
        let w = self.lattice.weights(&u)?;
        let (i, _) = w.iter().copied().max_by(|a, b| a.1.partial_cmp(&b.1).unwrap())?;
        let s = self.nodes[i].as_ref()?;
        Some((s.controls.iter().map(|c| c * scale).collect(), s.segments))
    }

    /// Voxel mask of `B_r(p)` on `grid`. Voxels whose interpolated distance
    /// lies within `refine_band · r` of `r` are re-solved directly.
    pub fn ball_mask(&self, solver: Option<&DistanceSolver>, r: f64, grid: &Grid, refine_band: f64) -> Result<BallMask> {
        if !(r > 0.0) {
            return Err(Error::invalid("ball radius must be positive"));
        }
        if grid.dim() != self.lattice.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.lattice.dim(),
                got: grid.dim(),
            });
        }
        let mut voxels = Vec::with_capacity(grid.len());
        let mut refined = 0;
        for idx in 0..grid.len() {
            let z = grid.center(idx);
            let mut d = self.query(&z);
            if let (Some(s), Some(v)) = (solver, d) {
                if refine_band > 0.0 && (v - r).abs() < refine_band * r {
                    let res = match self.warm_start(&z) {
                        Some((c, seg)) => s.distance_from(&self.origin, &z, &c, seg)?,
                        None => s.distance(&self.origin, &z)?,
                    };
                    refined += 1;
                    d = (res.path.endpoint_gap <= s.opts.endpoint_tol).then_some(res.value.min(v));
                }
            }
            voxels.push(match d {
                Some(v) if v < r => Voxel::Inside,
                Some(_) => Voxel::Outside,
                None => Voxel::Unknown,
            });
        }
        let unknown = voxels.iter().filter(|v| **v == Voxel::Unknown).count();
        Ok(BallMask {
            grid: grid.clone(),
            voxels,
            unknown,
            refined,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Voxel {
    Inside,
    Outside,
    Unknown,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BallMask {
    pub grid: Grid,
    pub voxels: Vec<Voxel>,
    /// Voxels excluded because their distance is unknown.
    pub unknown: usize,
    /// Voxels settled by a direct solve.
    pub refined: usize,
}

impl BallMask {
    pub fn inside(&self, idx: usize) -> bool {
        self.voxels[idx] == Voxel::Inside
    }

    pub fn count(&self) -> usize {
        self.voxels.iter().filter(|v| **v == Voxel::Inside).count()
    }

    pub fn volume(&self) -> f64 {
        self.count() as f64 * self.grid.cell_volume()
    }

    /// Whether an inside voxel touches the grid boundary.
    pub fn touches_boundary(&self) -> bool {
        let n = self.grid.dim();
        let mut m = vec![0; n];
        (0..self.grid.len()).any(|i| {
            if !self.inside(i) {
                return false;
            }
            self.grid.index_to_multi(i, &mut m);
            m.iter().zip(&self.grid.res).any(|(&a, &r)| a == 0 || a + 1 == r)
        })
    }

    /// Runs of equal voxel states in linear order.
    pub fn run_lengths(&self) -> Vec<(Voxel, usize)> {
        let mut out: Vec<(Voxel, usize)> = Vec::new();
        for &v in &self.voxels {
            match out.last_mut() {
                Some((w, k)) if *w == v => *k += 1,
                _ => out.push((v, 1)),
            }
        }
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BallOptions {
    /// Lattice nodes per axis for the coarse distance field.
    pub coarse_nodes: usize,
    /// Relative band around `r` re-solved directly.
    pub refine_band: f64,
    pub sweep: SolverOptions,
}

impl Default for BallOptions {
    fn default() -> Self {
        BallOptions {
            coarse_nodes: 17,
            refine_band: 0.0,
            sweep: SolverOptions::sweep(),
        }
    }
}

/// Voxel mask of `B_r(p)` on `grid`. When `grading` is given, `p = 0` and the
/// frame is homogeneous for it, the homogeneous field is used.
pub fn ball_mask(
    solver: &DistanceSolver,
    p: &[f64],
    r: f64,
    grid: &Grid,
    grading: Option<&Grading>,
    opts: &BallOptions,
) -> Result<BallMask> {
    let field = match grading {
        Some(g) if p.iter().all(|v| *v == 0.0) => {
            let half: Vec<f64> = (0..grid.dim())
                .map(|j| {
                    let h = grid.bounds.lo[j].abs().max(grid.bounds.hi[j].abs());
                    h / r.powi(g.weight(j) as i32)
                })
                .collect();
            let lattice = Lattice::uniform(BoxRegion::symmetric(&half), opts.coarse_nodes)?;
            DistanceField::compute_homogeneous(solver, g, lattice, &opts.sweep)?
        }
        _ => {
            let lattice = Lattice::uniform(grid.bounds.clone(), opts.coarse_nodes)?;
            DistanceField::compute(solver, p, lattice, &opts.sweep)?
        }
    };
    field.ball_mask(Some(solver), r, grid, opts.refine_band)
}

/// Homogeneous distance field from the origin on a box fitted to the unit
/// ball: the half-width along axis `j` is `1.15 · d(0, e_j)^{−w_j}`.
pub fn unit_ball_field(solver: &DistanceSolver, g: &Grading, opts: &BallOptions) -> Result<DistanceField> {
    let n = solver.dim();
    if g.dim() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: g.dim(),
        });
    }
    let origin = vec![0.0; n];
    let mut half = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = vec![0.0; n];
        e[j] = 1.0;
        let d = solver.distance(&origin, &e)?;
        if !d.converged || !(d.value > 0.0) {
            return Err(Error::NonConvergence(format!("distance to the unit vector e{}", j + 1)));
        }
        half.push(1.15 * d.value.powi(-(g.weight(j) as i32)));
    }
    let lattice = Lattice::uniform(BoxRegion::symmetric(&half), opts.coarse_nodes)?;
    DistanceField::compute_homogeneous(solver, g, lattice, &opts.sweep)
}
