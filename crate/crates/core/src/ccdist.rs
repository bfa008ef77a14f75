//! Carnot–Carathéodory distance by direct discretization of the action
//! problem: piecewise-constant controls, RK4 trajectories, an endpoint
//! penalty with multiplier updates, and a feasibility polish.

use std::sync::Mutex;

use argmin::core::{CostFunction, Executor, Gradient, State};
use argmin::solver::linesearch::MoreThuenteLineSearch;
use argmin::solver::quasinewton::LBFGS;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::compiled::CompiledFrame;
use crate::error::{Error, Result};
use crate::linalg::{damped_solve, min_norm_solve};
use crate::structure::{BracketTable, FlagOptions, SubRiemannianStructure};

mod field;
mod graph;
mod tangent;

pub use field::{ball_mask, unit_ball_field, BallMask, BallOptions, DistanceField, Lattice, Voxel};
pub use graph::{control_graph_distance, GraphOptions, GraphResult};
pub use tangent::{rescaled_structure, sample_pairs, tangent_convergence, TangentReport};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverOptions {
    /// Number of control segments of the first discretization.
    pub initial_segments: usize,
    pub max_segments: usize,
    /// RK4 steps per control segment.
    pub substeps: usize,
    /// Penalty continuation schedule `μ`.
    pub penalties: Vec<f64>,
    /// Multiplier updates per penalty value.
    pub multiplier_updates: usize,
    pub restarts: usize,
    /// Relative change between refinements accepted as converged.
    pub refine_tol: f64,
    pub endpoint_tol: f64,
    pub max_iters: u64,
    pub grad_tol: f64,
    pub seed: u64,
    /// Trajectories leaving this Euclidean radius are rejected.
    pub safety_radius: f64,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            initial_segments: 16,
            max_segments: 128,
            substeps: 2,
            penalties: vec![1e2, 1e3, 1e4, 1e5],
            multiplier_updates: 2,
            restarts: 8,
            refine_tol: 0.005,
            endpoint_tol: 1e-4,
            max_iters: 400,
            grad_tol: 1e-10,
            seed: 0,
            safety_radius: 1e6,
        }
    }
}

impl SolverOptions {
    /// Settings for warm-started sweeps over many nearby targets.
    pub fn sweep() -> Self {
        SolverOptions {
            initial_segments: 32,
            max_segments: 32,
            penalties: vec![1e3, 1e5],
            multiplier_updates: 2,
            restarts: 1,
            max_iters: 200,
            ..Self::default()
        }
    }
}

/// Piecewise-constant controls on `N` equal subintervals of `[0, 1]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlPath {
    pub segments: usize,
    /// Row-major `N × m`.
    pub controls: Vec<f64>,
    pub trajectory: Vec<Vec<f64>>,
    /// `(1/N) Σ_k |c_k|²`.
    pub action: f64,
    pub endpoint_gap: f64,
}

impl ControlPath {
    pub fn rank(&self) -> usize {
        self.controls.len() / self.segments.max(1)
    }

    pub fn control(&self, k: usize) -> &[f64] {
        let m = self.rank();
        &self.controls[k * m..(k + 1) * m]
    }

    /// Euclidean length `Σ |c_k| / N` (equals `√action` at constant speed).
    pub fn length(&self) -> f64 {
        let m = self.rank();
        self.controls
            .chunks(m)
            .map(|c| c.iter().map(|v| v * v).sum::<f64>().sqrt())
            .sum::<f64>()
            / self.segments as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceResult {
    pub value: f64,
    pub path: ControlPath,
    pub restarts_used: usize,
    pub converged: bool,
    /// `(N, value)` for every discretization level that was solved.
    pub refinements: Vec<(usize, f64)>,
}

struct Shooter<'a> {
    frame: &'a CompiledFrame,
    x0: &'a [f64],
    segments: usize,
    substeps: usize,
    safety: f64,
}

impl Shooter<'_> {
    fn n(&self) -> usize {
        self.frame.dim()
    }

    fn m(&self) -> usize {
        self.frame.rank()
    }

    fn h(&self) -> f64 {
        1.0 / (self.segments * self.substeps) as f64
    }

    fn rhs(&self, vals: &mut [f64], y: &[f64], u: &[f64], out: &mut [f64]) {
        let n = self.n();
        self.frame.values(y, vals);
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, &ui) in u.iter().enumerate() {
            for a in 0..n {
                out[a] += ui * vals[i * n + a];
            }
        }
    }

    /// Integrates the controls; stores stage points `y, z2, z3, z4` of every
    /// RK4 step when `stages` is given. `None` if the safety radius is left.
    fn forward(
        &self,
        c: &[f64],
        mut stages: Option<&mut Vec<f64>>,
        mut knots: Option<&mut Vec<Vec<f64>>>,
    ) -> Option<Vec<f64>> {
        let (n, m, h) = (self.n(), self.m(), self.h());
        let mut vals = vec![0.0; m * n];
        let mut y = self.x0.to_vec();
        let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        let mut z = vec![0.0; n];
        if let Some(s) = stages.as_deref_mut() {
            s.clear();
        }
        if let Some(t) = knots.as_deref_mut() {
            t.clear();
            t.push(y.clone());
        }
        for k in 0..self.segments {
            let u = &c[k * m..(k + 1) * m];
            for _ in 0..self.substeps {
                self.rhs(&mut vals, &y, u, &mut k1);
                if let Some(s) = stages.as_deref_mut() {
                    s.extend_from_slice(&y);
                }
                for a in 0..n {
                    z[a] = y[a] + 0.5 * h * k1[a];
                }
                self.rhs(&mut vals, &z, u, &mut k2);
                if let Some(s) = stages.as_deref_mut() {
                    s.extend_from_slice(&z);
                }
                for a in 0..n {
                    z[a] = y[a] + 0.5 * h * k2[a];
                }
                self.rhs(&mut vals, &z, u, &mut k3);
                if let Some(s) = stages.as_deref_mut() {
                    s.extend_from_slice(&z);
                }
                for a in 0..n {
                    z[a] = y[a] + h * k3[a];
                }
                self.rhs(&mut vals, &z, u, &mut k4);
                if let Some(s) = stages.as_deref_mut() {
                    s.extend_from_slice(&z);
                }
                for a in 0..n {
                    y[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
                }
                let r2: f64 = y.iter().map(|v| v * v).sum();
                if !(r2.sqrt() <= self.safety) {
                    return None;
                }
            }
            if let Some(t) = knots.as_deref_mut() {
                t.push(y.clone());
            }
        }
        Some(y)
    }

    /// Gradient of `⟨λ, γ_c(1)⟩` with respect to the controls.
    fn pullback(&self, c: &[f64], stages: &[f64], lam_end: &[f64]) -> Vec<f64> {
        let (n, m, h) = (self.n(), self.m(), self.h());
        let mut grad = vec![0.0; c.len()];
        let mut vals = vec![0.0; m * n];
        let mut jac = vec![0.0; m * n * n];
        let mut lam = lam_end.to_vec();
        let mut kb = [vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        let mut zb = vec![0.0; n];
        let steps = self.segments * self.substeps;
        // vjp at stage point `z` with cotangent `kbar`: accumulates into `zb`
        // and into the control gradient of segment `k`.
        let mut vjp = |z: &[f64], u: &[f64], kbar: &[f64], zb: &mut [f64], g: &mut [f64]| {
            self.frame.values(z, &mut vals);
            self.frame.jacobians(z, &mut jac);
            zb.iter_mut().for_each(|v| *v = 0.0);
            for i in 0..m {
                let mut gi = 0.0;
                for a in 0..n {
                    gi += vals[i * n + a] * kbar[a];
                }
                g[i] += gi;
                if u[i] == 0.0 {
                    continue;
                }
                for a in 0..n {
                    let w = u[i] * kbar[a];
                    if w == 0.0 {
                        continue;
                    }
                    let row = &jac[(i * n + a) * n..(i * n + a + 1) * n];
                    for b in 0..n {
                        zb[b] += w * row[b];
                    }
                }
            }
        };
        for step in (0..steps).rev() {
            let k = step / self.substeps;
            let u = &c[k * m..(k + 1) * m];
            let g = &mut grad[k * m..(k + 1) * m];
            let base = step * 4 * n;
            let pts = [
                &stages[base..base + n],
                &stages[base + n..base + 2 * n],
                &stages[base + 2 * n..base + 3 * n],
                &stages[base + 3 * n..base + 4 * n],
            ];
            for a in 0..n {
                kb[0][a] = h / 6.0 * lam[a];
                kb[1][a] = h / 3.0 * lam[a];
                kb[2][a] = h / 3.0 * lam[a];
                kb[3][a] = h / 6.0 * lam[a];
            }
            vjp(pts[3], u, &kb[3], &mut zb, g);
            for a in 0..n {
                lam[a] += zb[a];
                kb[2][a] += h * zb[a];
            }
            vjp(pts[2], u, &kb[2], &mut zb, g);
            for a in 0..n {
                lam[a] += zb[a];
                kb[1][a] += 0.5 * h * zb[a];
            }
            vjp(pts[1], u, &kb[1], &mut zb, g);
            for a in 0..n {
                lam[a] += zb[a];
                kb[0][a] += 0.5 * h * zb[a];
            }
            vjp(pts[0], u, &kb[0], &mut zb, g);
            for a in 0..n {
                lam[a] += zb[a];
            }
        }
        grad
    }

    /// Endpoint Jacobian `∂γ_c(1)/∂c` (`n × mN`).
    fn endpoint_jacobian(&self, c: &[f64]) -> Option<(Vec<f64>, DMatrix<f64>)> {
        let n = self.n();
        let mut stages = Vec::new();
        let end = self.forward(c, Some(&mut stages), None)?;
        let mut jm = DMatrix::zeros(n, c.len());
        for a in 0..n {
            let mut e = vec![0.0; n];
            e[a] = 1.0;
            let row = self.pullback(c, &stages, &e);
            for (j, v) in row.into_iter().enumerate() {
                jm[(a, j)] = v;
            }
        }
        Some((end, jm))
    }

    fn action(&self, c: &[f64]) -> f64 {
        c.iter().map(|v| v * v).sum::<f64>() / self.segments as f64
    }
}

/// `action + ⟨λ, γ(1) − y⟩ + μ/2 |γ(1) − y|²`.
struct Penalized<'a> {
    shooter: Shooter<'a>,
    target: &'a [f64],
    mu: f64,
    lambda: Vec<f64>,
    cache: Mutex<Option<(Vec<f64>, f64, Vec<f64>)>>,
}

impl Penalized<'_> {
    fn evaluate(&self, c: &[f64]) -> (f64, Vec<f64>) {
        if let Some((p, f, g)) = self.cache.lock().unwrap().as_ref() {
            if p.as_slice() == c {
                return (*f, g.clone());
            }
        }
        let sh = &self.shooter;
        let mut stages = Vec::new();
        let out = match sh.forward(c, Some(&mut stages), None) {
            None => (f64::INFINITY, vec![0.0; c.len()]),
            Some(end) => {
                let r: Vec<f64> = end.iter().zip(self.target).map(|(e, y)| e - y).collect();
                let lam_end: Vec<f64> = r
                    .iter()
                    .zip(&self.lambda)
                    .map(|(ri, li)| li + self.mu * ri)
                    .collect();
                let cost = sh.action(c)
                    + r.iter().zip(&self.lambda).map(|(a, b)| a * b).sum::<f64>()
                    + 0.5 * self.mu * r.iter().map(|v| v * v).sum::<f64>();
                let mut g = sh.pullback(c, &stages, &lam_end);
                let s = 2.0 / sh.segments as f64;
                for (gi, ci) in g.iter_mut().zip(c) {
                    *gi += s * ci;
                }
                (cost, g)
            }
        };
        *self.cache.lock().unwrap() = Some((c.to_vec(), out.0, out.1.clone()));
        out
    }
}

impl CostFunction for Penalized<'_> {
    type Param = Vec<f64>;
    type Output = f64;

    fn cost(&self, c: &Self::Param) -> std::result::Result<f64, argmin::core::Error> {
        Ok(self.evaluate(c).0)
    }
}

impl Gradient for Penalized<'_> {
    type Param = Vec<f64>;
    type Gradient = Vec<f64>;

    fn gradient(&self, c: &Self::Param) -> std::result::Result<Vec<f64>, argmin::core::Error> {
        Ok(self.evaluate(c).1)
    }
}

struct Solved {
    controls: Vec<f64>,
    action: f64,
    gap: f64,
    lambda: Vec<f64>,
}

/// Direct-method distance solver for one structure.
#[derive(Debug, Clone)]
pub struct DistanceSolver {
    frame: CompiledFrame,
    table: BracketTable,
    rank_tol: f64,
    pub opts: SolverOptions,
}

impl DistanceSolver {
    pub fn new(s: &SubRiemannianStructure, opts: SolverOptions) -> Result<Self> {
        if opts.initial_segments == 0 || opts.substeps == 0 || opts.penalties.is_empty() {
            return Err(Error::invalid("solver needs segments, substeps and penalties"));
        }
        let flag = FlagOptions::default();
        Ok(DistanceSolver {
            frame: CompiledFrame::of(s),
            table: BracketTable::new(s, flag.depth_bound)?,
            rank_tol: flag.rank_tol,
            opts,
        })
    }

    pub fn dim(&self) -> usize {
        self.frame.dim()
    }

    pub fn rank(&self) -> usize {
        self.frame.rank()
    }

    pub fn frame(&self) -> &CompiledFrame {
        &self.frame
    }

    fn shooter<'a>(&'a self, x: &'a [f64], segments: usize) -> Shooter<'a> {
        Shooter {
            frame: &self.frame,
            x0: x,
            segments,
            substeps: self.opts.substeps,
            safety: self.opts.safety_radius,
        }
    }

    fn check_point(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                got: p.len(),
            });
        }
        if p.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("points must be finite"));
        }
        Ok(())
    }

    fn minimize(&self, problem: Penalized<'_>, init: Vec<f64>) -> Vec<f64> {
        let ls = MoreThuenteLineSearch::new();
        let solver = LBFGS::new(ls, 10)
            .with_tolerance_grad(self.opts.grad_tol)
            .and_then(|s| s.with_tolerance_cost(1e-15))
            .expect("valid tolerances");
        let iters = self.opts.max_iters;
        match Executor::new(problem, solver)
            .configure(|s| s.param(init.clone()).max_iters(iters))
            .run()
        {
            Ok(res) => res
                .state()
                .get_best_param()
                .cloned()
                .filter(|p| p.iter().all(|v| v.is_finite()))
                .unwrap_or(init),
            Err(_) => init,
        }
    }

    /// Newton-type projection onto the endpoint constraint with minimal
    /// control change.
    fn polish(&self, sh: &Shooter<'_>, y: &[f64], c: &mut Vec<f64>) {
        let scale = 1.0 + y.iter().map(|v| v * v).sum::<f64>().sqrt();
        for _ in 0..8 {
            let Some((end, jm)) = sh.endpoint_jacobian(c) else {
                return;
            };
            let r = DVector::from_iterator(y.len(), y.iter().zip(&end).map(|(a, b)| a - b));
            if r.norm() < 1e-13 * scale {
                return;
            }
            let dc = min_norm_solve(&jm, &r, 1e-10);
            let trial: Vec<f64> = c.iter().zip(dc.iter()).map(|(a, b)| a + b).collect();
            match sh.forward(&trial, None, None) {
                Some(e2) => {
                    let r2: f64 = y.iter().zip(&e2).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
                    if r2 >= r.norm() {
                        return;
                    }
                    *c = trial;
                }
                None => return,
            }
        }
    }

    fn run_stages(&self, x: &[f64], y: &[f64], segments: usize, c0: Vec<f64>, lambda: Vec<f64>, mus: &[f64]) -> Solved {
        let sh = self.shooter(x, segments);
        let mut c = c0;
        let mut lambda = lambda;
        for &mu in mus {
            for _ in 0..self.opts.multiplier_updates.max(1) {
                let problem = Penalized {
                    shooter: self.shooter(x, segments),
                    target: y,
                    mu,
                    lambda: lambda.clone(),
                    cache: Mutex::new(None),
                };
                c = self.minimize(problem, c);
                if let Some(end) = sh.forward(&c, None, None) {
                    for ((l, e), t) in lambda.iter_mut().zip(&end).zip(y) {
                        *l += mu * (e - t);
                    }
                }
            }
        }
        self.polish(&sh, y, &mut c);
        let gap = match sh.forward(&c, None, None) {
            Some(end) => end.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
            None => f64::INFINITY,
        };
        Solved {
            action: sh.action(&c),
            controls: c,
            gap,
            lambda,
        }
    }

    /// Damped lift of the chord direction along the straight segment; the
    /// damping keeps controls bounded where the frame degenerates.
    fn straight_line(&self, x: &[f64], y: &[f64], segments: usize) -> Vec<f64> {
        let n = self.dim();
        let m = self.rank();
        let d = DVector::from_iterator(n, y.iter().zip(x).map(|(a, b)| a - b));
        let mut vals = vec![0.0; m * n];
        let mut c = Vec::with_capacity(segments * m);
        for k in 0..segments {
            let t = (k as f64 + 0.5) / segments as f64;
            let p: Vec<f64> = x.iter().zip(y).map(|(a, b)| a + t * (b - a)).collect();
            self.frame.values(&p, &mut vals);
            let a = DMatrix::from_fn(n, m, |r, i| vals[i * n + r]);
            c.extend(damped_solve(&a, &d, 1e-2).iter());
        }
        c
    }

    fn perturbed(&self, base: &[f64], segments: usize, amp: f64, seed: u64) -> Vec<f64> {
        let m = self.rank();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let modes = 3;
        let coef: Vec<(f64, f64)> = (0..m * modes)
            .map(|_| (rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let mut c = base.to_vec();
        for k in 0..segments {
            let t = (k as f64 + 0.5) / segments as f64;
            for i in 0..m {
                let mut v = 0.0;
                for f in 0..modes {
                    let (a, b) = coef[i * modes + f];
                    let w = 2.0 * std::f64::consts::PI * (f + 1) as f64 * t;
                    v += (a * w.cos() + b * w.sin()) / (f + 1) as f64;
                }
                c[k * m + i] += amp * v;
            }
        }
        c
    }

    fn finish(&self, x: &[f64], y: &[f64], segments: usize, controls: Vec<f64>) -> ControlPath {
        let sh = self.shooter(x, segments);
        let mut knots = Vec::new();
        let end = sh.forward(&controls, None, Some(&mut knots));
        let gap = end.map_or(f64::INFINITY, |e| {
            e.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt()
        });
        ControlPath {
            segments,
            action: sh.action(&controls),
            controls,
            trajectory: knots,
            endpoint_gap: gap,
        }
    }

    fn better(&self, a: &Solved, b: &Solved) -> bool {
        let tol = self.opts.endpoint_tol;
        match (a.gap <= tol, b.gap <= tol) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => a.action < b.action,
            (false, false) => a.gap < b.gap,
        }
    }

    fn refine(&self, x: &[f64], y: &[f64], first: Solved, segments: usize, restarts: usize) -> DistanceResult {
        let m = self.rank();
        let mut refinements = vec![(segments, first.action.sqrt())];
        let mut best = (segments, first.controls.clone(), first.action, first.gap);
        let mut current = first;
        let mut seg = segments;
        let mut agreed = false;
        let last_mu = *self.opts.penalties.last().unwrap();
        while seg * 2 <= self.opts.max_segments {
            let c2: Vec<f64> = (0..seg * 2)
                .flat_map(|k| current.controls[(k / 2) * m..(k / 2 + 1) * m].to_vec())
                .collect();
            seg *= 2;
            let next = self.run_stages(x, y, seg, c2, current.lambda.clone(), &[last_mu]);
            let prev_v = refinements.last().unwrap().1;
            let v = next.action.sqrt();
            refinements.push((seg, v));
            if next.gap <= self.opts.endpoint_tol && (next.action < best.2 || best.3 > self.opts.endpoint_tol) {
                best = (seg, next.controls.clone(), next.action, next.gap);
            }
            current = next;
            if (v - prev_v).abs() <= self.opts.refine_tol * prev_v.max(1e-12) {
                agreed = true;
                break;
            }
        }
        if self.opts.max_segments < segments * 2 {
            agreed = true;
        }
        let path = self.finish(x, y, best.0, best.1);
        DistanceResult {
            value: path.action.sqrt(),
            converged: agreed && path.endpoint_gap <= self.opts.endpoint_tol,
            path,
            restarts_used: restarts,
            refinements,
        }
    }

    fn trivial(&self, x: &[f64]) -> DistanceResult {
        let seg = self.opts.initial_segments;
        DistanceResult {
            value: 0.0,
            path: ControlPath {
                segments: seg,
                controls: vec![0.0; seg * self.rank()],
                trajectory: vec![x.to_vec(); seg + 1],
                action: 0.0,
                endpoint_gap: 0.0,
            },
            restarts_used: 0,
            converged: true,
            refinements: vec![(seg, 0.0)],
        }
    }

    /// `d(x, y)` from cold starts.
    pub fn distance(&self, x: &[f64], y: &[f64]) -> Result<DistanceResult> {
        self.check_point(x)?;
        self.check_point(y)?;
        self.table.growth(x, self.rank_tol)?;
        if x == y {
            return Ok(self.trivial(x));
        }
        let seg = self.opts.initial_segments;
        let base = self.straight_line(x, y, seg);
        let chord = y.iter().zip(x).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt();
        let amp = chord.max(chord.sqrt());
        let restarts = self.opts.restarts.max(1);
        let inits: Vec<Vec<f64>> = (0..restarts)
            .map(|r| {
                if r == 0 {
                    base.clone()
                } else {
                    self.perturbed(&base, seg, amp, self.opts.seed.wrapping_mul(1_000_003).wrapping_add(r as u64))
                }
            })
            .collect();
        let solved: Vec<Solved> = inits
            .into_par_iter()
            .map(|c0| self.run_stages(x, y, seg, c0, vec![0.0; y.len()], &self.opts.penalties))
            .collect();
        let best = solved
            .into_iter()
            .reduce(|a, b| if self.better(&b, &a) { b } else { a })
            .unwrap();
        Ok(self.refine(x, y, best, seg, restarts))
    }

    /// `d(x, y)` starting from the given controls on `warm_segments` segments.
    pub fn distance_from(&self, x: &[f64], y: &[f64], warm: &[f64], warm_segments: usize) -> Result<DistanceResult> {
        self.check_point(x)?;
        self.check_point(y)?;
        if warm_segments == 0 || warm.len() != warm_segments * self.rank() {
            return Err(Error::invalid("warm start has the wrong length"));
        }
        if x == y {
            return Ok(self.trivial(x));
        }
        let first = self.run_stages(x, y, warm_segments, warm.to_vec(), vec![0.0; y.len()], &self.opts.penalties);
        Ok(self.refine(x, y, first, warm_segments, 1))
    }

    /// Endpoint reached by the given controls from `x`.
    pub fn endpoint(&self, x: &[f64], controls: &[f64], segments: usize) -> Option<Vec<f64>> {
        self.shooter(x, segments).forward(controls, None, None)
    }
}

/// Cold-start distance with default options.
pub fn distance(s: &SubRiemannianStructure, x: &[f64], y: &[f64], opts: &SolverOptions) -> Result<DistanceResult> {
    DistanceSolver::new(s, opts.clone())?.distance(x, y)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::library;

    #[test]
    fn adjoint_gradient_matches_finite_differences() {
        let s = library::singruppo();
        let solver = DistanceSolver::new(&s, SolverOptions::default()).unwrap();
        let x = [0.1, -0.2, 0.3];
        let seg = 5;
        let sh = solver.shooter(&x, seg);
        let c: Vec<f64> = (0..seg * 3).map(|i| ((i * 7 % 5) as f64 - 2.0) * 0.3).collect();
        let lam = [0.3, -1.1, 0.7];
        let mut stages = Vec::new();
        sh.forward(&c, Some(&mut stages), None).unwrap();
        let g = sh.pullback(&c, &stages, &lam);
        let f = |c: &[f64]| -> f64 {
            let e = sh.forward(c, None, None).unwrap();
            e.iter().zip(&lam).map(|(a, b)| a * b).sum()
        };
        for j in 0..c.len() {
            let mut cp = c.clone();
            let mut cm = c.clone();
            cp[j] += 1e-6;
            cm[j] -= 1e-6;
            let fd = (f(&cp) - f(&cm)) / 2e-6;
            assert!((fd - g[j]).abs() < 1e-7, "{j}: {fd} vs {}", g[j]);
        }
    }

    #[test]
    fn euclidean_distance() {
        let r = distance(&library::euclidean(2), &[0.0, 0.0], &[3.0, 4.0], &SolverOptions::default()).unwrap();
        assert!(r.converged);
        assert!((r.value - 5.0).abs() < 0.05, "{}", r.value);
        assert_eq!(r.value, r.path.action.sqrt());
    }

    #[test]
    fn heisenberg_horizontal_unit() {
        let r = distance(&library::heisenberg(), &[0.0; 3], &[1.0, 0.0, 0.0], &SolverOptions::default()).unwrap();
        assert!(r.converged, "{r:?}");
        assert!((r.value - 1.0).abs() < 0.01, "{}", r.value);
    }

    #[test]
    fn coincident_points() {
        let r = distance(&library::heisenberg(), &[0.2; 3], &[0.2; 3], &SolverOptions::default()).unwrap();
        assert_eq!(r.value, 0.0);
        assert!(r.converged);
    }
}
