//! Control-graph shortest paths: breadth-first search over concatenations of
//! constant-control primitives, deduplicated by spatial cell. Every returned
//! path is explicit, so its length bounds the distance to the point reached.

use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::compiled::CompiledFrame;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GraphOptions {
    /// Control magnitude of every primitive.
    pub c_max: f64,
    /// Primitives per unit time; each has length `c_max / k`.
    pub k: usize,
    /// Directions per plane for rank-2 frames (other ranks use axes and
    /// diagonals).
    pub angles: usize,
    /// Cell edge for deduplication (defaults to half a primitive length).
    pub cell: Option<f64>,
    /// Acceptance radius around the target (defaults to one cell diagonal).
    pub tol: Option<f64>,
    pub max_nodes: usize,
    pub max_levels: usize,
}

impl Default for GraphOptions {
    fn default() -> Self {
        GraphOptions {
            c_max: 4.0,
            k: 64,
            angles: 16,
            cell: None,
            tol: None,
            max_nodes: 2_000_000,
            max_levels: 4096,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GraphResult {
    /// Length of the explicit path.
    pub length: f64,
    /// Its endpoint (within `tol` of the target).
    pub reached: Vec<f64>,
    pub primitives: usize,
    pub nodes: usize,
}

fn directions(m: usize, angles: usize) -> Vec<Vec<f64>> {
    if m == 2 {
        return (0..angles)
            .map(|a| {
                let t = 2.0 * std::f64::consts::PI * a as f64 / angles as f64;
                vec![t.cos(), t.sin()]
            })
            .collect();
    }
    let mut out = Vec::new();
    for i in 0..m {
        for s in [1.0, -1.0] {
            let mut v = vec![0.0; m];
            v[i] = s;
            out.push(v);
        }
    }
    let d = std::f64::consts::FRAC_1_SQRT_2;
    for i in 0..m {
        for j in i + 1..m {
            for (a, b) in [(1.0, 1.0), (1.0, -1.0), (-1.0, 1.0), (-1.0, -1.0)] {
                let mut v = vec![0.0; m];
                v[i] = a * d;
                v[j] = b * d;
                out.push(v);
            }
        }
    }
    out
}

fn flow(frame: &CompiledFrame, y: &[f64], c: &[f64], t: f64, steps: usize) -> Vec<f64> {
    let n = y.len();
    let h = t / steps as f64;
    let mut y = y.to_vec();
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut z = vec![0.0; n];
    for _ in 0..steps {
        frame.combine(&y, c, &mut k1);
        for a in 0..n {
            z[a] = y[a] + 0.5 * h * k1[a];
        }
        frame.combine(&z, c, &mut k2);
        for a in 0..n {
            z[a] = y[a] + 0.5 * h * k2[a];
        }
        frame.combine(&z, c, &mut k3);
        for a in 0..n {
            z[a] = y[a] + h * k3[a];
        }
        frame.combine(&z, c, &mut k4);
        for a in 0..n {
            y[a] += h / 6.0 * (k1[a] + 2.0 * k2[a] + 2.0 * k3[a] + k4[a]);
        }
    }
    y
}

/// Shortest primitive path from `x` into the `tol`-ball around `y`.
pub fn control_graph_distance(frame: &CompiledFrame, x: &[f64], y: &[f64], opts: &GraphOptions) -> Result<Option<GraphResult>> {
    let n = frame.dim();
    if x.len() != n || y.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: x.len().max(y.len()),
        });
    }
    if !(opts.c_max > 0.0) || opts.k == 0 {
        return Err(Error::invalid("control graph needs c_max > 0 and k ≥ 1"));
    }
    let step = opts.c_max / opts.k as f64;
    let cell = opts.cell.unwrap_or(0.5 * step);
    let tol = opts.tol.unwrap_or(cell * (n as f64).sqrt());
    let dirs: Vec<Vec<f64>> = directions(frame.rank(), opts.angles)
        .into_iter()
        .map(|d| d.into_iter().map(|v| v * opts.c_max).collect())
        .collect();
    let dt = 1.0 / opts.k as f64;
    let key = |p: &[f64]| -> Vec<i64> { p.iter().map(|v| (v / cell).round() as i64).collect() };
    let dist = |p: &[f64]| -> f64 { p.iter().zip(y).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt() };

    let mut seen: HashSet<Vec<i64>> = HashSet::new();
    seen.insert(key(x));
    let mut level = vec![x.to_vec()];
    let mut nodes = 1;
    for depth in 0..=opts.max_levels {
        if let Some(best) = level
            .iter()
            .filter(|p| dist(p) <= tol)
            .min_by(|a, b| dist(a).partial_cmp(&dist(b)).unwrap())
        {
            return Ok(Some(GraphResult {
                length: depth as f64 * step,
                reached: best.clone(),
                primitives: depth,
                nodes,
            }));
        }
        let mut next = Vec::new();
        for p in &level {
            for c in &dirs {
                let q = flow(frame, p, c, dt, 4);
                if q.iter().all(|v| v.is_finite()) && seen.insert(key(&q)) {
                    next.push(q);
                }
            }
        }
        nodes += next.len();
        if next.is_empty() || nodes > opts.max_nodes {
            return Ok(None);
        }
        level = next;
    }
    Ok(None)
}
