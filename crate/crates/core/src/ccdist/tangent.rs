//! Convergence of rescaled distances `d_ε` to the distance `d̂` of the
//! nilpotent approximation.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{DistanceSolver, SolverOptions};
use crate::error::{Error, Result};
use crate::nilpotent::{remainder_rescale, truncate, Grading};
use crate::scalar::{rational_from_f64, Rational};
use crate::structure::SubRiemannianStructure;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TangentReport {
    pub epsilons: Vec<f64>,
    /// `sup |d_ε − d̂|` over the retained pairs, per `ε`. A lower bound for
    /// the supremum over the whole ball.
    pub sup_gap: Vec<f64>,
    /// `d̂` per pair (`None` when excluded).
    pub d_hat: Vec<Option<f64>>,
    /// `d_ε` per `ε` and pair.
    pub d_eps: Vec<Vec<Option<f64>>>,
    /// Pairs dropped for non-convergence.
    pub excluded: usize,
}

/// Pairs drawn uniformly from `K_R = {z : |z_j| ≤ R^{w_j}}`.
pub fn sample_pairs(g: &Grading, radius: f64, count: usize, seed: u64) -> Vec<(Vec<f64>, Vec<f64>)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let point = |rng: &mut ChaCha8Rng| -> Vec<f64> {
        g.weights()
            .iter()
            .map(|&w| {
                let b = radius.powi(w as i32);
                rng.gen_range(-b..=b)
            })
            .collect()
    };
    (0..count).map(|_| (point(&mut rng), point(&mut rng))).collect()
}

/// Frame `X_i^ε = ε (δ_{1/ε})_* X_i = X̂_i + ε-rescaled remainder`.
pub fn rescaled_structure(s: &SubRiemannianStructure, g: &Grading, eps: &Rational) -> Result<SubRiemannianStructure> {
    let na = truncate(s, g)?;
    let frame = na
        .truncated
        .iter()
        .zip(&na.remainders)
        .map(|(h, r)| h.add(&remainder_rescale(r, g, eps)?))
        .collect::<Result<Vec<_>>>()?;
    SubRiemannianStructure::from_poly(format!("{}@{eps}", s.name), frame)
}

/// For every `ε`, compares `d_ε` and `d̂` on `pairs`. `d̂` is solved cold;
/// `d_ε` starts from the `d̂` controls so both share their discretization.
pub fn tangent_convergence(
    s: &SubRiemannianStructure,
    g: &Grading,
    epsilons: &[f64],
    pairs: &[(Vec<f64>, Vec<f64>)],
    opts: &SolverOptions,
) -> Result<TangentReport> {
    if epsilons.iter().any(|e| !(*e > 0.0)) {
        return Err(Error::invalid("scales must be positive"));
    }
    let na = truncate(s, g)?;
    let hat = na.structure(format!("{}^", s.name))?;
    let hat_solver = DistanceSolver::new(&hat, opts.clone())?;
    let mut warm_opts = opts.clone();
    warm_opts.restarts = 1;
    warm_opts.max_segments = 0;
    let hats: Vec<Option<(f64, Vec<f64>, usize)>> = pairs
        .iter()
        .map(|(x, y)| {
            let r = hat_solver.distance(x, y)?;
            Ok(r.converged.then(|| (r.value, r.path.controls, r.path.segments)))
        })
        .collect::<Result<_>>()?;
    let mut d_eps = Vec::with_capacity(epsilons.len());
    let mut sup_gap = Vec::with_capacity(epsilons.len());
    let mut dropped = vec![false; pairs.len()];
    for (k, h) in hats.iter().enumerate() {
        dropped[k] = h.is_none();
    }
    for &eps in epsilons {
        let q = rational_from_f64(eps).ok_or_else(|| Error::invalid("scale must be finite"))?;
        let se = rescaled_structure(s, g, &q)?;
        let solver = DistanceSolver::new(&se, warm_opts.clone())?;
        let mut row = Vec::with_capacity(pairs.len());
        for (k, (x, y)) in pairs.iter().enumerate() {
            let Some((_, c, seg)) = &hats[k] else {
                row.push(None);
                continue;
            };
            let r = solver.distance_from(x, y, c, *seg)?;
            if r.converged {
                row.push(Some(r.value));
            } else {
                dropped[k] = true;
                row.push(None);
            }
        }
        d_eps.push(row);
    }
    for row in &d_eps {
        let sup = row
            .iter()
            .zip(&hats)
            .enumerate()
            .filter(|(k, _)| !dropped[*k])
            .filter_map(|(_, (d, h))| Some((d.as_ref()? - h.as_ref()?.0).abs()))
            .fold(0.0, f64::max);
        sup_gap.push(sup);
    }
    Ok(TangentReport {
        epsilons: epsilons.to_vec(),
        sup_gap,
        d_hat: hats.iter().map(|h| h.as_ref().map(|v| v.0)).collect(),
        d_eps,
        excluded: dropped.iter().filter(|d| **d).count(),
    })
}
