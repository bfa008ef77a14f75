//! Axis-aligned boxes, voxel grids and sampled grid functions.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxRegion {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
}

impl BoxRegion {
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        if lo.iter().zip(&hi).any(|(a, b)| !(a < b)) {
            return Err(Error::invalid("box must have lo < hi on every axis"));
        }
        Ok(BoxRegion { lo, hi })
    }

    /// `[-h, h]^n`.
    pub fn cube(n: usize, h: f64) -> Self {
        BoxRegion {
            lo: vec![-h; n],
            hi: vec![h; n],
        }
    }

    /// `[-h_1, h_1] × … × [-h_n, h_n]`.
    pub fn symmetric(half: &[f64]) -> Self {
        BoxRegion {
            lo: half.iter().map(|h| -h).collect(),
            hi: half.to_vec(),
        }
    }

    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .zip(self.lo.iter().zip(&self.hi))
            .all(|(v, (a, b))| *a <= *v && *v <= *b)
    }

    pub fn volume(&self) -> f64 {
        self.lo.iter().zip(&self.hi).map(|(a, b)| b - a).product()
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    pub fn expand(&self, by: f64) -> Self {
        BoxRegion {
            lo: self.lo.iter().map(|a| a - by).collect(),
            hi: self.hi.iter().map(|b| b + by).collect(),
        }
    }
}

/// Regular grid of `res[j]` cells per axis over a box; samples live at cell
/// centers. Linear indices run with the first axis fastest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub bounds: BoxRegion,
    pub res: Vec<usize>,
}

impl Grid {
    pub fn new(bounds: BoxRegion, res: Vec<usize>) -> Result<Self> {
        if res.len() != bounds.dim() {
            return Err(Error::DimensionMismatch {
                expected: bounds.dim(),
                got: res.len(),
            });
        }
        if res.iter().any(|&r| r == 0) {
            return Err(Error::invalid("grid resolution must be positive"));
        }
        Ok(Grid { bounds, res })
    }

    pub fn uniform(bounds: BoxRegion, res: usize) -> Self {
        let n = bounds.dim();
        Grid {
            bounds,
            res: vec![res; n],
        }
    }

    pub fn dim(&self) -> usize {
        self.res.len()
    }

    pub fn len(&self) -> usize {
        self.res.iter().product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spacing(&self) -> Vec<f64> {
        (0..self.dim())
            .map(|j| (self.bounds.hi[j] - self.bounds.lo[j]) / self.res[j] as f64)
            .collect()
    }

    pub fn cell_volume(&self) -> f64 {
        self.spacing().iter().product()
    }

    pub fn index_to_multi(&self, mut idx: usize, out: &mut [usize]) {
        for (j, &r) in self.res.iter().enumerate() {
            out[j] = idx % r;
            idx /= r;
        }
    }

    pub fn multi_to_index(&self, m: &[usize]) -> usize {
        let mut idx = 0;
        for j in (0..self.dim()).rev() {
            idx = idx * self.res[j] + m[j];
        }
        idx
    }

    pub fn center(&self, idx: usize) -> Vec<f64> {
        let mut m = vec![0; self.dim()];
        self.index_to_multi(idx, &mut m);
        self.center_of(&m)
    }

    pub fn center_of(&self, m: &[usize]) -> Vec<f64> {
        let h = self.spacing();
        (0..self.dim())
            .map(|j| self.bounds.lo[j] + (m[j] as f64 + 0.5) * h[j])
            .collect()
    }

    pub fn centers(&self) -> impl Iterator<Item = Vec<f64>> + '_ {
        (0..self.len()).map(move |i| self.center(i))
    }

    pub fn sample(&self, f: impl Fn(&[f64]) -> f64) -> GridFunction {
        let values = self.centers().map(|x| f(&x)).collect();
        GridFunction {
            grid: self.clone(),
            values,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    pub grid: Grid,
    pub values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("grid function values must be finite"));
        }
        Ok(GridFunction { grid, values })
    }

    pub fn constant(grid: Grid, c: f64) -> Self {
        let values = vec![c; grid.len()];
        GridFunction { grid, values }
    }

    /// Midpoint-rule integral.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.cell_volume()
    }

    /// Multilinear interpolation between cell centers, clamped at the edges.
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let h = g.spacing();
        let n = g.dim();
        let mut base = vec![0usize; n];
        let mut frac = vec![0.0; n];
        for j in 0..n {
            let s = (x[j] - g.bounds.lo[j]) / h[j] - 0.5;
            let max = (g.res[j] - 1) as f64;
            let s = s.clamp(0.0, max);
            let b = (s.floor() as usize).min(g.res[j].saturating_sub(2));
            base[j] = b;
            frac[j] = if g.res[j] == 1 { 0.0 } else { s - b as f64 };
        }
        let mut acc = 0.0;
        let mut corner = vec![0usize; n];
        for mask in 0..(1usize << n) {
            let mut w = 1.0;
            for j in 0..n {
                let up = (mask >> j) & 1 == 1;
                if up && g.res[j] == 1 {
                    w = 0.0;
                    break;
                }
                corner[j] = base[j] + up as usize;
                w *= if up { frac[j] } else { 1.0 - frac[j] };
            }
            if w != 0.0 {
                acc += w * self.values[g.multi_to_index(&corner)];
            }
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_round_trip() {
        let g = Grid::new(BoxRegion::cube(3, 1.0), vec![3, 4, 5]).unwrap();
        let mut m = vec![0; 3];
        for i in 0..g.len() {
            g.index_to_multi(i, &mut m);
            assert_eq!(g.multi_to_index(&m), i);
        }
    }

    #[test]
    fn interpolation_is_exact_on_affine_functions() {
        let g = Grid::uniform(BoxRegion::cube(2, 1.0), 8);
        let f = g.sample(|x| 2.0 * x[0] - x[1] + 0.25);
        let v = f.interpolate(&[0.13, -0.41]);
        assert!((v - (2.0 * 0.13 + 0.41 + 0.25)).abs() < 1e-12);
    }

    #[test]
    fn midpoint_integral() {
        let g = Grid::uniform(BoxRegion::cube(2, 1.0), 16);
        let f = g.sample(|x| x[0] + 1.0);
        assert!((f.integral() - 4.0).abs() < 1e-12);
    }
}
