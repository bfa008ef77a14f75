//! Experiment configuration: a TOML file plus command-line overrides.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subriemann::blowup::BlowupOptions;
use subriemann::ccdist::{BallOptions, GraphOptions, SolverOptions};
use subriemann::grid::BoxRegion;
use subriemann::nilpotent::Grading;
use subriemann::parse::{parse_frame, parse_scalar};
use subriemann::structure::{FlagOptions, SubRiemannianStructure};
use subriemann::vectorfield::VolumeWeight;
use subriemann::{library, Error};

use crate::fail::Failure;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seed: u64,
    pub structure: StructureConfig,
    pub point: Option<Vec<f64>>,
    pub grading: Option<Vec<u32>>,
    pub flag: FlagConfig,
    pub metric: MetricConfig,
    pub distance: DistanceConfig,
    pub ball: BallConfig,
    pub set: SetConfig,
    pub grid: GridConfig,
    pub perimeter: PerimeterConfig,
    pub verify: VerifyConfig,
    pub solver: SolverOptions,
    pub ball_options: BallOptions,
    pub graph: GraphOptions,
    pub blowup: BlowupOptions,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StructureConfig {
    /// Built-in name such as `heisenberg` or `euclidean:3`.
    pub builtin: Option<String>,
    /// Inline frame, one `NAME = field` per line.
    pub frame: Option<String>,
    pub name: Option<String>,
    pub dim: Option<usize>,
    /// Density of the volume form; `1` when absent.
    pub volume_weight: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FlagConfig {
    pub rank_tol: f64,
    pub depth_bound: usize,
    pub regularity_radius: f64,
    pub regularity_samples: usize,
}

impl Default for FlagConfig {
    fn default() -> Self {
        let d = FlagOptions::default();
        FlagConfig {
            rank_tol: d.rank_tol,
            depth_bound: d.depth_bound,
            regularity_radius: d.regularity_radius,
            regularity_samples: d.regularity_samples,
        }
    }
}

impl FlagConfig {
    pub fn options(&self) -> FlagOptions {
        FlagOptions {
            rank_tol: self.rank_tol,
            depth_bound: self.depth_bound,
            regularity_radius: self.regularity_radius,
            regularity_samples: self.regularity_samples,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MetricConfig {
    pub vector: Option<Vec<f64>>,
    /// Second vector for the scalar product.
    pub other: Option<Vec<f64>>,
    pub span_tol: f64,
}

impl Default for MetricConfig {
    fn default() -> Self {
        MetricConfig {
            vector: None,
            other: None,
            span_tol: subriemann::metric::DEFAULT_SPAN_TOL,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DistanceConfig {
    pub from: Option<Vec<f64>>,
    pub to: Option<Vec<f64>>,
    /// Also run the control-graph upper bound.
    pub graph: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BallConfig {
    pub radii: Vec<f64>,
}

impl Default for BallConfig {
    fn default() -> Self {
        BallConfig { radii: vec![1.0] }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SetConfig {
    /// `E = {level < 0}`.
    pub level: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GridConfig {
    pub resolution: usize,
    /// `[lo, hi]` per axis.
    pub bounds: Option<Vec<[f64; 2]>>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            resolution: 64,
            bounds: None,
        }
    }
}

impl GridConfig {
    pub fn region(&self) -> Result<Option<BoxRegion>, Failure> {
        let Some(b) = &self.bounds else {
            return Ok(None);
        };
        let lo = b.iter().map(|p| p[0]).collect();
        let hi = b.iter().map(|p| p[1]).collect();
        Ok(Some(BoxRegion::new(lo, hi)?))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PerimeterConfig {
    /// `surface`, `flow`, `mollified` or `all`.
    pub estimator: String,
    pub flow_times: Option<Vec<f64>>,
    pub mollifier_scales: Option<Vec<f64>>,
}

impl Default for PerimeterConfig {
    fn default() -> Self {
        PerimeterConfig {
            estimator: "all".into(),
            flow_times: None,
            mollifier_scales: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct VerifyConfig {
    pub samples: usize,
    pub tolerance: f64,
}

impl Default for VerifyConfig {
    fn default() -> Self {
        VerifyConfig {
            samples: 5,
            tolerance: 1e-8,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputConfig {
    pub json: Option<PathBuf>,
    pub csv: Option<PathBuf>,
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, Failure> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Failure::config(format!("cannot read {}: {e}", path.display())))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, Failure> {
        toml::from_str(text).map_err(|e| Failure::config(format!("config: {e}")))
    }

    /// Propagates the seed to every randomized component.
    pub fn apply_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.solver.seed = seed;
        self.ball_options.sweep.seed = seed;
        self.blowup.solver.seed = seed;
        self.blowup.ball.sweep.seed = seed;
    }

    /// SHA-256 of the canonical JSON form of the resolved configuration.
    pub fn hash(&self) -> String {
        let canonical = serde_json::to_value(self).expect("config serializes");
        let digest = Sha256::digest(canonical.to_string().as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn structure(&self) -> Result<SubRiemannianStructure, Failure> {
        let sc = &self.structure;
        let mut s = match (&sc.builtin, &sc.frame) {
            (Some(_), Some(_)) => {
                return Err(Failure::config("give either a built-in structure or an inline frame"))
            }
            (None, None) => return Err(Failure::config("no structure given")),
            (Some(name), None) => library::builtin(name)?,
            (None, Some(text)) => {
                let fields = parse_frame(text, sc.dim)?;
                let frame = fields.into_iter().map(|(_, f)| f).collect();
                let name = sc.name.clone().unwrap_or_else(|| "inline".into());
                SubRiemannianStructure::new(name, frame, VolumeWeight::One)?
            }
        };
        if let Some(w) = &sc.volume_weight {
            s.volume_weight = VolumeWeight::Density(parse_scalar(w, Some(s.dim()))?);
        }
        Ok(s)
    }

    pub fn point(&self, n: usize) -> Result<Vec<f64>, Failure> {
        let p = self.point.clone().unwrap_or_else(|| vec![0.0; n]);
        check_len(&p, n)?;
        Ok(p)
    }

    pub fn grading(&self) -> Result<Option<Grading>, Failure> {
        Ok(match &self.grading {
            Some(w) => Some(Grading::new(w.clone())?),
            None => None,
        })
    }
}

pub fn check_len(v: &[f64], n: usize) -> Result<(), Failure> {
    if v.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            got: v.len(),
        }
        .into());
    }
    Ok(())
}
