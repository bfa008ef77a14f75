//! `subriemann`: configuration-driven experiment runner.

mod commands;
mod config;
mod fail;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use commands::{Outcome, Table};
use config::ExperimentConfig;
use fail::Failure;

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Parser)]
#[command(name = "subriemann", version, about = "Sub-Riemannian geometry experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Growth vector, weights and homogeneous dimension at a point.
    Flag(Common),
    /// Nilpotent approximation in privileged coordinates.
    Nilpotent(Common),
    /// Sub-Riemannian quadratic form `G_x(v)`.
    Metric(Common),
    /// Carnot-Carathéodory distance between two points.
    Distance(Common),
    /// Voxel masks of CC balls.
    Ball(Common),
    /// Group law of the tangent cone with structure constants.
    Group(Common),
    /// Perimeter of `{level < 0}` by the surface, flow and mollified estimators.
    Perimeter(Common),
    /// Blowup of a set at the origin towards a vertical halfspace.
    Blowup(Common),
    /// Property suite for a structure, printed as a pass/fail table.
    Verify(Common),
}

#[derive(Args, Clone, Default)]
struct Common {
    /// TOML experiment configuration.
    #[arg(long, short)]
    config: Option<PathBuf>,
    /// Seed for every randomized check.
    #[arg(long)]
    seed: Option<u64>,
    /// Built-in structure, e.g. `heisenberg` or `euclidean:3`.
    #[arg(long)]
    structure: Option<String>,
    /// Inline frame; `;` separates `NAME = field` definitions.
    #[arg(long)]
    frame: Option<String>,
    /// Ambient dimension of an inline frame.
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    point: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',')]
    grading: Option<Vec<u32>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    from: Option<Vec<f64>>,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    to: Option<Vec<f64>>,
    /// Tangent vector for `metric`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    vector: Option<Vec<f64>>,
    /// Second vector for the scalar product in `metric`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    other: Option<Vec<f64>>,
    /// Also run the control-graph upper bound in `distance`.
    #[arg(long)]
    graph: bool,
    /// Radii for `ball` and `blowup`.
    #[arg(long, value_delimiter = ',')]
    radii: Option<Vec<f64>>,
    /// Level function of the set `{level < 0}`.
    #[arg(long, allow_hyphen_values = true)]
    level: Option<String>,
    /// Grid box as `lo1,hi1,lo2,hi2,...`.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    bounds: Option<Vec<f64>>,
    /// Voxels per axis.
    #[arg(long)]
    resolution: Option<usize>,
    /// `surface`, `flow`, `mollified` or `all`.
    #[arg(long)]
    estimator: Option<String>,
    /// Skip the density ratios in `blowup`.
    #[arg(long)]
    no_density: bool,
    /// Write the JSON result here as well as to stdout.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Write the per-radius/per-scale CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
}

impl Common {
    fn resolve(&self, blowup: bool) -> Result<ExperimentConfig, Failure> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        if let Some(s) = &self.structure {
            cfg.structure.builtin = Some(s.clone());
            cfg.structure.frame = None;
        }
        if let Some(f) = &self.frame {
            cfg.structure.frame = Some(f.replace(';', "\n"));
            cfg.structure.builtin = None;
        }
        if let Some(n) = self.dim {
            cfg.structure.dim = Some(n);
        }
        if let Some(p) = &self.point {
            cfg.point = Some(p.clone());
        }
        if let Some(g) = &self.grading {
            cfg.grading = Some(g.clone());
        }
        if let Some(v) = &self.from {
            cfg.distance.from = Some(v.clone());
        }
        if let Some(v) = &self.to {
            cfg.distance.to = Some(v.clone());
        }
        if let Some(v) = &self.vector {
            cfg.metric.vector = Some(v.clone());
        }
        if let Some(v) = &self.other {
            cfg.metric.other = Some(v.clone());
        }
        if self.graph {
            cfg.distance.graph = true;
        }
        if let Some(r) = &self.radii {
            cfg.ball.radii = r.clone();
            cfg.blowup.radii = r.clone();
        }
        if let Some(l) = &self.level {
            cfg.set.level = Some(l.clone());
        }
        if let Some(b) = &self.bounds {
            if b.len() % 2 != 0 || b.is_empty() {
                return Err(Failure::config("--bounds needs lo,hi pairs"));
            }
            cfg.grid.bounds = Some(b.chunks(2).map(|c| [c[0], c[1]]).collect());
        }
        if let Some(r) = self.resolution {
            if blowup {
                cfg.blowup.resolution = r;
            } else {
                cfg.grid.resolution = r;
            }
        }
        if let Some(e) = &self.estimator {
            cfg.perimeter.estimator = e.clone();
        }
        if self.no_density {
            cfg.blowup.density = false;
        }
        if let Some(o) = &self.output {
            cfg.output.json = Some(o.clone());
        }
        if let Some(c) = &self.csv {
            cfg.output.csv = Some(c.clone());
        }
        let seed = self.seed.unwrap_or(cfg.seed);
        cfg.apply_seed(seed);
        Ok(cfg)
    }
}

fn write_csv(path: &PathBuf, table: &Table) -> Result<(), Failure> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

fn run(cli: &Cli) -> Result<i32, Failure> {
    let (name, common, f): (&str, &Common, fn(&ExperimentConfig) -> Result<Outcome, Failure>) = match &cli.command {
        Command::Flag(c) => ("flag", c, commands::flag),
        Command::Nilpotent(c) => ("nilpotent", c, commands::nilpotent),
        Command::Metric(c) => ("metric", c, commands::metric),
        Command::Distance(c) => ("distance", c, commands::distance),
        Command::Ball(c) => ("ball", c, commands::ball),
        Command::Group(c) => ("group", c, commands::group),
        Command::Perimeter(c) => ("perimeter", c, commands::perimeter),
        Command::Blowup(c) => ("blowup", c, commands::blowup),
        Command::Verify(c) => ("verify", c, commands::verify),
    };
    let cfg = common.resolve(name == "blowup")?;
    let outcome = f(&cfg).map_err(|e| e.context(name))?;
    let mut doc = serde_json::Map::new();
    doc.insert("schema_version".into(), json!(SCHEMA_VERSION));
    doc.insert("command".into(), json!(name));
    doc.insert("config_hash".into(), json!(cfg.hash()));
    doc.insert("seed".into(), json!(cfg.seed));
    doc.extend(outcome.json);
    let text = serde_json::to_string_pretty(&Value::Object(doc)).expect("json");
    let mut stdout = std::io::stdout().lock();
    match &outcome.text {
        Some(t) => stdout.write_all(t.as_bytes())?,
        None => writeln!(stdout, "{text}")?,
    }
    if let Some(p) = &cfg.output.json {
        std::fs::write(p, format!("{text}\n"))?;
    }
    if let (Some(p), Some(t)) = (&cfg.output.csv, &outcome.csv) {
        write_csv(p, t)?;
    }
    Ok(outcome.code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { fail::EXIT_CONFIG } else { 0 };
            let _ = e.print();
            return ExitCode::from(code as u8);
        }
    };
    match run(&cli) {
        Ok(code) => ExitCode::from(code as u8),
        Err(f) => {
            eprintln!("error: {f}");
            ExitCode::from(f.code as u8)
        }
    }
}
