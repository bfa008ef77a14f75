//! One function per subcommand. Each returns a JSON object, optional CSV rows
//! and an exit status.

use serde::Serialize;
use serde_json::{json, Map, Value};
use subriemann::blowup::blowup_run;
use subriemann::carnot::{group_law_from_flows, law_invariants, left_invariance_check, GroupLaw};
use subriemann::ccdist::{control_graph_distance, sample_pairs, unit_ball_field, DistanceField, DistanceSolver, Lattice};
use subriemann::grid::{BoxRegion, Grid};
use subriemann::metric::{frame_kernel, quadratic_form, scalar_product, FormValue};
use subriemann::nilpotent::{dilate, nilpotency_check, truncate, Grading, NilpotentApprox};
use subriemann::perimeter::{
    default_flow_schedule, default_mollifier_schedule, flow_estimator, mollified_estimator, surface_estimator, PerimeterReport,
    SetRep,
};
use subriemann::poly::Polynomial;
use subriemann::scalar::rational_from_f64;
use subriemann::structure::{classify_regularity, point_flag, Regularity, SubRiemannianStructure};
use subriemann::vectorfield::{lie_bracket, PolyVectorField};
use subriemann::{Error, Rational};

use crate::config::{check_len, ExperimentConfig};
use crate::fail::{Failure, EXIT_CHECKS_FAILED, EXIT_NON_CONVERGENCE};

pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(header: &[&str]) -> Self {
        Table {
            header: header.iter().map(|s| s.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }
}

pub struct Outcome {
    pub json: Map<String, Value>,
    pub csv: Option<Table>,
    /// Human-readable table printed instead of JSON.
    pub text: Option<String>,
    pub code: i32,
}

impl Outcome {
    fn json(json: Map<String, Value>) -> Self {
        Outcome {
            json,
            csv: None,
            text: None,
            code: 0,
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("serializable")
}

fn object(v: Value) -> Map<String, Value> {
    match v {
        Value::Object(m) => m,
        _ => unreachable!("json! object literal"),
    }
}

fn regular(r: Regularity) -> Value {
    match r {
        Regularity::Regular => Value::Bool(true),
        Regularity::Singular => Value::Bool(false),
        Regularity::Unknown => Value::Null,
    }
}

fn require_polynomial(s: &SubRiemannianStructure, command: &str) -> Result<(), Failure> {
    if s.is_polynomial() {
        Ok(())
    } else {
        Err(Failure::precondition(format!(
            "{command} needs a polynomial frame; {} has non-polynomial coefficients",
            s.name
        )))
    }
}

fn shift_polys(p: &[f64]) -> Result<Vec<Polynomial<Rational>>, Failure> {
    p.iter()
        .enumerate()
        .map(|(j, &v)| {
            let c = rational_from_f64(v).ok_or_else(|| Failure::config("point must be finite"))?;
            Ok(&Polynomial::var(j) + &Polynomial::constant(c))
        })
        .collect()
}

/// The frame in coordinates centred at `p`.
fn translate(s: &SubRiemannianStructure, p: &[f64]) -> Result<SubRiemannianStructure, Failure> {
    if p.iter().all(|v| *v == 0.0) {
        return Ok(s.clone());
    }
    let subs = shift_polys(p)?;
    let frame = s
        .poly_frame()?
        .iter()
        .map(|f| PolyVectorField::new(f.components().iter().map(|c| c.substitute(&subs)).collect()))
        .collect();
    let mut t = SubRiemannianStructure::from_poly(format!("{}@{:?}", s.name, p), frame)?;
    t.volume_weight = s.volume_weight.clone();
    Ok(t)
}

fn grading_for(cfg: &ExperimentConfig, s: &SubRiemannianStructure) -> Result<Grading, Failure> {
    let g = match cfg.grading()? {
        Some(g) => g,
        None => Grading::at_origin(s)?,
    };
    if g.dim() != s.dim() {
        return Err(Error::DimensionMismatch {
            expected: s.dim(),
            got: g.dim(),
        }
        .into());
    }
    Ok(g)
}

fn approximation(cfg: &ExperimentConfig, command: &str) -> Result<(SubRiemannianStructure, NilpotentApprox), Failure> {
    let s = cfg.structure()?;
    require_polynomial(&s, command)?;
    let p = cfg.point(s.dim())?;
    let t = translate(&s, &p)?;
    let g = grading_for(cfg, &t)?;
    let na = truncate(&t, &g)?;
    Ok((t, na))
}

fn header(s: &SubRiemannianStructure) -> Map<String, Value> {
    object(json!({ "structure": s.name, "dim": s.dim(), "rank": s.rank() }))
}

/// Frame text in the input grammar, one `NAME = field` line per field.
pub fn frame_text(fields: &[PolyVectorField<Rational>], prefix: &str) -> String {
    fields
        .iter()
        .enumerate()
        .map(|(i, f)| format!("{prefix}{} = {f}\n", i + 1))
        .collect()
}

fn fmt_rational(c: &Rational) -> String {
    c.to_string()
}

/// Polynomial in `x1..xn, y1..yn` (the first `n` variables are `x`).
fn fmt_xy(p: &Polynomial<Rational>, n: usize) -> String {
    let mut out = String::new();
    for (m, c) in p.terms() {
        let vars: Vec<String> = m
            .exponents()
            .iter()
            .enumerate()
            .filter(|(_, e)| **e > 0)
            .map(|(i, &e)| {
                let name = if i < n { format!("x{}", i + 1) } else { format!("y{}", i - n + 1) };
                if e == 1 {
                    name
                } else {
                    format!("{name}^{e}")
                }
            })
            .collect();
        let neg = c < &Rational::from_integer(0.into());
        let abs = if neg { -c.clone() } else { c.clone() };
        let coef = fmt_rational(&abs);
        let body = match (vars.is_empty(), coef.as_str()) {
            (true, _) => coef,
            (false, "1") => vars.join("*"),
            (false, _) => format!("{coef}*{}", vars.join("*")),
        };
        match (out.is_empty(), neg) {
            (true, true) => out.push('-'),
            (true, false) => {}
            (false, true) => out.push_str(" - "),
            (false, false) => out.push_str(" + "),
        }
        out.push_str(&body);
    }
    if out.is_empty() {
        out.push('0');
    }
    out
}

pub fn flag(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let s = cfg.structure()?;
    let p = cfg.point(s.dim())?;
    let f = point_flag(&s, &p, &cfg.flag.options())?;
    let mut out = header(&s);
    out.extend(object(json!({
        "point": f.point,
        "growth": f.growth,
        "weights": f.weights,
        "step": f.step,
        "Q": f.homogeneous_dimension,
        "regular": regular(f.regular),
    })));
    Ok(Outcome::json(out))
}

pub fn nilpotent(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let (t, na) = approximation(cfg, "nilpotent")?;
    let report = nilpotency_check(&na, na.grading.step() as usize)?;
    let mut out = header(&cfg.structure()?);
    out.extend(object(json!({
        "point": cfg.point(t.dim())?,
        "weights": na.grading.weights(),
        "Q": na.homogeneous_dimension(),
        "truncated": na.truncated.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
        "remainders": na.remainders.iter().map(|f| f.to_string()).collect::<Vec<_>>(),
        "frame": frame_text(&na.truncated, "X"),
        "nilpotency": to_value(&report),
    })));
    Ok(Outcome::json(out))
}

fn required(v: &Option<Vec<f64>>, what: &str) -> Result<Vec<f64>, Failure> {
    v.clone().ok_or_else(|| Failure::config(format!("missing {what}")))
}

fn form_value(v: FormValue<f64>) -> Value {
    match v {
        FormValue::Finite(x) => json!(x),
        FormValue::Infinite => json!("infinite"),
    }
}

pub fn metric(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let s = cfg.structure()?;
    let n = s.dim();
    let p = cfg.point(n)?;
    let v = required(&cfg.metric.vector, "metric vector (--vector)")?;
    check_len(&v, n)?;
    let tol = cfg.metric.span_tol;
    let e = quadratic_form(&s, &p, &v, tol)?;
    let mut out = header(&s);
    out.extend(object(json!({
        "point": p,
        "vector": v,
        "value": form_value(e.value),
        "controls": e.controls,
        "residual": e.residual,
        "kernel": frame_kernel(&s, &p),
    })));
    if let Some(w) = &cfg.metric.other {
        check_len(w, n)?;
        out.insert("other".into(), json!(w));
        out.insert("scalar_product".into(), json!(scalar_product(&s, &p, &v, w, tol)?));
    }
    Ok(Outcome::json(out))
}

pub fn distance(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let s = cfg.structure()?;
    let n = s.dim();
    let from = match &cfg.distance.from {
        Some(x) => x.clone(),
        None => cfg.point(n)?,
    };
    let to = required(&cfg.distance.to, "target point (--to)")?;
    check_len(&from, n)?;
    check_len(&to, n)?;
    let solver = DistanceSolver::new(&s, cfg.solver.clone())?;
    let r = solver.distance(&from, &to)?;
    let mut out = header(&s);
    out.extend(object(json!({
        "from": from,
        "to": to,
        "distance": r.value,
        "converged": r.converged,
        "restarts_used": r.restarts_used,
        "refinements": r.refinements,
        "segments": r.path.segments,
        "endpoint_gap": r.path.endpoint_gap,
        "action": r.path.action,
    })));
    if cfg.distance.graph {
        let g = control_graph_distance(solver.frame(), &from, &to, &cfg.graph)?;
        out.insert("graph".into(), to_value(&g));
    }
    let mut outcome = Outcome::json(out);
    if !r.converged {
        outcome.code = EXIT_NON_CONVERGENCE;
    }
    Ok(outcome)
}

fn max_radius(radii: &[f64]) -> Result<f64, Failure> {
    if radii.is_empty() || radii.iter().any(|r| !(*r > 0.0)) {
        return Err(Failure::config("radii must be positive and non-empty"));
    }
    Ok(radii.iter().cloned().fold(0.0, f64::max))
}

/// Distance field from `p` covering the largest ball.
fn ball_field(cfg: &ExperimentConfig, s: &SubRiemannianStructure, p: &[f64], rmax: f64) -> Result<(DistanceSolver, DistanceField), Failure> {
    let solver = DistanceSolver::new(s, cfg.solver.clone())?;
    let opts = &cfg.ball_options;
    if p.iter().all(|v| *v == 0.0) {
        if let Ok(g) = grading_for(cfg, s) {
            if let Ok(na) = truncate(s, &g) {
                if na.remainders.iter().all(|r| r.is_zero()) {
                    let field = unit_ball_field(&solver, &g, opts)?;
                    return Ok((solver, field));
                }
            }
        }
    }
    let flag = point_flag(s, p, &cfg.flag.options())?;
    let half: Vec<f64> = flag.weights.iter().map(|&w| 2.0 * rmax.max(1.0).powi(w as i32)).collect();
    let lo = p.iter().zip(&half).map(|(a, h)| a - h).collect();
    let hi = p.iter().zip(&half).map(|(a, h)| a + h).collect();
    let lattice = Lattice::uniform(BoxRegion::new(lo, hi)?, opts.coarse_nodes)?;
    let field = DistanceField::compute(&solver, p, lattice, &opts.sweep)?;
    Ok((solver, field))
}

pub fn ball(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let s = cfg.structure()?;
    require_polynomial(&s, "ball")?;
    let n = s.dim();
    let p = cfg.point(n)?;
    let radii = cfg.ball.radii.clone();
    let rmax = max_radius(&radii)?;
    let fixed = cfg.grid.region()?;
    if let Some(b) = &fixed {
        if b.dim() != n {
            return Err(Error::DimensionMismatch { expected: n, got: b.dim() }.into());
        }
    }
    let (solver, field) = ball_field(cfg, &s, &p, rmax)?;
    let mut table = Table::new(&["radius", "volume", "voxels", "unknown", "touches_boundary"]);
    let mut balls = Vec::new();
    for &r in &radii {
        let bounds = match &fixed {
            Some(b) => b.clone(),
            None => field
                .ball_bounds(r, 0.15)
                .ok_or_else(|| Failure::precondition(format!("ball of radius {r} leaves the sampled region")))?,
        };
        let grid = Grid::uniform(bounds, cfg.grid.resolution);
        let mask = field.ball_mask(Some(&solver), r, &grid, cfg.ball_options.refine_band)?;
        table.push(vec![
            r.to_string(),
            mask.volume().to_string(),
            mask.count().to_string(),
            mask.unknown.to_string(),
            mask.touches_boundary().to_string(),
        ]);
        balls.push(json!({
            "radius": r,
            "bounds": to_value(&grid.bounds),
            "resolution": cfg.grid.resolution,
            "volume": mask.volume(),
            "voxels": mask.count(),
            "unknown": mask.unknown,
            "refined": mask.refined,
            "touches_boundary": mask.touches_boundary(),
            "runs": to_value(&mask.run_lengths()),
        }));
    }
    let mut out = header(&s);
    out.insert("center".into(), json!(p));
    out.insert("homogeneous".into(), json!(field.is_homogeneous()));
    out.insert("balls".into(), Value::Array(balls));
    let mut outcome = Outcome::json(out);
    outcome.csv = Some(table);
    Ok(outcome)
}

fn law_json(law: &GroupLaw) -> Value {
    let n = law.dim();
    json!({
        "variables": "x1..xn is the left factor, y1..yn the right factor",
        "product": law.symbolic().iter().map(|p| fmt_xy(p, n)).collect::<Vec<_>>(),
        "inverse": law.symbolic_inverse().iter().map(|p| fmt_xy(p, n)).collect::<Vec<_>>(),
        "basis": law.basis().iter().map(|b| json!({
            "layer": b.layer,
            "word": b.word,
            "field": b.field.to_string(),
        })).collect::<Vec<_>>(),
        "structure_constants": to_value(&law.structure_constants()),
    })
}

pub fn group(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let (_, na) = approximation(cfg, "group")?;
    let law = group_law_from_flows(&na)?;
    let samples = 20;
    let inv = law_invariants(&law, &na.grading, samples, cfg.seed)?;
    let left = left_invariance_check(&law, &na, samples, cfg.seed, 1e-6)?;
    let mut out = header(&cfg.structure()?);
    out.insert("weights".into(), json!(na.grading.weights()));
    out.insert("law".into(), law_json(&law));
    out.insert("invariants".into(), to_value(&inv));
    out.insert("left_invariance".into(), to_value(&left));
    Ok(Outcome::json(out))
}

fn set_rep(cfg: &ExperimentConfig, n: usize, resolution: usize) -> Result<SetRep, Failure> {
    let level = cfg
        .set
        .level
        .as_ref()
        .ok_or_else(|| Failure::config("missing set level function (--level)"))?;
    let bounds = cfg.grid.region()?.unwrap_or_else(|| BoxRegion::cube(n, 1.0));
    if bounds.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: bounds.dim() }.into());
    }
    let set = SetRep::parse(level, bounds, resolution)?;
    if set.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: set.dim() }.into());
    }
    Ok(set)
}

fn perimeter_rows(table: &mut Table, r: &PerimeterReport, name: &str) {
    for sv in &r.schedule {
        table.push(vec![name.into(), "total".into(), sv.scale.to_string(), sv.total_variation.to_string()]);
    }
    table.push(vec![name.into(), "total".into(), "0".into(), r.total_variation.to_string()]);
}

pub fn perimeter(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let s = cfg.structure()?;
    require_polynomial(&s, "perimeter")?;
    let set = set_rep(cfg, s.dim(), cfg.grid.resolution)?;
    let which = cfg.perimeter.estimator.as_str();
    if !matches!(which, "surface" | "flow" | "mollified" | "all") {
        return Err(Failure::config(format!("unknown estimator '{which}'")));
    }
    let mut table = Table::new(&["estimator", "field", "scale", "value"]);
    let mut out = header(&s);
    out.insert("level".into(), json!(cfg.set.level));
    out.insert("bounds".into(), to_value(&set.bounds));
    out.insert("resolution".into(), json!(set.resolution));
    if matches!(which, "surface" | "all") {
        let r = surface_estimator(&s, &set, None)?;
        perimeter_rows(&mut table, &r, "surface");
        out.insert("surface".into(), to_value(&r));
    }
    if matches!(which, "mollified" | "all") {
        let sched = cfg
            .perimeter
            .mollifier_scales
            .clone()
            .unwrap_or_else(|| default_mollifier_schedule(&set));
        let r = mollified_estimator(&s, &set, &sched)?;
        perimeter_rows(&mut table, &r, "mollified");
        out.insert("mollified".into(), to_value(&r));
    }
    if matches!(which, "flow" | "all") {
        let sched = cfg.perimeter.flow_times.clone().unwrap_or_else(|| default_flow_schedule(&set));
        let mut reports = Vec::new();
        for (i, x) in s.frame().iter().enumerate() {
            let r = flow_estimator(&s, &set, x, &sched)?;
            let name = format!("X{}", i + 1);
            for (t, v) in &r.values {
                table.push(vec!["flow".into(), name.clone(), t.to_string(), v.to_string()]);
            }
            table.push(vec!["flow".into(), name, "0".into(), r.value.to_string()]);
            reports.push(to_value(&r));
        }
        out.insert("flow".into(), Value::Array(reports));
    }
    let mut outcome = Outcome::json(out);
    outcome.csv = Some(table);
    Ok(outcome)
}

pub fn blowup(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let s = cfg.structure()?;
    require_polynomial(&s, "blowup")?;
    let n = s.dim();
    let p = cfg.point(n)?;
    let t = translate(&s, &p)?;
    let set = set_rep(cfg, n, cfg.blowup.resolution)?;
    let set = if p.iter().all(|v| *v == 0.0) {
        set
    } else {
        let shifted = set.level.substitute(&shift_polys(&p)?);
        let lo = set.bounds.lo.iter().zip(&p).map(|(a, b)| a - b).collect();
        let hi = set.bounds.hi.iter().zip(&p).map(|(a, b)| a - b).collect();
        SetRep::new(shifted, BoxRegion::new(lo, hi)?, set.resolution)?
    };
    let g = grading_for(cfg, &t)?;
    let r = blowup_run(&t, &set, &g, &cfg.blowup)?;
    let mut table = Table::new(&["radius", "l1_gap", "gap_fraction", "max_monotone", "max_abs_invariance", "density_lhs"]);
    for (k, &rad) in r.radii.iter().enumerate() {
        let mono = r.monotone_pairings[k].iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let inv = r.invariance_pairings[k].iter().map(|v| v.abs()).fold(0.0, f64::max);
        let dens = r.density_lhs.get(k).copied().flatten().map(|v| v.to_string()).unwrap_or_default();
        table.push(vec![
            rad.to_string(),
            r.l1_gap[k].to_string(),
            (r.l1_gap[k] / r.window_volume).to_string(),
            mono.to_string(),
            inv.to_string(),
            dens,
        ]);
    }
    let mut out = header(&s);
    out.insert("point".into(), json!(p));
    out.insert("level".into(), json!(cfg.set.level));
    out.insert("weights".into(), json!(g.weights()));
    out.extend(object(to_value(&r)));
    let mut outcome = Outcome::json(out);
    outcome.csv = Some(table);
    Ok(outcome)
}

struct Check {
    name: &'static str,
    status: &'static str,
    detail: String,
}

impl Check {
    fn new(name: &'static str, passed: bool, detail: String) -> Self {
        Check {
            name,
            status: if passed { "pass" } else { "fail" },
            detail,
        }
    }

    fn skip(name: &'static str, detail: String) -> Self {
        Check {
            name,
            status: "skip",
            detail,
        }
    }

    fn error(name: &'static str, e: impl std::fmt::Display) -> Self {
        Check::new(name, false, e.to_string())
    }
}

fn jacobi_check(frame: &[PolyVectorField<Rational>]) -> Result<Check, Error> {
    let mut fields = frame.to_vec();
    for i in 0..frame.len() {
        for j in i + 1..frame.len() {
            fields.push(lie_bracket(&frame[i], &frame[j])?);
        }
    }
    let mut triples = 0;
    let mut failures = 0;
    let mut antisym = 0;
    for a in &fields {
        for b in &fields {
            if !lie_bracket(a, b)?.add(&lie_bracket(b, a)?)?.is_zero() {
                antisym += 1;
            }
            for c in &fields {
                let t1 = lie_bracket(a, &lie_bracket(b, c)?)?;
                let t2 = lie_bracket(b, &lie_bracket(c, a)?)?;
                let t3 = lie_bracket(c, &lie_bracket(a, b)?)?;
                triples += 1;
                if !t1.add(&t2)?.add(&t3)?.is_zero() {
                    failures += 1;
                }
            }
        }
    }
    Ok(Check::new(
        "bracket_identities",
        failures == 0 && antisym == 0,
        format!("{triples} Jacobi triples, {failures} nonzero; {antisym} antisymmetry failures"),
    ))
}

fn metric_check(s: &SubRiemannianStructure, points: &[Vec<f64>]) -> Result<Check, Error> {
    let frame = s.numeric::<f64>();
    let mut worst: f64 = 0.0;
    for x in points {
        let m = frame.matrix(x);
        for i in 0..s.rank() {
            let v: Vec<f64> = m.column(i).iter().copied().collect();
            if v.iter().all(|c| *c == 0.0) {
                continue;
            }
            match quadratic_form(s, x, &v, 1e-8)?.value {
                FormValue::Finite(g) => worst = worst.max(g - 1.0),
                FormValue::Infinite => worst = f64::INFINITY,
            }
        }
    }
    Ok(Check::new(
        "metric_frame_bound",
        worst <= 1e-9,
        format!("max G_x(X_i(x)) - 1 = {worst:e} over {} points", points.len()),
    ))
}

fn add(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x + y).collect()
}

struct Distances<'a> {
    solver: &'a DistanceSolver,
    unconverged: usize,
}

impl Distances<'_> {
    fn d(&mut self, x: &[f64], y: &[f64]) -> Result<f64, Error> {
        let r = self.solver.distance(x, y)?;
        if !r.converged {
            self.unconverged += 1;
        }
        Ok(r.value)
    }
}

fn distance_checks(
    cfg: &ExperimentConfig,
    s: &SubRiemannianStructure,
    na: &NilpotentApprox,
    p: &[f64],
    checks: &mut Vec<Check>,
) -> Result<(), Error> {
    let samples = cfg.verify.samples;
    let g = &na.grading;
    let pairs = sample_pairs(g, 0.5, samples * 2, cfg.seed);
    let solver = DistanceSolver::new(s, cfg.solver.clone())?;
    let mut d = Distances {
        solver: &solver,
        unconverged: 0,
    };
    let mut sym: f64 = 0.0;
    for (a, b) in pairs.iter().take(samples) {
        let (x, y) = (add(p, a), add(p, b));
        let dxy = d.d(&x, &y)?;
        let dyx = d.d(&y, &x)?;
        sym = sym.max((dxy - dyx).abs() / dxy.max(dyx).max(1e-12));
    }
    checks.push(Check::new("distance_symmetry", sym <= 0.03, format!("max relative asymmetry {sym:.3e}")));
    let mut tri: f64 = 0.0;
    for k in 0..samples {
        let x = add(p, &pairs[k].0);
        let y = add(p, &pairs[k].1);
        let z = add(p, &pairs[samples + k].0);
        let dxz = d.d(&x, &z)?;
        let dxy = d.d(&x, &y)?;
        let dyz = d.d(&y, &z)?;
        tri = tri.max((dxz - dxy - dyz) / (dxy + dyz).max(1e-12));
    }
    checks.push(Check::new("triangle_inequality", tri <= 0.03, format!("max relative excess {tri:.3e}")));

    let hat = na.structure(format!("{}^", s.name))?;
    let hat_solver = DistanceSolver::new(&hat, cfg.solver.clone())?;
    let mut dh = Distances {
        solver: &hat_solver,
        unconverged: 0,
    };
    let zero = vec![0.0; s.dim()];
    let mut hom: f64 = 0.0;
    for (z, _) in pairs.iter().take(samples) {
        let d1 = dh.d(&zero, z)?;
        let d2 = dh.d(&zero, &dilate(z, g, 2.0)?)?;
        hom = hom.max((d2 - 2.0 * d1).abs() / (2.0 * d1).max(1e-12));
    }
    checks.push(Check::new("tangent_homogeneity", hom <= 0.02, format!("max |d(0,δ2 z) - 2d(0,z)| / 2d(0,z) = {hom:.3e}")));
    let unconverged = d.unconverged + dh.unconverged;
    checks.push(Check::new("solver_convergence", unconverged == 0, format!("{unconverged} unconverged solves")));
    Ok(())
}

pub fn verify(cfg: &ExperimentConfig) -> Result<Outcome, Failure> {
    let s = cfg.structure()?;
    require_polynomial(&s, "verify")?;
    let n = s.dim();
    let p = cfg.point(n)?;
    let mut checks = Vec::new();
    let frame = s.poly_frame()?;
    checks.push(jacobi_check(&frame).unwrap_or_else(|e| Check::error("bracket_identities", e)));

    let flag = point_flag(&s, &p, &cfg.flag.options());
    match &flag {
        Ok(f) => checks.push(Check::new(
            "hormander",
            f.growth.last() == Some(&n),
            format!("growth {:?}, weights {:?}, Q = {}", f.growth, f.weights, f.homogeneous_dimension),
        )),
        Err(e) => checks.push(Check::error("hormander", e)),
    }
    let opts = cfg.flag.options();
    match classify_regularity(&s, &p, opts.regularity_radius, opts.regularity_samples, &opts) {
        Ok(r) => checks.push(Check::new(
            "regularity_classified",
            r.verdict != Regularity::Unknown,
            format!("{:?}", r.verdict).to_lowercase(),
        )),
        Err(e) => checks.push(Check::error("regularity_classified", e)),
    }
    let points = subriemann::structure::halton_ball(&p, 0.5, cfg.verify.samples.max(1) * 4);
    checks.push(metric_check(&s, &points).unwrap_or_else(|e| Check::error("metric_frame_bound", e)));

    let t = translate(&s, &p)?;
    let na = match grading_for(cfg, &t).and_then(|g| Ok(truncate(&t, &g)?)) {
        Ok(na) => Some(na),
        Err(e) => {
            checks.push(Check::error("nilpotent_approximation", e));
            None
        }
    };
    if let Some(na) = &na {
        match nilpotency_check(na, na.grading.step() as usize) {
            Ok(r) => checks.push(Check::new(
                "nilpotent_approximation",
                r.passed,
                format!("step {}, truncated growth {:?}", r.step_bound, r.growth_truncated),
            )),
            Err(e) => checks.push(Check::error("nilpotent_approximation", e)),
        }
        match group_law_from_flows(na) {
            Ok(law) => {
                let tol = cfg.verify.tolerance;
                match law_invariants(&law, &na.grading, 20, cfg.seed) {
                    Ok(inv) => checks.push(Check::new("group_axioms", inv.max() <= tol, format!("max violation {:.3e}", inv.max()))),
                    Err(e) => checks.push(Check::error("group_axioms", e)),
                }
                match left_invariance_check(&law, na, 20, cfg.seed, 1e-6) {
                    Ok(r) => checks.push(Check::new("left_invariance", r.passed, format!("max error {:.3e}", r.max_error))),
                    Err(e) => checks.push(Check::error("left_invariance", e)),
                }
            }
            Err(e @ (Error::UnsupportedStep(_) | Error::IsotropyNotVerified { .. })) => {
                checks.push(Check::skip("group_axioms", e.to_string()));
                checks.push(Check::skip("left_invariance", e.to_string()));
            }
            Err(e) => checks.push(Check::error("group_axioms", e)),
        }
        if let Err(e) = distance_checks(cfg, &t, na, &vec![0.0; n], &mut checks) {
            checks.push(Check::error("distance", e));
        }
    }

    let mut text = format!("{:<24} {:<6} {}\n", "check", "status", "detail");
    for c in &checks {
        text.push_str(&format!("{:<24} {:<6} {}\n", c.name, c.status, c.detail));
    }
    let failed = checks.iter().filter(|c| c.status == "fail").count();
    let mut table = Table::new(&["check", "status", "detail"]);
    for c in &checks {
        table.push(vec![c.name.into(), c.status.into(), c.detail.clone()]);
    }
    let mut out = header(&s);
    out.insert("point".into(), json!(p));
    out.insert(
        "checks".into(),
        Value::Array(
            checks
                .iter()
                .map(|c| json!({ "check": c.name, "status": c.status, "detail": c.detail }))
                .collect(),
        ),
    );
    out.insert("failed".into(), json!(failed));
    Ok(Outcome {
        json: out,
        csv: Some(table),
        text: Some(text),
        code: if failed == 0 { 0 } else { EXIT_CHECKS_FAILED },
    })
}
