//! Batch experiments: parameter sweeps written as CSV or JSON curves.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rayon::prelude::*;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::analytic::{Analytic, HandoffQuery, Movement, RateQuery};
use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::geometry::sample_deployment;
use crate::montecarlo::{
    mc_association, mc_coverage_curve, mc_handoff_probability_curve, mc_handoff_rate, Estimate, HandoffCounting,
    McSettings,
};
use crate::scalar::db_to_linear;
use crate::tessellation;
use crate::validation::{run_suite, Check};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Coverage,
    RateCoverage,
    Association,
    HandoffProb,
    HandoffRate,
    Tessellate,
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Engine {
    Analytic,
    MonteCarlo,
    #[default]
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Format {
    #[default]
    Csv,
    Json,
}

/// Sweepable parameter. Threshold-like variables leave the model fixed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Variable {
    TauDb,
    /// Rate threshold, bit/s.
    Gamma,
    R,
    Vt,
    Sigma,
    Mu,
    Lambda,
    Sections,
    Speed,
}

macro_rules! names {
    ($ty:ident { $($v:ident => $s:literal),* $(,)? }) => {
        impl $ty {
            pub const ALL: &'static [$ty] = &[$($ty::$v),*];

            pub fn as_str(self) -> &'static str {
                match self { $($ty::$v => $s),* }
            }
        }

        impl FromStr for $ty {
            type Err = Error;

            fn from_str(s: &str) -> Result<Self> {
                match s {
                    $($s => Ok($ty::$v),)*
                    _ => Err(Error::Parse(format!(
                        "unknown {} `{s}` (expected one of: {})",
                        stringify!($ty).to_lowercase(),
                        [$($s),*].join(", ")
                    ))),
                }
            }
        }

        impl std::fmt::Display for $ty {
            fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
                f.write_str(self.as_str())
            }
        }
    };
}

names!(Quantity {
    Coverage => "coverage",
    RateCoverage => "rate-coverage",
    Association => "association",
    HandoffProb => "handoff-prob",
    HandoffRate => "handoff-rate",
    Tessellate => "tessellate",
    Validate => "validate",
});
names!(Engine { Analytic => "analytic", MonteCarlo => "mc", Both => "both" });
names!(Format { Csv => "csv", Json => "json" });
names!(Variable {
    TauDb => "tau-db",
    Gamma => "gamma",
    R => "r",
    Vt => "vt",
    Sigma => "sigma",
    Mu => "mu",
    Lambda => "lambda",
    Sections => "sections",
    Speed => "speed",
});

pub fn parse_movement(s: &str) -> Result<Movement> {
    match s {
        "away" => Ok(Movement::Away),
        "perpendicular" => Ok(Movement::Perpendicular),
        _ => Err(Error::Parse(format!("unknown movement `{s}` (expected away, perpendicular)"))),
    }
}

fn movement_str(m: Movement) -> &'static str {
    match m {
        Movement::Away => "away",
        Movement::Perpendicular => "perpendicular",
    }
}

pub fn parse_counting(s: &str) -> Result<HandoffCounting> {
    match s {
        "every-trigger" => Ok(HandoffCounting::EveryTrigger),
        "changed-server" => Ok(HandoffCounting::ChangedServer),
        _ => Err(Error::Parse(format!(
            "unknown counting `{s}` (expected every-trigger, changed-server)"
        ))),
    }
}

fn counting_str(c: HandoffCounting) -> &'static str {
    match c {
        HandoffCounting::EveryTrigger => "every-trigger",
        HandoffCounting::ChangedServer => "changed-server",
    }
}

impl Variable {
    fn is_query(self) -> bool {
        matches!(self, Variable::TauDb | Variable::Gamma | Variable::R | Variable::Vt)
    }
}

impl Quantity {
    pub fn accepts(self, v: Variable) -> bool {
        use Variable::*;
        let model_var = matches!(v, Sigma | Mu | Lambda | Sections);
        match self {
            Quantity::Coverage => v == TauDb || model_var,
            Quantity::RateCoverage => v == Gamma || model_var,
            Quantity::Association => v == R || model_var,
            Quantity::HandoffProb => v == Vt || model_var,
            Quantity::HandoffRate => v == Speed || model_var,
            Quantity::Tessellate | Quantity::Validate => false,
        }
    }

    fn default_sweep(self) -> Option<Sweep> {
        let range = |lo: f64, hi: f64, step: f64| -> Vec<f64> {
            let n = ((hi - lo) / step).round() as usize;
            (0..=n).map(|i| lo + step * i as f64).collect()
        };
        let (variable, grid) = match self {
            Quantity::Coverage => (Variable::TauDb, range(10.0, 35.0, 1.0)),
            Quantity::RateCoverage => (Variable::Gamma, range(0.25e9, 5e9, 0.25e9)),
            Quantity::Association => (Variable::R, range(10.0, 300.0, 10.0)),
            Quantity::HandoffProb => (Variable::Vt, range(5.0, 50.0, 5.0)),
            Quantity::HandoffRate => (Variable::Sigma, range(0.0, 1.0, 0.2)),
            Quantity::Tessellate | Quantity::Validate => return None,
        };
        Some(Sweep { variable, grid })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Sweep {
    pub variable: Variable,
    pub grid: Vec<f64>,
}

impl Sweep {
    pub fn new(variable: Variable, grid: Vec<f64>) -> Self {
        Self { variable, grid }
    }
}

/// Everything needed to reproduce one batch of output files.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentPlan {
    pub quantity: Quantity,
    /// x-axis; `None` takes the quantity's default grid.
    pub sweep: Option<Sweep>,
    /// One curve per value.
    pub series: Option<Sweep>,
    pub engine: Engine,
    pub format: Format,
    pub out_dir: PathBuf,
    pub config: ExperimentConfig,
    pub seed: u64,
    /// Drops per Monte-Carlo point; runs per point for the handoff rate.
    pub drops: usize,
    pub tau_db: f64,
    pub gamma: f64,
    pub r: f64,
    pub vt: f64,
    pub movement: Movement,
    pub counting: HandoffCounting,
    pub resolution: usize,
    /// Worker threads; `None` uses every core.
    pub workers: Option<usize>,
}

impl ExperimentPlan {
    pub fn new(quantity: Quantity, out_dir: impl Into<PathBuf>) -> Self {
        Self {
            quantity,
            sweep: None,
            series: None,
            engine: Engine::Both,
            format: Format::Csv,
            out_dir: out_dir.into(),
            config: ExperimentConfig::standard(),
            seed: 1,
            drops: 10_000,
            tau_db: 20.0,
            gamma: 1e9,
            r: 50.0,
            vt: 30.0,
            movement: Movement::Away,
            counting: HandoffCounting::EveryTrigger,
            resolution: tessellation::DEFAULT_RESOLUTION,
            workers: None,
        }
    }

    fn x_sweep(&self) -> Option<Sweep> {
        self.sweep.clone().or_else(|| self.quantity.default_sweep())
    }

    /// Checks the plan and every parameter combination it would evaluate.
    pub fn validate(&self) -> Result<()> {
        self.config.validate().into_result()?;
        if self.drops == 0 {
            return Err(Error::invalid("drops must be ≥ 1"));
        }
        if self.workers == Some(0) {
            return Err(Error::invalid("workers must be ≥ 1"));
        }
        let q = self.quantity;
        if matches!(q, Quantity::Tessellate | Quantity::Validate) {
            if self.sweep.is_some() || self.series.is_some() {
                return Err(Error::invalid(format!("{q} takes no sweep")));
            }
            if q == Quantity::Tessellate && self.resolution < tessellation::MIN_RESOLUTION {
                return Err(Error::invalid(format!(
                    "resolution {} below {}",
                    self.resolution,
                    tessellation::MIN_RESOLUTION
                )));
            }
            return Ok(());
        }
        if q == Quantity::HandoffRate && self.engine == Engine::Analytic {
            return Err(Error::invalid("handoff-rate has no analytic engine"));
        }
        if matches!(q, Quantity::Coverage | Quantity::RateCoverage) && self.engine != Engine::Analytic && self.drops < 100 {
            return Err(Error::invalid("coverage needs at least 100 drops"));
        }
        let x = self.x_sweep().expect("sweepable quantity");
        let mut sweeps = vec![&x];
        if let Some(s) = &self.series {
            if s.variable == x.variable {
                return Err(Error::invalid("series and sweep use the same variable"));
            }
            sweeps.push(s);
        }
        for s in &sweeps {
            if !q.accepts(s.variable) {
                return Err(Error::invalid(format!("{} cannot be swept for {q}", s.variable)));
            }
            if s.grid.is_empty() {
                return Err(Error::invalid(format!("{} grid is empty", s.variable)));
            }
            if s.grid.iter().any(|v| !v.is_finite()) || s.grid.windows(2).any(|w| w[1] <= w[0]) {
                return Err(Error::invalid(format!("{} grid must be finite and strictly increasing", s.variable)));
            }
            if s.variable == Variable::Sections && s.grid.iter().any(|v| v.fract() != 0.0 || *v < 1.0) {
                return Err(Error::invalid("sections grid must hold positive integers"));
            }
        }
        for series in self.series_values() {
            for &xv in &x.grid {
                let p = self.point(series, x.variable, xv);
                p.cfg
                    .validate()
                    .into_result()
                    .map_err(|e| Error::invalid(format!("{} = {xv}: {e}", x.variable)))?;
                p.check_query()?;
            }
        }
        Ok(())
    }

    fn series_values(&self) -> Vec<Option<f64>> {
        match &self.series {
            Some(s) => s.grid.iter().map(|&v| Some(v)).collect(),
            None => vec![None],
        }
    }

    fn base_point(&self) -> Point {
        Point {
            cfg: self.config,
            tau_db: self.tau_db,
            gamma: self.gamma,
            r: self.r,
            vt: self.vt,
        }
    }

    fn point(&self, series: Option<f64>, var: Variable, x: f64) -> Point {
        let mut p = self.base_point();
        if let (Some(s), Some(v)) = (&self.series, series) {
            p.set(s.variable, v);
        }
        p.set(var, x);
        p
    }
}

#[derive(Debug, Clone, Copy)]
struct Point {
    cfg: ExperimentConfig,
    tau_db: f64,
    gamma: f64,
    r: f64,
    vt: f64,
}

impl Point {
    fn set(&mut self, v: Variable, x: f64) {
        match v {
            Variable::TauDb => self.tau_db = x,
            Variable::Gamma => self.gamma = x,
            Variable::R => self.r = x,
            Variable::Vt => self.vt = x,
            Variable::Sigma => self.cfg.model.sigma = x,
            Variable::Mu => self.cfg.model.mu = x,
            Variable::Lambda => self.cfg.model.lambda = x,
            Variable::Sections => self.cfg.model.sections = x as usize,
            Variable::Speed => self.cfg.mobility.speed = x,
        }
    }

    fn check_query(&self) -> Result<()> {
        if !self.tau_db.is_finite() {
            return Err(Error::invalid("tau-db must be finite"));
        }
        if !(self.gamma >= 0.0 && self.gamma.is_finite()) {
            return Err(Error::invalid("gamma must be ≥ 0"));
        }
        if !(self.r > 0.0 && self.r.is_finite()) {
            return Err(Error::invalid("r must be > 0"));
        }
        if !(self.vt >= 0.0 && self.vt.is_finite()) {
            return Err(Error::invalid("vt must be ≥ 0"));
        }
        Ok(())
    }

    fn tau(&self) -> f64 {
        db_to_linear(self.tau_db)
    }

    fn rate_tau(&self) -> Result<f64> {
        Ok(RateQuery::new(self.gamma, self.cfg.bandwidth)?.sinr_threshold())
    }
}

/// One evaluated sweep point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CurvePoint {
    pub x: f64,
    /// NaN after a numeric failure.
    pub analytic: Option<f64>,
    /// The analytic value bounds the probability from above.
    pub upper_bound: bool,
    pub mc: Option<Estimate>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Curve {
    pub series: Option<(Variable, f64)>,
    pub variable: Variable,
    pub points: Vec<CurvePoint>,
}

/// Files written and problems met by [`run`].
#[derive(Debug, Clone, Default)]
pub struct RunReport {
    pub files: Vec<PathBuf>,
    pub curves: Vec<Curve>,
    pub checks: Vec<Check>,
    pub numeric_failures: Vec<String>,
    pub invariant_violations: Vec<String>,
}

impl RunReport {
    /// 0 ok, 3 numeric failure, 4 invariant violation.
    pub fn exit_code(&self) -> i32 {
        if !self.invariant_violations.is_empty() {
            4
        } else if !self.numeric_failures.is_empty() {
            3
        } else {
            0
        }
    }
}

/// Process exit status for an error that stopped a run.
pub fn exit_code_for(err: &Error) -> i32 {
    match err {
        Error::Validation(_) | Error::InvalidArgument(_) | Error::Parse(_) | Error::Json(_) => 2,
        Error::Quadrature(_) => 3,
        Error::Io(_) => 1,
    }
}

/// Hex SHA-256 of the canonical JSON form of `config`.
pub fn config_hash(config: &ExperimentConfig) -> Result<String> {
    let digest = Sha256::digest(config.to_json()?.as_bytes());
    Ok(digest.iter().fold(String::with_capacity(64), |mut s, b| {
        let _ = write!(s, "{b:02x}");
        s
    }))
}

/// Writes through a sibling temporary file so readers never see a partial file.
fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Runs `plan`, writing its files under `plan.out_dir`.
pub fn run(plan: &ExperimentPlan) -> Result<RunReport> {
    plan.validate()?;
    fs::create_dir_all(&plan.out_dir)?;
    match plan.workers {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::invalid(e.to_string()))?
            .install(|| run_inner(plan)),
        None => run_inner(plan),
    }
}

fn run_inner(plan: &ExperimentPlan) -> Result<RunReport> {
    match plan.quantity {
        Quantity::Tessellate => run_tessellation(plan),
        Quantity::Validate => run_validation(plan),
        _ => run_sweep(plan),
    }
}

fn run_sweep(plan: &ExperimentPlan) -> Result<RunReport> {
    let x = plan.x_sweep().expect("sweepable quantity");
    let mut report = RunReport::default();
    let curves: Vec<Result<(Curve, Vec<String>)>> = plan
        .series_values()
        .into_par_iter()
        .map(|series| evaluate_curve(plan, &x, series))
        .collect();
    for c in curves {
        let (curve, failures) = c?;
        report.numeric_failures.extend(failures);
        report.invariant_violations.extend(check_curve(plan.quantity, &curve));
        report.curves.push(curve);
    }
    let hash = config_hash(&plan.config)?;
    for curve in &report.curves {
        let name = curve_file_name(plan, curve);
        let path = plan.out_dir.join(name);
        let body = match plan.format {
            Format::Csv => curve_csv(plan, curve, &hash)?,
            Format::Json => serde_json::to_string_pretty(&curve_json(plan, curve, &hash)?)? + "\n",
        };
        write_atomic(&path, body.as_bytes())?;
        report.files.push(path);
    }
    write_summary(plan, &mut report, &hash, Value::Null)?;
    Ok(report)
}

fn curve_file_name(plan: &ExperimentPlan, curve: &Curve) -> String {
    let ext = plan.format.as_str();
    match curve.series {
        Some((v, value)) => format!("{}_{}={}.{ext}", plan.quantity, v, value),
        None => format!("{}.{ext}", plan.quantity),
    }
}

fn evaluate_curve(plan: &ExperimentPlan, x: &Sweep, series: Option<f64>) -> Result<(Curve, Vec<String>)> {
    let points: Vec<Point> = x.grid.iter().map(|&v| plan.point(series, x.variable, v)).collect();
    let mut failures = Vec::new();
    let analytic: Vec<Option<(f64, bool)>> = if plan.engine != Engine::MonteCarlo && plan.quantity != Quantity::HandoffRate {
        let shared = if x.variable.is_query() {
            Some(Analytic::new(points[0].cfg.model, points[0].cfg.antenna)?)
        } else {
            None
        };
        let values: Vec<Result<(f64, bool)>> = points
            .par_iter()
            .map(|p| match &shared {
                Some(an) => analytic_value(plan, an, p),
                None => analytic_value(plan, &Analytic::new(p.cfg.model, p.cfg.antenna)?, p),
            })
            .collect();
        let mut out = Vec::with_capacity(values.len());
        for (v, xv) in values.into_iter().zip(&x.grid) {
            match v {
                Ok(v) => out.push(Some(v)),
                Err(Error::Quadrature(e)) => {
                    failures.push(format!("{} {} = {xv}: {e}", plan.quantity, x.variable));
                    out.push(Some((f64::NAN, false)));
                }
                Err(e) => return Err(e),
            }
        }
        out
    } else {
        vec![None; points.len()]
    };
    let mc: Vec<Option<Estimate>> = if plan.engine != Engine::Analytic {
        mc_values(plan, x.variable, &points)?.into_iter().map(Some).collect()
    } else {
        vec![None; points.len()]
    };
    let points = x
        .grid
        .iter()
        .zip(analytic.into_iter().zip(mc))
        .map(|(&xv, (a, m))| CurvePoint {
            x: xv,
            analytic: a.map(|v| v.0),
            upper_bound: a.is_some_and(|v| v.1),
            mc: m,
        })
        .collect();
    let series = plan.series.as_ref().zip(series).map(|(s, v)| (s.variable, v));
    Ok((
        Curve {
            series,
            variable: x.variable,
            points,
        },
        failures,
    ))
}

fn analytic_value(plan: &ExperimentPlan, an: &Analytic<f64>, p: &Point) -> Result<(f64, bool)> {
    match plan.quantity {
        Quantity::Coverage => {
            let c = an.coverage(p.tau())?;
            Ok((c.value, c.upper_bound))
        }
        Quantity::RateCoverage => {
            let c = an.coverage(p.rate_tau()?)?;
            Ok((c.value, c.upper_bound))
        }
        Quantity::Association => Ok((an.association(p.r)?, false)),
        Quantity::HandoffProb => {
            let q = HandoffQuery::new(p.vt, p.cfg.mobility.handoff_threshold, plan.movement)?;
            Ok((an.handoff_probability(&q)?, false))
        }
        Quantity::HandoffRate | Quantity::Tessellate | Quantity::Validate => unreachable!("no analytic sweep"),
    }
}

fn mc_values(plan: &ExperimentPlan, var: Variable, points: &[Point]) -> Result<Vec<Estimate>> {
    let settings = McSettings::new(plan.drops, plan.seed);
    let p0 = &points[0];
    let (model, antenna, mobility) = (&p0.cfg.model, &p0.cfg.antenna, &p0.cfg.mobility);
    // threshold-like sweeps reuse one set of drops for the whole curve
    if var.is_query() {
        match plan.quantity {
            Quantity::Coverage => {
                let taus: Vec<f64> = points.iter().map(Point::tau).collect();
                return mc_coverage_curve(&taus, model, antenna, settings);
            }
            Quantity::RateCoverage => {
                let taus = points.iter().map(Point::rate_tau).collect::<Result<Vec<_>>>()?;
                return mc_coverage_curve(&taus, model, antenna, settings);
            }
            Quantity::HandoffProb => {
                let vts: Vec<f64> = points.iter().map(|p| p.vt).collect();
                return mc_handoff_probability_curve(&vts, plan.movement, model, antenna, mobility, settings);
            }
            _ => {}
        }
    }
    points
        .iter()
        .map(|p| {
            let (model, antenna, mobility) = (&p.cfg.model, &p.cfg.antenna, &p.cfg.mobility);
            match plan.quantity {
                Quantity::Coverage => Ok(mc_coverage_curve(&[p.tau()], model, antenna, settings)?[0]),
                Quantity::RateCoverage => Ok(mc_coverage_curve(&[p.rate_tau()?], model, antenna, settings)?[0]),
                Quantity::Association => Ok(mc_association(p.r, model, antenna, settings)?.max_sinr),
                Quantity::HandoffProb => {
                    Ok(mc_handoff_probability_curve(&[p.vt], plan.movement, model, antenna, mobility, settings)?[0])
                }
                Quantity::HandoffRate => Ok(mc_handoff_rate(model, antenna, mobility, plan.counting, plan.drops, plan.seed)?.rate),
                Quantity::Tessellate | Quantity::Validate => unreachable!("no sweep"),
            }
        })
        .collect()
}

fn check_curve(q: Quantity, curve: &Curve) -> Vec<String> {
    let mut out = Vec::new();
    for p in &curve.points {
        if let Some(a) = p.analytic {
            let capped = p.upper_bound || a.is_nan();
            if !capped && !(-1e-9..=1.0 + 1e-9).contains(&a) {
                out.push(format!("{q} {} = {}: analytic value {a} outside [0, 1]", curve.variable, p.x));
            }
        }
        if let Some(m) = p.mc {
            let ok = match q {
                Quantity::HandoffRate => m.value >= 0.0,
                _ => (0.0..=1.0).contains(&m.value),
            };
            if !ok {
                out.push(format!("{q} {} = {}: estimate {} out of range", curve.variable, p.x, m.value));
            }
        }
    }
    out
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |v| v.to_string())
}

fn params_json(plan: &ExperimentPlan) -> Result<Value> {
    let mut v = json!({
        "config": serde_json::from_str::<Value>(&plan.config.to_json()?)?,
        "engine": plan.engine.as_str(),
        "drops": plan.drops,
    });
    let extra = match plan.quantity {
        Quantity::Coverage => json!({ "tau_db": plan.tau_db }),
        Quantity::RateCoverage => json!({ "gamma": plan.gamma }),
        Quantity::Association => json!({ "r": plan.r }),
        Quantity::HandoffProb => json!({ "vt": plan.vt, "movement": movement_str(plan.movement) }),
        Quantity::HandoffRate => json!({ "counting": counting_str(plan.counting) }),
        Quantity::Tessellate => json!({ "resolution": plan.resolution }),
        Quantity::Validate => json!({}),
    };
    if let (Value::Object(a), Value::Object(b)) = (&mut v, extra) {
        a.extend(b);
    }
    Ok(v)
}

fn curve_csv(plan: &ExperimentPlan, curve: &Curve, hash: &str) -> Result<String> {
    let mut s = String::new();
    writeln!(s, "# quantity={}", plan.quantity).ok();
    writeln!(s, "# seed={}", plan.seed).ok();
    writeln!(s, "# config_sha256={hash}").ok();
    if let Some((v, value)) = curve.series {
        writeln!(s, "# series={v}={value}").ok();
    }
    writeln!(s, "# params={}", serde_json::to_string(&params_json(plan)?)?).ok();
    writeln!(s, "{},analytic,upper_bound,mc,mc_lower,mc_upper,mc_std_error,mc_samples", curve.variable).ok();
    for p in &curve.points {
        let m = p.mc;
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            p.x,
            fmt_opt(p.analytic),
            if p.analytic.is_some() { p.upper_bound.to_string() } else { String::new() },
            fmt_opt(m.map(|m| m.value)),
            fmt_opt(m.map(|m| m.lower)),
            fmt_opt(m.map(|m| m.upper)),
            fmt_opt(m.map(|m| m.std_error)),
            m.map_or_else(String::new, |m| m.samples.to_string()),
        )
        .ok();
    }
    Ok(s)
}

fn number(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

fn estimate_json(e: &Estimate) -> Value {
    json!({
        "value": number(e.value),
        "ci": [number(e.lower), number(e.upper)],
        "std_error": number(e.std_error),
        "samples": e.samples,
        "seed": e.seed,
    })
}

fn curve_json(plan: &ExperimentPlan, curve: &Curve, hash: &str) -> Result<Value> {
    let records: Vec<Value> = curve
        .points
        .iter()
        .map(|p| {
            json!({
                curve.variable.as_str(): number(p.x),
                "analytic": p.analytic.map(number),
                "upper_bound": p.analytic.map(|_| p.upper_bound),
                "mc": p.mc.as_ref().map(estimate_json),
            })
        })
        .collect();
    Ok(json!({
        "quantity": plan.quantity.as_str(),
        "series": curve.series.map(|(v, x)| json!({ "variable": v.as_str(), "value": number(x) })),
        "params": params_json(plan)?,
        "seed": plan.seed,
        "config_sha256": hash,
        "records": records,
    }))
}

fn write_summary(plan: &ExperimentPlan, report: &mut RunReport, hash: &str, extra: Value) -> Result<()> {
    let path = plan.out_dir.join("summary.json");
    let files: Vec<String> = report
        .files
        .iter()
        .filter_map(|p| p.file_name().map(|n| n.to_string_lossy().into_owned()))
        .collect();
    let summary = json!({
        "quantity": plan.quantity.as_str(),
        "params": params_json(plan)?,
        "seed": plan.seed,
        "config_sha256": hash,
        "files": files,
        "numeric_failures": report.numeric_failures,
        "invariant_violations": report.invariant_violations,
        "result": extra,
    });
    write_atomic(&path, (serde_json::to_string_pretty(&summary)? + "\n").as_bytes())?;
    report.files.push(path);
    Ok(())
}

fn run_tessellation(plan: &ExperimentPlan) -> Result<RunReport> {
    let model = &plan.config.model;
    let extent = tessellation::default_extent(model);
    let dep = sample_deployment(model, extent, plan.seed)?;
    let fractal = tessellation::fractal_cells(&dep, model, extent, plan.resolution)?;
    let voronoi = tessellation::voronoi_reference(&dep, extent, plan.resolution)?;
    let mut report = RunReport::default();
    let mut put = |name: &str, bytes: Vec<u8>| -> Result<()> {
        let path = plan.out_dir.join(name);
        write_atomic(&path, &bytes)?;
        report.files.push(path);
        Ok(())
    };
    let mut buf = Vec::new();
    fractal.write_pgm(&mut buf)?;
    put("cells.pgm", buf)?;
    let mut buf = Vec::new();
    voronoi.write_pgm(&mut buf)?;
    put("voronoi.pgm", buf)?;
    let mut buf = Vec::new();
    fractal.write_boundary_csv(&mut buf)?;
    put("boundary.csv", buf)?;
    let mut buf = Vec::new();
    tessellation::write_legend_csv(&dep, &mut buf)?;
    put("stations.csv", buf)?;
    let mut buf = Vec::new();
    dep.write_csv(&mut buf)?;
    put("deployment.csv", buf)?;
    let agreement = fractal.agreement(&voronoi)?;
    let hash = config_hash(&plan.config)?;
    let extra = json!({
        "extent": number(extent),
        "stations": dep.len(),
        "voronoi_agreement": number(agreement),
    });
    write_summary(plan, &mut report, &hash, extra)?;
    Ok(report)
}

fn run_validation(plan: &ExperimentPlan) -> Result<RunReport> {
    let checks = run_suite(&plan.config, plan.seed, plan.drops)?;
    let mut report = RunReport::default();
    for c in checks.iter().filter(|c| !c.pass) {
        report.invariant_violations.push(format!("{}: {}", c.name, c.detail));
    }
    let hash = config_hash(&plan.config)?;
    let extra = Value::Array(
        checks
            .iter()
            .map(|c| json!({ "name": c.name, "pass": c.pass, "detail": c.detail }))
            .collect(),
    );
    report.checks = checks;
    write_summary(plan, &mut report, &hash, extra)?;
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(q: Quantity, dir: &Path) -> ExperimentPlan {
        ExperimentPlan::new(q, dir)
    }

    #[test]
    fn names_round_trip() {
        for q in Quantity::ALL {
            assert_eq!(q.as_str().parse::<Quantity>().unwrap(), *q);
        }
        for v in Variable::ALL {
            assert_eq!(v.as_str().parse::<Variable>().unwrap(), *v);
        }
        assert!("monte-carlo".parse::<Engine>().is_err());
        assert_eq!("mc".parse::<Engine>().unwrap(), Engine::MonteCarlo);
    }

    #[test]
    fn rejects_illegal_sweeps() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = plan(Quantity::Coverage, dir.path());
        p.sweep = Some(Sweep::new(Variable::R, vec![10.0]));
        assert!(p.validate().is_err());
        p.sweep = Some(Sweep::new(Variable::TauDb, vec![10.0, 10.0]));
        assert!(p.validate().is_err());
        p.sweep = Some(Sweep::new(Variable::TauDb, vec![]));
        assert!(p.validate().is_err());
        p.sweep = Some(Sweep::new(Variable::Sigma, vec![0.0, 1.2]));
        assert!(matches!(p.validate(), Err(Error::InvalidArgument(_))));
        let mut p = plan(Quantity::HandoffRate, dir.path());
        p.engine = Engine::Analytic;
        assert!(p.validate().is_err());
        let mut p = plan(Quantity::Tessellate, dir.path());
        p.sweep = Some(Sweep::new(Variable::Sigma, vec![0.0]));
        assert!(p.validate().is_err());
    }

    #[test]
    fn coverage_sweep_writes_one_file_per_curve() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = plan(Quantity::Coverage, dir.path());
        p.sweep = Some(Sweep::new(Variable::TauDb, vec![20.0, 30.0]));
        p.series = Some(Sweep::new(Variable::Sigma, vec![0.0, 0.5]));
        p.drops = 400;
        let r = run(&p).unwrap();
        assert_eq!(r.exit_code(), 0);
        assert_eq!(r.files.len(), 3);
        let text = fs::read_to_string(dir.path().join("coverage_sigma=0.5.csv")).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert!(lines[0..5].iter().all(|l| l.starts_with('#')));
        assert_eq!(lines[5], "tau-db,analytic,upper_bound,mc,mc_lower,mc_upper,mc_std_error,mc_samples");
        assert_eq!(lines.len(), 8);
        let row: Vec<&str> = lines[6].split(',').collect();
        assert_eq!(row[0], "20");
        assert!((row[1].parse::<f64>().unwrap() - 0.3515).abs() < 1e-4, "{}", lines[6]);
        assert_eq!(row[2], "true");
        assert_eq!(row[7], "400");
        let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert_eq!(summary["files"].as_array().unwrap().len(), 2);
        assert_eq!(summary["config_sha256"].as_str().unwrap().len(), 64);
    }

    #[test]
    fn json_curves_carry_records() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = plan(Quantity::Association, dir.path());
        p.sweep = Some(Sweep::new(Variable::R, vec![50.0]));
        p.engine = Engine::Analytic;
        p.format = Format::Json;
        run(&p).unwrap();
        let v: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("association.json")).unwrap()).unwrap();
        let rec = &v["records"][0];
        assert_eq!(rec["r"], 50.0);
        assert!((rec["analytic"].as_f64().unwrap() - 0.36013).abs() < 1e-4);
        assert!(rec["mc"].is_null());
    }

    #[test]
    fn runs_are_byte_identical() {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        for dir in [a.path(), b.path()] {
            let mut p = plan(Quantity::HandoffRate, dir);
            p.sweep = Some(Sweep::new(Variable::Sigma, vec![0.5]));
            p.config.mobility.sim_duration = 50.0;
            p.drops = 3;
            run(&p).unwrap();
        }
        for name in ["handoff-rate.csv", "summary.json"] {
            assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap());
        }
    }

    #[test]
    fn tessellation_files() {
        let dir = tempfile::tempdir().unwrap();
        let mut p = plan(Quantity::Tessellate, dir.path());
        p.resolution = 64;
        let r = run(&p).unwrap();
        assert_eq!(r.files.len(), 6);
        let pgm = fs::read(dir.path().join("cells.pgm")).unwrap();
        assert!(pgm.starts_with(b"P5\n64 64\n"));
        let summary: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("summary.json")).unwrap()).unwrap();
        assert!(summary["result"]["voronoi_agreement"].as_f64().unwrap() >= 0.99);
    }

    #[test]
    fn hash_tracks_config() {
        let c = ExperimentConfig::standard();
        let mut d = c;
        d.model.sigma = 0.5;
        assert_eq!(config_hash(&c).unwrap(), config_hash(&c).unwrap());
        assert_ne!(config_hash(&c).unwrap(), config_hash(&d).unwrap());
    }
}
