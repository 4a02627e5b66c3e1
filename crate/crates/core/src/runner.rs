//! Config-driven experiment runs. A run reads one JSON document naming the
//! experiment kind and its parameters, checks every parameter, dispatches to
//! the library, writes CSV/JSON results and SVG plots into `output_dir`, and
//! finishes with `manifest.json` listing each output with its SHA-256 digest.
//!
//! Outputs depend only on the config and the crate version. The wall time is
//! recorded in the manifest alone.

use std::f64::consts::PI;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::boundary_stats::{
    boundary_line_dimension_with, default_threads, frostman_default_options, frostman_second_moment_with, max_delta,
    ratio_exponent, trace_boundary_dimension_with, BoundaryOptions, DimensionEstimate, FrostmanExperiment,
    HittingExperiment, LineOptions, Pooling, RatioExponent, TraceOptions,
};
use crate::conformal::{build_boundary_map, koch_snowflake, ConformalMap, CLASSICAL_FLATNESS};
use crate::error::{Error, Result};
use crate::io::{self, LogLogPlot};
use crate::sieve::{classify_squares, refined_holder_exponent, verify_holder, SieveMode, SieveOptions};
use crate::spectrum::{check_universal_bound, dkappa_bounds, estimate_beta, solve_john_dimension, DEFAULT_ALPHA, DEFAULT_C};
use crate::stats::fit_line;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExperimentKind {
    Sieve,
    Holder,
    Spectrum,
    JohnDimension,
    Hitting,
    LineDimension,
    Frostman,
    TraceBoundary,
    Dkappa,
}

impl ExperimentKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Sieve => "sieve",
            Self::Holder => "holder",
            Self::Spectrum => "spectrum",
            Self::JohnDimension => "john-dimension",
            Self::Hitting => "hitting",
            Self::LineDimension => "line-dimension",
            Self::Frostman => "frostman",
            Self::TraceBoundary => "trace-boundary",
            Self::Dkappa => "dkappa",
        }
    }
}

/// Resource limits. Trace experiments stop at `max_traces` traces or after
/// `max_seconds`, sieves scan at most `max_squares` squares; hitting a limit
/// yields partial results and a truncation note in the manifest.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Budget {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_traces: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_squares: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_seconds: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub kind: ExperimentKind,
    #[serde(default)]
    pub params: Map<String, Value>,
    pub seed: u64,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub budget: Budget,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| config_error("", &e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config { key: path.display().to_string(), reason: e.to_string() })?;
        Self::from_json(&text)
    }
}

/// Names the offending key of a serde error when it mentions one.
fn config_error(prefix: &str, e: &serde_json::Error) -> Error {
    let msg = e.to_string();
    let key = ["unknown field `", "missing field `", "unknown variant `"]
        .iter()
        .find_map(|pat| {
            let rest = &msg[msg.find(pat)? + pat.len()..];
            Some(rest[..rest.find('`')?].to_string())
        })
        .filter(|k| !pat_is_variant(&msg, k));
    let key = match key {
        Some(k) => format!("{prefix}{k}"),
        None if prefix.is_empty() => "config".into(),
        None => prefix.trim_end_matches('.').into(),
    };
    Error::Config { key, reason: msg }
}

// an unknown variant names a value, not a key
fn pat_is_variant(msg: &str, k: &str) -> bool {
    msg.contains(&format!("unknown variant `{k}`"))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub key: String,
    pub message: String,
}

#[derive(Default)]
struct Checks(Vec<Diagnostic>);

impl Checks {
    fn error(&mut self, key: &str, message: impl Into<String>) {
        self.0.push(Diagnostic { severity: Severity::Error, key: format!("params.{key}"), message: message.into() });
    }

    fn warn(&mut self, key: &str, message: impl Into<String>) {
        self.0.push(Diagnostic { severity: Severity::Warning, key: format!("params.{key}"), message: message.into() });
    }

    fn require(&mut self, ok: bool, key: &str, message: impl Into<String>) {
        if !ok {
            self.error(key, message);
        }
    }

    fn finite(&mut self, key: &str, v: f64) -> bool {
        self.require(v.is_finite(), key, format!("must be finite, got {v}"));
        v.is_finite()
    }

    fn positive_count(&mut self, key: &str, v: usize) {
        self.require(v >= 1, key, "must be >= 1");
    }

    fn probability_exponent(&mut self, p: f64) {
        if self.finite("p", p) {
            self.require(p > 0.0 && p < 1.0, "p", format!("p must lie in (0, 1), got {p}"));
        }
    }

    fn scales(&mut self, key: &str, s: &[f64]) {
        if s.is_empty() {
            self.error(key, "must not be empty");
        } else if s.iter().any(|x| !(x.is_finite() && *x > 0.0)) {
            self.error(key, "entries must be finite and > 0");
        } else if s.windows(2).any(|w| w[1] >= w[0]) {
            self.error(key, "must be strictly decreasing");
        }
    }

    /// `kappa` in `(4, hi)` (or `(4, 8]` when `closed`), any `kappa >= 0`
    /// for a control run.
    fn kappa(&mut self, kappa: f64, closed: bool, control: bool, what: &str) {
        if !self.finite("kappa", kappa) {
            return;
        }
        let inside = kappa > 4.0 && (kappa < 8.0 || (closed && kappa == 8.0));
        if inside {
            return;
        }
        let range = if closed { "(4, 8]" } else { "(4, 8)" };
        if control && kappa >= 0.0 {
            self.warn("kappa", format!("kappa = {kappa} lies outside {range}; running as a control"));
        } else {
            self.error("kappa", format!("kappa must lie in {range} for {what}, got {kappa} (set \"control\": true for a control run)"));
        }
    }

    fn trace(&mut self, t: &TraceParams) {
        for (key, v) in [("horizon", t.horizon), ("tail_horizon", t.tail_horizon)] {
            if let Some(v) = v {
                if self.finite(key, v) {
                    self.require(v > 0.0, key, "must be > 0");
                }
            }
        }
        if let Some(n) = t.n_steps {
            self.positive_count("n_steps", n);
        }
        if let (Some(h), Some(tail)) = (t.horizon, t.tail_horizon) {
            self.require(tail >= h, "tail_horizon", "must be >= horizon");
        }
    }
}

/// A map descriptor, or a snowflake to be boundary-fitted.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MapSpec {
    Snowflake(SnowflakeSpec),
    Map(ConformalMap),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SnowflakeSpec {
    pub kind: SnowflakeTag,
    pub depth: u32,
    #[serde(default = "classical")]
    pub flatness: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SnowflakeTag {
    #[serde(rename = "snowflake")]
    Snowflake,
}

fn classical() -> f64 {
    CLASSICAL_FLATNESS
}

impl Default for MapSpec {
    fn default() -> Self {
        MapSpec::Map(ConformalMap::identity())
    }
}

impl MapSpec {
    pub fn build(&self) -> Result<ConformalMap> {
        match self {
            MapSpec::Map(m) => Ok(m.clone()),
            MapSpec::Snowflake(s) => build_boundary_map(&koch_snowflake(s.depth, s.flatness)?),
        }
    }

    fn check(&self, c: &mut Checks) {
        if let MapSpec::Snowflake(s) = self {
            if c.finite("map.flatness", s.flatness) {
                c.require(s.flatness > 0.0 && s.flatness < 1.0, "map.flatness", "must lie in (0, 1)");
            }
        }
    }
}

/// Discretization overrides shared by the trace experiments.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TraceParams {
    pub horizon: Option<f64>,
    pub n_steps: Option<usize>,
    pub tail_horizon: Option<f64>,
}

impl TraceParams {
    fn apply(&self, mut base: TraceOptions, ctx: &Ctx) -> TraceOptions {
        if let Some(h) = self.horizon {
            base.horizon = h;
            // radial defaults stop at the horizon
            if self.tail_horizon.is_none() && base.tail_horizon < h {
                base.tail_horizon = h;
            }
        }
        base.n_steps = self.n_steps.unwrap_or(base.n_steps);
        base.tail_horizon = self.tail_horizon.unwrap_or(base.tail_horizon);
        base.threads = ctx.threads;
        base.deadline = ctx.deadline;
        base
    }
}

struct Ctx {
    seed: u64,
    budget: Budget,
    threads: usize,
    deadline: Option<Instant>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

struct Outputs<'a> {
    dir: &'a Path,
    stem: &'static str,
    files: Vec<OutputFile>,
    truncated: Vec<String>,
}

impl Outputs<'_> {
    fn write(&mut self, name: String, contents: &str) -> Result<()> {
        let sha256 = io::write_digested(self.dir, &name, contents)?;
        self.files.push(OutputFile { file: name, sha256 });
        Ok(())
    }

    fn json<T: Serialize + ?Sized>(&mut self, value: &T) -> Result<()> {
        self.write(format!("{}.json", self.stem), &io::to_json(value)?)
    }

    fn csv(&mut self, contents: &str) -> Result<()> {
        self.write(format!("{}.csv", self.stem), contents)
    }

    /// Log-log plot of `ys` against `xs` with the least squares line; the
    /// file name carries `exponent`.
    fn plot(&mut self, xs: &[f64], ys: &[f64], x_label: &str, y_label: &str, exponent_name: &str, exponent: f64) -> Result<()> {
        let keep: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(&x, &y)| x > 0.0 && y > 0.0).map(|(&x, &y)| (x, y)).collect();
        if keep.len() < 2 || !exponent.is_finite() {
            return Ok(());
        }
        let lx: Vec<f64> = keep.iter().map(|p| p.0.ln()).collect();
        let ly: Vec<f64> = keep.iter().map(|p| p.1.ln()).collect();
        let fit = fit_line(&lx, &ly);
        let annotation = format!("{exponent_name} = {exponent:.4}");
        let plot = LogLogPlot {
            title: self.stem,
            x_label,
            y_label,
            xs,
            ys,
            slope: fit.slope,
            intercept: fit.intercept,
            annotation: &annotation,
        };
        self.write(io::plot_file_name(self.stem, exponent), &plot.svg())
    }

    /// Caps a requested trace count by the budget.
    fn traces(&mut self, requested: usize, ctx: &Ctx) -> usize {
        match ctx.budget.max_traces {
            Some(m) if m < requested => {
                self.truncated.push(format!("max_traces: ran {m} of {requested} traces"));
                m
            }
            _ => requested,
        }
    }

    fn note_deadline(&mut self, planned: usize, ran: usize) {
        if ran < planned {
            self.truncated.push(format!("max_seconds: completed {ran} of {planned} traces"));
        }
    }
}

trait Experiment: DeserializeOwned {
    fn check(&self, c: &mut Checks);
    fn run(&self, ctx: &Ctx, out: &mut Outputs) -> Result<()>;
}

fn default_n_max() -> u32 {
    SieveOptions::default().n_max
}

fn default_order() -> usize {
    SieveOptions::default().quadrature_order
}

fn bounded() -> SieveMode {
    SieveMode::Bounded
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SieveParams {
    #[serde(default)]
    map: MapSpec,
    p: f64,
    #[serde(rename = "N")]
    n: u32,
    #[serde(default = "bounded")]
    mode: SieveMode,
    #[serde(default = "default_n_max")]
    n_max: u32,
    #[serde(default = "default_order")]
    quadrature_order: usize,
}

impl SieveParams {
    fn check_sieve(&self, c: &mut Checks) {
        self.map.check(c);
        c.probability_exponent(self.p);
        c.require(self.n >= 1 && self.n <= self.n_max, "N", format!("need 1 <= N <= n_max = {}", self.n_max));
        c.require(self.n_max <= 40, "n_max", "must be <= 40");
        c.require(self.quadrature_order >= 4, "quadrature_order", "must be >= 4");
    }

    fn sieve(&self, map: &ConformalMap, ctx: &Ctx, out: &mut Outputs) -> Result<crate::sieve::SieveResult> {
        let max_squares = ctx.budget.max_squares.unwrap_or(SieveOptions::default().max_squares);
        let squares = |n_max: u32| -> u64 { (self.n..=n_max).map(|n| 1u64 << n).sum() };
        let mut n_max = self.n_max;
        while n_max > self.n && squares(n_max) > max_squares as u64 {
            n_max -= 1;
        }
        if squares(n_max) > max_squares as u64 {
            return Err(Error::Resource(format!("generation N = {} alone exceeds max_squares = {max_squares}", self.n)));
        }
        if n_max < self.n_max {
            out.truncated.push(format!("max_squares: scanned generations {}..={n_max} instead of ..={}", self.n, self.n_max));
        }
        let opts = SieveOptions { n_max, quadrature_order: self.quadrature_order, max_squares };
        classify_squares(map, self.p, self.n, self.mode, &opts)
    }
}

impl Experiment for SieveParams {
    fn check(&self, c: &mut Checks) {
        self.check_sieve(c);
        if self.mode == SieveMode::Refined && self.p.is_finite() {
            let e = refined_holder_exponent(self.p);
            if e <= 0.0 {
                c.warn("p", format!("exponent 1 - 6 sqrt(1 - p) = {e:.4} <= 0; the refined Hölder estimate is inapplicable"));
            }
        }
    }

    fn run(&self, ctx: &Ctx, out: &mut Outputs) -> Result<()> {
        let map = self.map.build()?;
        let sieve = self.sieve(&map, ctx, out)?;
        out.json(&sieve)
    }
}

fn default_pairs() -> usize {
    1000
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HolderParams {
    #[serde(default)]
    map: MapSpec,
    p: f64,
    #[serde(rename = "N")]
    n: u32,
    #[serde(default = "bounded")]
    mode: SieveMode,
    #[serde(default = "default_n_max")]
    n_max: u32,
    #[serde(default = "default_order")]
    quadrature_order: usize,
    /// Defaults to `p / 2`, or `1 - 6 sqrt(1 - p)` for the refined sieve.
    exponent: Option<f64>,
    #[serde(default = "default_pairs")]
    pairs: usize,
}

impl HolderParams {
    fn sieve_params(&self) -> SieveParams {
        SieveParams {
            map: self.map.clone(),
            p: self.p,
            n: self.n,
            mode: self.mode,
            n_max: self.n_max,
            quadrature_order: self.quadrature_order,
        }
    }

    fn exponent(&self) -> f64 {
        self.exponent.unwrap_or(match self.mode {
            SieveMode::Refined => refined_holder_exponent(self.p),
            _ => 0.5 * self.p,
        })
    }
}

impl Experiment for HolderParams {
    fn check(&self, c: &mut Checks) {
        self.sieve_params().check_sieve(c);
        c.positive_count("pairs", self.pairs);
        if self.p.is_finite() {
            let e = self.exponent();
            c.require(e > 0.0 && e <= 1.0, "exponent", format!("Hölder exponent must lie in (0, 1], got {e:.4}"));
        }
    }

    fn run(&self, ctx: &Ctx, out: &mut Outputs) -> Result<()> {
        let map = self.map.build()?;
        let sieve = self.sieve_params().sieve(&map, ctx, out)?;
        let report = verify_holder(&map, &sieve, self.exponent(), self.pairs, ctx.seed)?;
        out.json(&json!({
            "mode": sieve.mode,
            "p": sieve.p,
            "N": sieve.n_min,
            "n_max": sieve.n_max,
            "bad_squares": sieve.bad.len(),
            "content_bound": sieve.content_bound,
            "seed": ctx.seed,
            "report": report,
        }))
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectrumParams {
    #[serde(default)]
    map: MapSpec,
    t: f64,
}

impl Experiment for SpectrumParams {
    fn check(&self, c: &mut Checks) {
        self.map.check(c);
        c.finite("t", self.t);
    }

    fn run(&self, _: &Ctx, out: &mut Outputs) -> Result<()> {
        let est = estimate_beta(&self.map.build()?, self.t)?;
        let bound = check_universal_bound(&est);
        out.write(format!("{}.csv", out.stem), &io::spectrum_csv(&est))?;
        out.json(&json!({ "estimate": est, "universal_bound": bound }))?;
        let xs: Vec<f64> = est.radii.iter().map(|r| 1.0 / (1.0 - r)).collect();
        out.plot(&xs, &est.means, "1 / (1 - r)", "integral mean", "beta", est.beta_hat)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct JohnParams {
    #[serde(default)]
    map: MapSpec,
    kappa: f64,
}

impl Experiment for JohnParams {
    fn check(&self, c: &mut Checks) {
        self.map.check(c);
        c.kappa(self.kappa, true, false, "the dimension equation");
    }

    fn run(&self, _: &Ctx, out: &mut Outputs) -> Result<()> {
        out.json(&solve_john_dimension(&self.map.build()?, self.kappa)?)
    }
}

fn default_c() -> f64 {
    DEFAULT_C
}

fn default_alpha() -> f64 {
    DEFAULT_ALPHA
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct DkappaParams {
    kappa: f64,
    #[serde(default = "default_c")]
    c: f64,
    #[serde(default = "default_alpha")]
    alpha: f64,
    branch_john: Option<f64>,
}

impl Experiment for DkappaParams {
    fn check(&self, c: &mut Checks) {
        c.kappa(self.kappa, false, false, "the dimension bounds");
        for (key, v) in [("c", self.c), ("alpha", self.alpha)] {
            if c.finite(key, v) {
                c.require(v > 0.0, key, "must be > 0");
            }
        }
        if let Some(j) = self.branch_john {
            c.finite("branch_john", j);
        }
    }

    fn run(&self, _: &Ctx, out: &mut Outputs) -> Result<()> {
        let b = dkappa_bounds(self.kappa, self.c, self.alpha, self.branch_john)?;
        out.json(&json!({ "bound": b, "best": b.best() }))
    }
}

fn half_pi() -> f64 {
    0.5 * PI
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct HittingParams {
    kappa: f64,
    #[serde(default = "half_pi")]
    center_angle: f64,
    /// Defaults to just below the largest admissible offset.
    delta: Option<f64>,
    radii: Vec<f64>,
    n_traces: usize,
    #[serde(default)]
    control: bool,
    #[serde(default)]
    trace: TraceParams,
}

impl HittingParams {
    fn delta(&self) -> f64 {
        self.delta.unwrap_or(max_delta(self.center_angle) * (1.0 - 1e-9))
    }
}

impl Experiment for HittingParams {
    fn check(&self, c: &mut Checks) {
        c.kappa(self.kappa, false, self.control, "the hitting estimate");
        c.positive_count("n_traces", self.n_traces);
        c.scales("radii", &self.radii);
        c.trace(&self.trace);
        if c.finite("center_angle", self.center_angle) && c.finite("delta", self.delta()) {
            let (t, d) = (self.center_angle.abs(), self.delta());
            c.require(d > 0.0 && d < t && t < PI - d, "center_angle", format!("need delta < |t| < pi - delta, got t = {t}, delta = {d}"));
            if let Some(&r) = self.radii.first() {
                c.require(r < 0.5 * d, "radii", format!("radii must be < delta / 2 = {}", 0.5 * d));
            }
        }
    }

    fn run(&self, ctx: &Ctx, out: &mut Outputs) -> Result<()> {
        let n = out.traces(self.n_traces, ctx);
        let mut exp = HittingExperiment::new(self.kappa, self.center_angle, self.delta(), self.radii.clone(), n, ctx.seed)?;
        let opts = self.trace.apply(HittingExperiment::default_options(), ctx);
        exp.run(&opts)?;
        out.note_deadline(n, exp.n_traces);
        let rows = exp.estimates();
        let ratios: Vec<Option<RatioExponent>> = rows.windows(2).map(|w| ratio_exponent(&w[0], &w[1]).ok()).collect();
        let xs: Vec<f64> = rows.iter().map(|r| r.scale).collect();
        let ys: Vec<f64> = rows.iter().map(|r| r.estimate).collect();
        let nonzero: Vec<usize> = (0..rows.len()).filter(|&i| ys[i] > 0.0).collect();
        let slope = if nonzero.len() >= 2 {
            let lx: Vec<f64> = nonzero.iter().map(|&i| xs[i].ln()).collect();
            let ly: Vec<f64> = nonzero.iter().map(|&i| ys[i].ln()).collect();
            Some(fit_line(&lx, &ly).slope)
        } else {
            None
        };
        out.csv(&io::scale_table_csv(&rows))?;
        out.json(&json!({
            "kappa": exp.kappa,
            "center_angle": exp.center_angle,
            "delta": exp.delta,
            "n_traces": exp.n_traces,
            "seed": exp.seed,
            "hits_per_radius": exp.hits_per_radius,
            "estimates": rows,
            "ratio_exponents": ratios,
            "fitted_exponent": slope,
            "options": opts,
        }))?;
        match slope {
            Some(s) => out.plot(&xs, &ys, "radius", "hit fraction", "exponent", s),
            None => Ok(()),
        }
    }
}

fn write_dimension(est: &DimensionEstimate, out: &mut Outputs, extra: Value) -> Result<()> {
    out.csv(&io::scale_table_csv(&est.rows()))?;
    let mut v = serde_json::to_value(est)?;
    if let (Value::Object(m), Value::Object(e)) = (&mut v, extra) {
        m.extend(e);
    }
    out.json(&v)?;
    out.plot(&est.scales, &est.counts, "box size", "boxes", "dimension", est.slope)
}

fn mean_pooling() -> Pooling {
    Pooling::Mean
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct LineParams {
    kappa: f64,
    n_traces: usize,
    scales: Vec<f64>,
    #[serde(default = "mean_pooling")]
    pooling: Pooling,
    half_width: Option<f64>,
    spacing: Option<f64>,
    chunk: Option<usize>,
    #[serde(default)]
    control: bool,
    #[serde(default)]
    trace: TraceParams,
}

impl LineParams {
    fn options(&self, ctx: &Ctx) -> LineOptions {
        let d = LineOptions::default();
        LineOptions {
            half_width: self.half_width.unwrap_or(d.half_width),
            spacing: self.spacing.unwrap_or(d.spacing),
            chunk: self.chunk.unwrap_or(d.chunk),
            pooling: self.pooling,
            trace: self.trace.apply(d.trace, ctx),
        }
    }
}

impl Experiment for LineParams {
    fn check(&self, c: &mut Checks) {
        c.kappa(self.kappa, true, self.control, "the boundary dimension");
        c.positive_count("n_traces", self.n_traces);
        c.scales("scales", &self.scales);
        c.trace(&self.trace);
        if let Some(w) = self.half_width {
            c.require(w.is_finite() && w > 0.0, "half_width", "must be finite and > 0");
        }
        if let Some(ch) = self.chunk {
            c.positive_count("chunk", ch);
        }
        let spacing = self.spacing.unwrap_or(LineOptions::default().spacing);
        if let Some(&finest) = self.scales.last() {
            c.require(spacing > 0.0 && spacing < finest, "spacing", "must be positive and below the finest scale");
        }
    }

    fn run(&self, ctx: &Ctx, out: &mut Outputs) -> Result<()> {
        let n = out.traces(self.n_traces, ctx);
        let opts = self.options(ctx);
        let est = boundary_line_dimension_with(self.kappa, n, &self.scales, ctx.seed, &opts)?;
        out.note_deadline(n, est.n_traces);
        write_dimension(&est, out, json!({ "half_width": opts.half_width, "spacing": opts.spacing, "chunk": opts.chunk }))
    }
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
enum MeasureSpec {
    Cantor {
        #[serde(default = "default_stage")]
        stage: u32,
    },
    Lebesgue {
        #[serde(default = "default_atoms")]
        atoms: usize,
    },
    PointMass {
        x: f64,
    },
}

fn default_stage() -> u32 {
    8
}

fn default_atoms() -> usize {
    256
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct FrostmanParams {
    kappa: f64,
    measure: MeasureSpec,
    /// Defaults to the hitting exponent `8/kappa - 1`.
    a: Option<f64>,
    eps_list: Vec<f64>,
    n_traces: usize,
    #[serde(default)]
    trace: TraceParams,
}

impl FrostmanParams {
    fn a(&self) -> f64 {
        self.a.unwrap_or(8.0 / self.kappa - 1.0)
    }

    fn experiment(&self) -> Result<FrostmanExperiment> {
        let (a, eps) = (self.a(), self.eps_list.clone());
        match self.measure {
            MeasureSpec::Cantor { stage } => FrostmanExperiment::cantor(a, stage, eps),
            MeasureSpec::Lebesgue { atoms } => FrostmanExperiment::lebesgue(a, atoms, eps),
            MeasureSpec::PointMass { x } => FrostmanExperiment::point_mass(a, x, eps),
        }
    }
}

impl Experiment for FrostmanParams {
    fn check(&self, c: &mut Checks) {
        c.kappa(self.kappa, false, false, "the second moment argument");
        c.positive_count("n_traces", self.n_traces);
        c.scales("eps_list", &self.eps_list);
        c.trace(&self.trace);
        match self.measure {
            MeasureSpec::Cantor { stage } => c.require(stage <= 20, "measure.stage", "must be <= 20"),
            MeasureSpec::Lebesgue { atoms } => c.positive_count("measure.atoms", atoms),
            MeasureSpec::PointMass { x } => c.require((1.0..=2.0).contains(&x), "measure.x", "must lie in [1, 2]"),
        }
        if c.finite("a", self.a()) {
            c.require(self.a() > 0.0, "a", "must be > 0");
        }
        if let Ok(e) = self.experiment() {
            let hit = 8.0 / self.kappa - 1.0;
            if e.measure_dimension <= hit {
                c.warn("measure", format!("measure dimension {:.4} <= 8/kappa - 1 = {hit:.4}: infeasible", e.measure_dimension));
            }
        }
    }

    fn run(&self, ctx: &Ctx, out: &mut Outputs) -> Result<()> {
        let n = out.traces(self.n_traces, ctx);
        let mut exp = self.experiment()?;
        let opts = self.trace.apply(frostman_default_options(), ctx);
        let report = frostman_second_moment_with(&mut exp, self.kappa, n, ctx.seed, &opts)?;
        out.note_deadline(n, report.n_traces);
        out.csv(&io::scale_table_csv(&report.first_moment_rows()))?;
        out.json(&report)?;
        let xs: Vec<f64> = report.rows.iter().map(|r| r.eps).collect();
        let ys: Vec<f64> = report.rows.iter().map(|r| r.first).collect();
        out.plot(&xs, &ys, "eps", "first moment", "exponent", report.first_moment_exponent)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct BoundaryParams {
    #[serde(default)]
    map: MapSpec,
    kappa: f64,
    n_traces: usize,
    scales: Vec<f64>,
    #[serde(default = "mean_pooling")]
    pooling: Pooling,
    spacing_ratio: Option<f64>,
    radial_levels: Option<u32>,
    chunk: Option<usize>,
    #[serde(default)]
    control: bool,
    #[serde(default)]
    trace: TraceParams,
}

impl Experiment for BoundaryParams {
    fn check(&self, c: &mut Checks) {
        self.map.check(c);
        c.kappa(self.kappa, false, self.control, "the trace-boundary dimension");
        c.positive_count("n_traces", self.n_traces);
        c.scales("scales", &self.scales);
        c.trace(&self.trace);
        if let Some(r) = self.spacing_ratio {
            c.require(r.is_finite() && r > 0.0, "spacing_ratio", "must be finite and > 0");
        }
        if let Some(l) = self.radial_levels {
            c.require((1..=60).contains(&l), "radial_levels", "must lie in 1..=60");
        }
        if let Some(ch) = self.chunk {
            c.positive_count("chunk", ch);
        }
    }

    fn run(&self, ctx: &Ctx, out: &mut Outputs) -> Result<()> {
        let n = out.traces(self.n_traces, ctx);
        let d = BoundaryOptions::default();
        let opts = BoundaryOptions {
            spacing_ratio: self.spacing_ratio.unwrap_or(d.spacing_ratio),
            radial_levels: self.radial_levels.unwrap_or(d.radial_levels),
            chunk: self.chunk.unwrap_or(d.chunk),
            pooling: self.pooling,
            trace: self.trace.apply(d.trace, ctx),
        };
        let est = trace_boundary_dimension_with(&self.map.build()?, self.kappa, n, &self.scales, ctx.seed, &opts)?;
        out.note_deadline(n, est.n_traces);
        write_dimension(
            &est,
            out,
            json!({ "spacing_ratio": opts.spacing_ratio, "radial_levels": opts.radial_levels, "chunk": opts.chunk }),
        )
    }
}

fn parse_params<P: Experiment>(cfg: &ExperimentConfig) -> Result<P> {
    serde_json::from_value(Value::Object(cfg.params.clone())).map_err(|e| config_error("params.", &e))
}

fn checks_for<P: Experiment>(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    match parse_params::<P>(cfg) {
        Ok(p) => {
            let mut c = Checks::default();
            p.check(&mut c);
            c.0
        }
        Err(e) => vec![diagnostic_of(&e)],
    }
}

fn diagnostic_of(e: &Error) -> Diagnostic {
    let (key, message) = match e {
        Error::Config { key, reason } => (key.clone(), reason.clone()),
        other => ("config".into(), other.to_string()),
    };
    Diagnostic { severity: Severity::Error, key, message }
}

/// Every violation of the config, without running anything.
pub fn validate(cfg: &ExperimentConfig) -> Vec<Diagnostic> {
    let mut out = match cfg.kind {
        ExperimentKind::Sieve => checks_for::<SieveParams>(cfg),
        ExperimentKind::Holder => checks_for::<HolderParams>(cfg),
        ExperimentKind::Spectrum => checks_for::<SpectrumParams>(cfg),
        ExperimentKind::JohnDimension => checks_for::<JohnParams>(cfg),
        ExperimentKind::Hitting => checks_for::<HittingParams>(cfg),
        ExperimentKind::LineDimension => checks_for::<LineParams>(cfg),
        ExperimentKind::Frostman => checks_for::<FrostmanParams>(cfg),
        ExperimentKind::TraceBoundary => checks_for::<BoundaryParams>(cfg),
        ExperimentKind::Dkappa => checks_for::<DkappaParams>(cfg),
    };
    let b = &cfg.budget;
    let mut budget = |ok: bool, key: &str, message: &str| {
        if !ok {
            out.push(Diagnostic { severity: Severity::Error, key: format!("budget.{key}"), message: message.into() });
        }
    };
    budget(b.max_traces.is_none_or(|m| m >= 1), "max_traces", "must be >= 1");
    budget(b.max_squares.is_none_or(|m| m >= 1), "max_squares", "must be >= 1");
    budget(b.max_seconds.is_none_or(|s| s.is_finite() && s > 0.0), "max_seconds", "must be finite and > 0");
    out
}

/// Parses and validates a JSON document; parse failures become diagnostics.
pub fn validate_json(text: &str) -> Vec<Diagnostic> {
    match ExperimentConfig::from_json(text) {
        Ok(cfg) => validate(&cfg),
        Err(e) => vec![diagnostic_of(&e)],
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub config: ExperimentConfig,
    pub version: String,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub outputs: Vec<OutputFile>,
    pub warnings: Vec<Diagnostic>,
    /// Budget limits that cut the run short; empty for a complete run.
    pub truncated: Vec<String>,
}

impl RunManifest {
    pub fn exit_code(&self) -> i32 {
        if self.truncated.is_empty() {
            0
        } else {
            4
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub threads: usize,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { threads: default_threads() }
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunManifest> {
    run_with(cfg, &RunOptions::default())
}

pub fn run_with(cfg: &ExperimentConfig, opts: &RunOptions) -> Result<RunManifest> {
    let start = Instant::now();
    let diagnostics = validate(cfg);
    if let Some(d) = diagnostics.iter().find(|d| d.severity == Severity::Error) {
        return Err(Error::Config { key: d.key.clone(), reason: d.message.clone() });
    }
    if opts.threads == 0 {
        return Err(Error::Config { key: "threads".into(), reason: "must be >= 1".into() });
    }
    std::fs::create_dir_all(&cfg.output_dir)
        .map_err(|e| Error::Config { key: "output_dir".into(), reason: e.to_string() })?;
    let ctx = Ctx {
        seed: cfg.seed,
        budget: cfg.budget.clone(),
        threads: opts.threads,
        deadline: cfg.budget.max_seconds.map(|s| start + Duration::from_secs_f64(s)),
    };
    let mut out = Outputs { dir: &cfg.output_dir, stem: cfg.kind.name(), files: Vec::new(), truncated: Vec::new() };
    match cfg.kind {
        ExperimentKind::Sieve => parse_params::<SieveParams>(cfg)?.run(&ctx, &mut out)?,
        ExperimentKind::Holder => parse_params::<HolderParams>(cfg)?.run(&ctx, &mut out)?,
        ExperimentKind::Spectrum => parse_params::<SpectrumParams>(cfg)?.run(&ctx, &mut out)?,
        ExperimentKind::JohnDimension => parse_params::<JohnParams>(cfg)?.run(&ctx, &mut out)?,
        ExperimentKind::Hitting => parse_params::<HittingParams>(cfg)?.run(&ctx, &mut out)?,
        ExperimentKind::LineDimension => parse_params::<LineParams>(cfg)?.run(&ctx, &mut out)?,
        ExperimentKind::Frostman => parse_params::<FrostmanParams>(cfg)?.run(&ctx, &mut out)?,
        ExperimentKind::TraceBoundary => parse_params::<BoundaryParams>(cfg)?.run(&ctx, &mut out)?,
        ExperimentKind::Dkappa => parse_params::<DkappaParams>(cfg)?.run(&ctx, &mut out)?,
    }
    let manifest = RunManifest {
        config: cfg.clone(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        threads: opts.threads,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        outputs: out.files,
        warnings: diagnostics,
        truncated: out.truncated,
    };
    std::fs::write(cfg.output_dir.join(MANIFEST), io::to_json(&manifest)?)?;
    Ok(manifest)
}

/// Process exit code for a failed run: 2 for config errors, 3 for numeric
/// failures, 4 for exhausted budgets.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Parameter { .. } | Error::Config { .. } | Error::Json(_) => 2,
        Error::Resource(_) => 4,
        Error::Io(_)
        | Error::Domain { .. }
        | Error::Evaluation { .. }
        | Error::Geometry(_)
        | Error::Numeric(_)
        | Error::Degenerate(_) => 3,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(kind: &str, params: Value) -> ExperimentConfig {
        serde_json::from_value(json!({ "kind": kind, "params": params, "seed": 1, "output_dir": "unused" })).unwrap()
    }

    fn errors(d: &[Diagnostic]) -> Vec<&Diagnostic> {
        d.iter().filter(|d| d.severity == Severity::Error).collect()
    }

    #[test]
    fn unknown_keys_name_the_key() {
        let e = ExperimentConfig::from_json(r#"{"kind": "dkappa", "seed": 1, "output_dir": "x", "colour": 1}"#).unwrap_err();
        assert!(matches!(&e, Error::Config { key, .. } if key == "colour"), "{e}");
        let d = validate(&cfg("dkappa", json!({ "kappa": 6.0, "kapa": 1 })));
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].key, "params.kapa");
        let d = validate(&cfg("sieve", json!({ "N": 2 })));
        assert_eq!(d[0].key, "params.p");
    }

    #[test]
    fn range_violations() {
        let d = validate(&cfg("hitting", json!({ "kappa": 9.0, "radii": [0.1], "n_traces": 10 })));
        assert_eq!(errors(&d).len(), 1);
        assert!(d[0].message.contains("(4, 8)"), "{}", d[0].message);
        let d = validate(&cfg("hitting", json!({ "kappa": 2.0, "radii": [0.1], "n_traces": 10, "control": true })));
        assert!(errors(&d).is_empty() && d.len() == 1);
        let d = validate(&cfg("sieve", json!({ "p": 1.2, "N": 2 })));
        assert!(errors(&d)[0].message.contains("(0, 1)"));
        let d = validate(&cfg("sieve", json!({ "p": 0.5, "N": 2, "mode": "refined" })));
        assert!(errors(&d).is_empty());
        assert!(d[0].message.contains("inapplicable"));
        let d = validate(&cfg("holder", json!({ "p": 0.5, "N": 2, "mode": "refined" })));
        assert_eq!(errors(&d)[0].key, "params.exponent");
        // several problems are all reported
        let d = validate(&cfg("line-dimension", json!({ "kappa": 3.0, "n_traces": 0, "scales": [0.1, 0.2] })));
        assert_eq!(errors(&d).len(), 3);
        let mut c = cfg("dkappa", json!({ "kappa": 6.0 }));
        c.budget.max_seconds = Some(-1.0);
        assert_eq!(validate(&c)[0].key, "budget.max_seconds");
    }

    #[test]
    fn map_specs() {
        let m: MapSpec = serde_json::from_value(json!({ "kind": "snowflake", "depth": 1 })).unwrap();
        assert!(matches!(m, MapSpec::Snowflake(SnowflakeSpec { depth: 1, .. })));
        let m: MapSpec = serde_json::from_value(json!({ "kind": "koebe" })).unwrap();
        assert_eq!(m, MapSpec::Map(ConformalMap::Koebe));
        assert!(serde_json::from_value::<MapSpec>(json!({ "kind": "snowflake", "depth": 1, "x": 0 })).is_err());
    }

    #[test]
    fn exit_codes() {
        assert_eq!(exit_code(&Error::Config { key: "k".into(), reason: String::new() }), 2);
        assert_eq!(exit_code(&Error::Numeric(String::new())), 3);
        assert_eq!(exit_code(&Error::Resource(String::new())), 4);
    }
}
