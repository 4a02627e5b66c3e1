//! Monte Carlo experiments on how SLE traces meet the boundary: hitting
//! probabilities of small boundary discs, the dimension of the trace's
//! intersection with the boundary, and second moments of a Frostman measure
//! of the hit set.
//!
//! All experiments measure proximity by the conformal distance tracked by the
//! forward boundary flow (see [`crate::loewner::FlowOptions`]), which is within
//! a factor 4 of the Euclidean distance from a boundary point to the trace.
//! Exponents are ratios across scales, so the constant cancels.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::f64::consts::PI;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::time::Instant;

use crate::conformal::ConformalMap;
use crate::error::{param, require_finite, Error, Result};
use crate::loewner::{
    chordal_boundary_distances, radial_boundary_distances, sample_driving, sample_radial_driving, splitmix,
    DrivingFunction, FlowOptions,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use crate::stats::{fit_counts, fit_line};

/// Maps `f` over `0..n` on up to `threads` scoped workers. Results come back in
/// index order, so reductions over them do not depend on the thread count.
pub fn par_map<T, F>(n: usize, threads: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    par_map_until(n, threads, None, f)
}

/// [`par_map`] that stops handing out indices once `deadline` has passed and
/// returns the longest fully computed prefix `f(0), .., f(k - 1)`.
pub fn par_map_until<T, F>(n: usize, threads: usize, deadline: Option<Instant>, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync,
{
    let expired = || deadline.is_some_and(|d| Instant::now() >= d);
    let threads = threads.clamp(1, n.max(1));
    if threads == 1 {
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            if expired() {
                break;
            }
            out.push(f(i));
        }
        return out;
    }
    let next = AtomicUsize::new(0);
    let (f, next, expired) = (&f, &next, &expired);
    let mut done: Vec<(usize, T)> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..threads)
            .map(|_| {
                s.spawn(move || {
                    let mut mine = Vec::new();
                    while !expired() {
                        let i = next.fetch_add(1, Ordering::Relaxed);
                        if i >= n {
                            break;
                        }
                        mine.push((i, f(i)));
                    }
                    mine
                })
            })
            .collect();
        handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
    });
    done.sort_unstable_by_key(|(i, _)| *i);
    let k = done.iter().enumerate().take_while(|(j, (i, _))| j == i).count();
    done.truncate(k);
    done.into_iter().map(|(_, v)| v).collect()
}

pub fn default_threads() -> usize {
    std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)
}

/// Seed of trace `i` in an experiment seeded with `seed`.
#[inline]
pub fn trace_seed(seed: u64, i: usize) -> u64 {
    splitmix(seed ^ splitmix(0x7261_6365 ^ i as u64))
}

/// One row of a per-scale table.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleEstimate {
    pub scale: f64,
    pub estimate: f64,
    pub stderr: f64,
}

fn mean_and_stderr(sum: f64, sum_sq: f64, n: usize) -> (f64, f64) {
    let nf = n as f64;
    let mean = sum / nf;
    if n < 2 {
        return (mean, 0.0);
    }
    let var = ((sum_sq - nf * mean * mean) / (nf - 1.0)).max(0.0);
    (mean, (var / nf).sqrt())
}

/// Discretization shared by the trace experiments.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceOptions {
    /// Capacity time covered by `n_steps` uniform steps.
    pub horizon: f64,
    pub n_steps: usize,
    /// Chordal drivings continue past `horizon` with steps proportional to
    /// the elapsed time until every tracked point is swallowed or this time
    /// is reached. Swallowing times have heavy tails, so a uniform grid long
    /// enough to cover a fixed window would be far too fine. Radial
    /// experiments stop at `horizon`, where unswallowed points are already
    /// exponentially rare.
    pub tail_horizon: f64,
    /// Worker count; results do not depend on it, so it is not serialized.
    #[serde(skip, default = "default_threads")]
    pub threads: usize,
    /// Stop starting new traces after this instant and report the completed
    /// prefix of the trace sequence.
    #[serde(skip)]
    pub deadline: Option<Instant>,
}

impl TraceOptions {
    fn validate(&self) -> Result<()> {
        require_finite("horizon", self.horizon)?;
        if self.horizon <= 0.0 {
            return Err(param("horizon", "must be > 0"));
        }
        if self.n_steps == 0 {
            return Err(param("n_steps", "must be >= 1"));
        }
        require_finite("tail_horizon", self.tail_horizon)?;
        if self.tail_horizon < self.horizon {
            return Err(param("tail_horizon", "must be >= horizon"));
        }
        Ok(())
    }
}

/// Points flowed together by default. Each step costs time in proportion to
/// the points carried, while refinement is driven by the few points nearest
/// the tip, so small independent groups are much cheaper than one large one.
/// Bridge midpoints are keyed by position, so grouping does not change the
/// driving a point sees.
pub const DEFAULT_CHUNK: usize = 32;

fn completed(n: usize) -> Result<usize> {
    if n == 0 {
        return Err(Error::Resource("deadline passed before the first trace completed".into()));
    }
    Ok(n)
}

fn flow_options(finest: f64) -> FlowOptions {
    FlowOptions { floor: finest, ..FlowOptions::default() }
}

fn check_kappa(kappa: f64) -> Result<()> {
    require_finite("kappa", kappa)?;
    if kappa < 0.0 {
        return Err(param("kappa", format!("must be >= 0, got {kappa}")));
    }
    Ok(())
}

fn check_scales(name: &'static str, scales: &[f64]) -> Result<()> {
    if scales.is_empty() {
        return Err(param(name, "must not be empty"));
    }
    for &s in scales {
        require_finite(name, s)?;
        if s <= 0.0 {
            return Err(param(name, format!("entries must be > 0, got {s}")));
        }
    }
    if scales.windows(2).any(|w| w[1] >= w[0]) {
        return Err(param(name, "must be strictly decreasing"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Hitting probabilities

/// Radial SLE from `1` towards `0` in the disk, watching the boundary disc
/// `B(e^{it}, r)` for each radius in `radii`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HittingExperiment {
    pub kappa: f64,
    pub center_angle: f64,
    pub delta: f64,
    /// Decreasing radii, all below `delta / 2`.
    pub radii: Vec<f64>,
    pub n_traces: usize,
    pub seed: u64,
    pub hits_per_radius: Vec<u64>,
}

impl HittingExperiment {
    pub fn new(kappa: f64, center_angle: f64, delta: f64, radii: Vec<f64>, n_traces: usize, seed: u64) -> Result<Self> {
        check_kappa(kappa)?;
        require_finite("center_angle", center_angle)?;
        require_finite("delta", delta)?;
        let t = center_angle.abs();
        if !(delta > 0.0 && delta < t && t < PI - delta) {
            return Err(param("center_angle", format!("need delta < |t| < pi - delta, got t = {center_angle}, delta = {delta}")));
        }
        check_scales("radii", &radii)?;
        if radii[0] >= 0.5 * delta {
            return Err(param("radii", format!("must be < delta / 2 = {}, got {}", 0.5 * delta, radii[0])));
        }
        if n_traces == 0 {
            return Err(param("n_traces", "must be >= 1"));
        }
        let hits_per_radius = vec![0; radii.len()];
        Ok(Self { kappa, center_angle, delta, radii, n_traces, seed, hits_per_radius })
    }

    pub fn default_options() -> TraceOptions {
        TraceOptions { horizon: 30.0, n_steps: 750, tail_horizon: 30.0, threads: default_threads(), deadline: None }
    }

    /// Samples the traces and fills `hits_per_radius`. Every radius sees the
    /// same traces, so the counts are monotone in the radius.
    pub fn run(&mut self, opts: &TraceOptions) -> Result<()> {
        opts.validate()?;
        let flow = flow_options(*self.radii.last().unwrap());
        let angle = [self.center_angle];
        let dists = par_map_until(self.n_traces, opts.threads, opts.deadline, |i| -> Result<f64> {
            let d = sample_radial_driving(self.kappa, opts.horizon, opts.n_steps, trace_seed(self.seed, i), 0.0)?;
            Ok(radial_boundary_distances(&d, &angle, &flow)?[0])
        });
        self.n_traces = completed(dists.len())?;
        let mut hits = vec![0u64; self.radii.len()];
        for d in dists {
            let d = d?;
            for (h, &r) in hits.iter_mut().zip(&self.radii) {
                *h += u64::from(d <= r);
            }
        }
        self.hits_per_radius = hits;
        Ok(())
    }

    /// Hit fractions with binomial standard errors.
    pub fn estimates(&self) -> Vec<ScaleEstimate> {
        let n = self.n_traces as f64;
        self.radii
            .iter()
            .zip(&self.hits_per_radius)
            .map(|(&r, &h)| {
                let p = h as f64 / n;
                ScaleEstimate { scale: r, estimate: p, stderr: (p * (1.0 - p) / n).sqrt() }
            })
            .collect()
    }
}

/// Largest admissible offset `delta` for an arc centred at angle `t`.
pub fn max_delta(center_angle: f64) -> f64 {
    let t = center_angle.abs();
    t.min(PI - t)
}

/// Fraction of radial SLE traces from `1` meeting `B(e^{it}, r)`, with its
/// binomial standard error. A radius of at least 2 covers the closed disk.
pub fn hitting_probability(kappa: f64, center_angle: f64, radius: f64, n_traces: usize, seed: u64) -> Result<ScaleEstimate> {
    require_finite("radius", radius)?;
    if radius >= 2.0 {
        check_kappa(kappa)?;
        return Ok(ScaleEstimate { scale: radius, estimate: 1.0, stderr: 0.0 });
    }
    let delta = max_delta(center_angle);
    if radius >= 0.5 * delta {
        return Err(param("radius", format!("must be < delta / 2 = {} for angle {center_angle}", 0.5 * delta)));
    }
    // any delta strictly between 2r and the maximum satisfies the preconditions
    let mut exp = HittingExperiment::new(kappa, center_angle, 0.5 * (2.0 * radius + delta), vec![radius], n_traces, seed)?;
    exp.run(&HittingExperiment::default_options())?;
    Ok(exp.estimates()[0])
}

/// Exponent implied by two hit fractions `p(r1) ~ r1^s`, `p(r2) ~ r2^s`, with a
/// delta-method standard error treating the two estimates as independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RatioExponent {
    pub ratio: f64,
    pub ratio_stderr: f64,
    pub exponent: f64,
    pub exponent_stderr: f64,
}

pub fn ratio_exponent(large: &ScaleEstimate, small: &ScaleEstimate) -> Result<RatioExponent> {
    if large.estimate <= 0.0 || small.estimate <= 0.0 {
        return Err(Error::Degenerate("zero hit fraction; increase n_traces".into()));
    }
    let ratio = large.estimate / small.estimate;
    let rel = ((large.stderr / large.estimate).powi(2) + (small.stderr / small.estimate).powi(2)).sqrt();
    let span = (large.scale / small.scale).ln();
    Ok(RatioExponent { ratio, ratio_stderr: ratio * rel, exponent: ratio.ln() / span, exponent_stderr: rel / span })
}

// ---------------------------------------------------------------------------
// Box-counting dimensions of the trace's boundary set

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pooling {
    /// Average the per-trace box counts.
    Mean,
    /// Count boxes touched by any trace.
    Union,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionEstimate {
    pub kappa: f64,
    pub n_traces: usize,
    pub seed: u64,
    pub pooling: Pooling,
    pub scales: Vec<f64>,
    pub counts: Vec<f64>,
    pub stderr: Vec<f64>,
    pub slope: f64,
    pub r_squared: f64,
    pub options: TraceOptions,
}

impl DimensionEstimate {
    pub fn rows(&self) -> Vec<ScaleEstimate> {
        (0..self.scales.len())
            .map(|i| ScaleEstimate { scale: self.scales[i], estimate: self.counts[i], stderr: self.stderr[i] })
            .collect()
    }
}

/// Per-trace sets of box indices, one set per scale.
type BoxSets = Vec<HashSet<(i64, i64)>>;

fn pool_counts(
    kappa: f64,
    n_traces: usize,
    seed: u64,
    scales: &[f64],
    pooling: Pooling,
    options: TraceOptions,
    per_trace: Vec<Result<BoxSets>>,
) -> Result<DimensionEstimate> {
    let m = scales.len();
    let mut sum = vec![0.0; m];
    let mut sum_sq = vec![0.0; m];
    let mut union: BoxSets = vec![HashSet::new(); m];
    for sets in per_trace {
        for (s, set) in sets?.into_iter().enumerate() {
            let c = set.len() as f64;
            sum[s] += c;
            sum_sq[s] += c * c;
            if pooling == Pooling::Union {
                union[s].extend(set);
            }
        }
    }
    let (counts, stderr): (Vec<f64>, Vec<f64>) = match pooling {
        Pooling::Mean => (0..m).map(|s| mean_and_stderr(sum[s], sum_sq[s], n_traces)).unzip(),
        Pooling::Union => (union.iter().map(|u| u.len() as f64).collect(), vec![0.0; m]),
    };
    // counts barely growing across the scales means the traces do not reach
    // the boundary beyond their starting point
    if counts.iter().any(|&c| c <= 0.0) || counts[m - 1] < 2.0 * counts[0] {
        return Err(Error::Degenerate(format!(
            "insufficient boundary visits: box counts {counts:?} at scales {scales:?}"
        )));
    }
    let fit = fit_counts(scales, counts.clone());
    Ok(DimensionEstimate {
        kappa,
        n_traces,
        seed,
        pooling,
        scales: scales.to_vec(),
        counts,
        stderr,
        slope: fit.slope,
        r_squared: fit.r_squared,
        options,
    })
}

/// Boundary grid and horizon for [`boundary_line_dimension`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineOptions {
    pub half_width: f64,
    pub spacing: f64,
    /// Grid points flowed together, see [`DEFAULT_CHUNK`].
    pub chunk: usize,
    pub pooling: Pooling,
    pub trace: TraceOptions,
}

impl Default for LineOptions {
    fn default() -> Self {
        Self {
            half_width: 2.0,
            spacing: 2f64.powi(-8),
            chunk: DEFAULT_CHUNK,
            pooling: Pooling::Mean,
            trace: TraceOptions { horizon: 16.0, n_steps: 800, tail_horizon: 2f64.powi(24), threads: default_threads(), deadline: None },
        }
    }
}

/// Appends steps with `dt / t` equal to the last uniform step's ratio until
/// `until`.
fn extend_geometric(d: &mut DrivingFunction, until: f64) {
    let mut t = d.horizon();
    let q = d.dt(d.n_steps()) / t;
    let mut w = *d.values.last().unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(splitmix(d.seed ^ 0x7461_696c));
    while t < until {
        let next = (t * (1.0 + q)).min(until);
        let z: f64 = rng.sample(StandardNormal);
        w += (d.kappa * (next - t)).sqrt() * z;
        t = next;
        d.times.push(t);
        d.values.push(w);
    }
}

/// Box-counting slope of `gamma ∩ [-w, w]` for chordal SLE in the half plane:
/// at scale `eta`, the boxes of side `eta` holding a grid point within
/// conformal distance `eta` of the trace.
pub fn boundary_line_dimension(kappa: f64, n_traces: usize, scales: &[f64], seed: u64) -> Result<DimensionEstimate> {
    boundary_line_dimension_with(kappa, n_traces, scales, seed, &LineOptions::default())
}

pub fn boundary_line_dimension_with(
    kappa: f64,
    n_traces: usize,
    scales: &[f64],
    seed: u64,
    opts: &LineOptions,
) -> Result<DimensionEstimate> {
    check_kappa(kappa)?;
    check_scales("scales", scales)?;
    opts.trace.validate()?;
    if n_traces == 0 {
        return Err(param("n_traces", "must be >= 1"));
    }
    if !(opts.spacing > 0.0 && opts.spacing < *scales.last().unwrap()) {
        return Err(param("spacing", "must be positive and below the finest scale"));
    }
    if opts.chunk == 0 {
        return Err(param("chunk", "must be >= 1"));
    }
    let w = opts.half_width;
    let n = (2.0 * w / opts.spacing).round() as usize;
    // cell midpoints, so no grid point sits on the starting point
    let grid: Vec<f64> = (0..n).map(|i| -w + (i as f64 + 0.5) * opts.spacing).collect();
    let flow = flow_options(*scales.last().unwrap());
    let t = opts.trace;
    let per_trace = par_map_until(n_traces, t.threads, t.deadline, |i| -> Result<BoxSets> {
        let mut d = sample_driving(kappa, t.horizon, t.n_steps, trace_seed(seed, i))?;
        extend_geometric(&mut d, t.tail_horizon);
        let mut ups = Vec::with_capacity(grid.len());
        for part in grid.chunks(opts.chunk) {
            ups.extend(chordal_boundary_distances(&d, part, &flow)?);
        }
        Ok(scales
            .iter()
            .map(|&eta| {
                grid.iter()
                    .zip(&ups)
                    .filter(|(_, &u)| u <= eta)
                    .map(|(&x, _)| (((x + w) / eta).floor() as i64, 0))
                    .collect()
            })
            .collect())
    });
    pool_counts(kappa, completed(per_trace.len())?, seed, scales, opts.pooling, t, per_trace)
}

/// Boundary sampling and horizon for [`trace_boundary_dimension`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundaryOptions {
    /// Maximum spacing of the boundary sample in the image, as a fraction of
    /// the finest scale.
    pub spacing_ratio: f64,
    /// Levels `1 - 2^-k` at which the radial image distance is tabulated.
    pub radial_levels: u32,
    /// Boundary points flowed together, see [`DEFAULT_CHUNK`].
    pub chunk: usize,
    pub pooling: Pooling,
    pub trace: TraceOptions,
}

impl Default for BoundaryOptions {
    fn default() -> Self {
        Self {
            spacing_ratio: 0.25,
            radial_levels: 30,
            chunk: DEFAULT_CHUNK,
            pooling: Pooling::Mean,
            trace: TraceOptions { horizon: 30.0, n_steps: 750, tail_horizon: 30.0, threads: default_threads(), deadline: None },
        }
    }
}

/// Boundary angles whose images under `map` are at most `spacing` apart,
/// found by bisecting a uniform start grid.
pub fn boundary_sample(map: &ConformalMap, spacing: f64) -> Result<(Vec<f64>, Vec<Complex64>)> {
    let f = |a: f64| map.eval(Complex64::from_polar(1.0, a));
    let start = 256;
    let mut out_a = Vec::new();
    let mut out_z = Vec::new();
    for k in 0..start {
        let a0 = 2.0 * PI * k as f64 / start as f64;
        let a1 = 2.0 * PI * (k + 1) as f64 / start as f64;
        let mut stack = vec![(a0, f(a0)?, a1, f(a1)?, 0u32)];
        while let Some((a, za, b, zb, depth)) = stack.pop() {
            if (za - zb).norm() <= spacing || depth >= 60 {
                out_a.push(a);
                out_z.push(za);
                continue;
            }
            let m = 0.5 * (a + b);
            let zm = f(m)?;
            // right half first so the left half is popped first
            stack.push((m, zm, b, zb, depth + 1));
            stack.push((a, za, m, zm, depth + 1));
        }
    }
    Ok((out_a, out_z))
}

/// Box-counting slope of `f(gamma) ∩ ∂G` for radial SLE in the disk carried to
/// `G = f(D)`. A boundary point `f(xi)` counts at scale `eta` when the image of
/// the radius from `xi` to the trace's conformal distance stays within `eta`.
pub fn trace_boundary_dimension(
    map: &ConformalMap,
    kappa: f64,
    n_traces: usize,
    scales: &[f64],
    seed: u64,
) -> Result<DimensionEstimate> {
    trace_boundary_dimension_with(map, kappa, n_traces, scales, seed, &BoundaryOptions::default())
}

pub fn trace_boundary_dimension_with(
    map: &ConformalMap,
    kappa: f64,
    n_traces: usize,
    scales: &[f64],
    seed: u64,
    opts: &BoundaryOptions,
) -> Result<DimensionEstimate> {
    check_kappa(kappa)?;
    check_scales("scales", scales)?;
    opts.trace.validate()?;
    if n_traces == 0 {
        return Err(param("n_traces", "must be >= 1"));
    }
    if opts.chunk == 0 {
        return Err(param("chunk", "must be >= 1"));
    }
    if !map.is_bounded() {
        return Err(param("map", "needs a bounded image domain"));
    }
    let finest = *scales.last().unwrap();
    let (angles, images) = boundary_sample(map, opts.spacing_ratio * finest)?;
    // thresholds[s][j]: largest tabulated radial depth at which the image of
    // the radius through angle j stays within scales[s] of its endpoint
    let levels = opts.radial_levels;
    let mut thresholds = vec![vec![0.0; angles.len()]; scales.len()];
    for (j, (&a, &z)) in angles.iter().zip(&images).enumerate() {
        let xi = Complex64::from_polar(1.0, a);
        let (mut k, mut cur) = (levels, 0.0);
        for (s, &eta) in scales.iter().enumerate().rev() {
            // scales increase towards s = 0, so k only decreases
            while k > 0 {
                let depth = 2f64.powi(-(k as i32));
                if (map.eval(xi * (1.0 - depth))? - z).norm() > eta {
                    break;
                }
                cur = depth;
                k -= 1;
            }
            thresholds[s][j] = cur;
        }
    }
    let smallest = thresholds[scales.len() - 1].iter().copied().filter(|&u| u > 0.0).fold(1.0, f64::min);
    let flow = flow_options(smallest.max(1e-9));
    let t = opts.trace;
    let per_trace = par_map_until(n_traces, t.threads, t.deadline, |i| -> Result<BoxSets> {
        let d = sample_radial_driving(kappa, t.horizon, t.n_steps, trace_seed(seed, i), 0.0)?;
        let mut ups = Vec::with_capacity(angles.len());
        for part in angles.chunks(opts.chunk) {
            ups.extend(radial_boundary_distances(&d, part, &flow)?);
        }
        Ok(scales
            .iter()
            .enumerate()
            .map(|(s, &eta)| {
                (0..angles.len())
                    .filter(|&j| ups[j] <= thresholds[s][j])
                    .map(|j| ((images[j].re / eta).floor() as i64, (images[j].im / eta).floor() as i64))
                    .collect()
            })
            .collect())
    });
    pool_counts(kappa, completed(per_trace.len())?, seed, scales, opts.pooling, t, per_trace)
}

// ---------------------------------------------------------------------------
// Frostman second moments

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: f64,
    pub mass: f64,
}

/// A discrete measure on `[1, 2]` and the hit sets `C_eps` of chordal SLE
/// from 0: atoms within conformal distance `eps` of the trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrostmanExperiment {
    pub a: f64,
    pub measure_atoms: Vec<Atom>,
    /// Dimension of the continuum measure the atoms discretize.
    pub measure_dimension: f64,
    pub eps_list: Vec<f64>,
    pub first_moments: Vec<f64>,
    pub second_moments: Vec<f64>,
}

impl FrostmanExperiment {
    pub fn new(a: f64, measure_atoms: Vec<Atom>, measure_dimension: f64, eps_list: Vec<f64>) -> Result<Self> {
        require_finite("a", a)?;
        if a <= 0.0 {
            return Err(param("a", "must be > 0"));
        }
        if measure_atoms.is_empty() {
            return Err(param("measure_atoms", "must not be empty"));
        }
        for at in &measure_atoms {
            if !(1.0..=2.0).contains(&at.x) || !(at.mass >= 0.0) || !at.mass.is_finite() {
                return Err(param("measure_atoms", format!("atom {at:?} must lie in [1, 2] with mass >= 0")));
            }
        }
        if measure_atoms.iter().map(|at| at.mass).sum::<f64>() <= 0.0 {
            return Err(param("measure_atoms", "total mass must be > 0"));
        }
        check_scales("eps_list", &eps_list)?;
        Ok(Self { a, measure_atoms, measure_dimension, eps_list, first_moments: vec![], second_moments: vec![] })
    }

    /// `n` equal atoms at the cell midpoints of `[1, 2]`.
    pub fn lebesgue(a: f64, n: usize, eps_list: Vec<f64>) -> Result<Self> {
        let m = 1.0 / n as f64;
        let atoms = (0..n).map(|i| Atom { x: 1.0 + (i as f64 + 0.5) * m, mass: m }).collect();
        Self::new(a, atoms, 1.0, eps_list)
    }

    /// Middle-thirds Cantor measure of `[1, 2]` at construction stage `stage`:
    /// mass `2^-stage` at the midpoint of each surviving interval.
    pub fn cantor(a: f64, stage: u32, eps_list: Vec<f64>) -> Result<Self> {
        let mut lefts = vec![1.0];
        let mut len = 1.0;
        for _ in 0..stage {
            len /= 3.0;
            lefts = lefts.iter().flat_map(|&l| [l, l + 2.0 * len]).collect();
        }
        let mass = 0.5f64.powi(stage as i32);
        let atoms = lefts.iter().map(|&l| Atom { x: l + 0.5 * len, mass }).collect();
        Self::new(a, atoms, 2f64.ln() / 3f64.ln(), eps_list)
    }

    pub fn point_mass(a: f64, x: f64, eps_list: Vec<f64>) -> Result<Self> {
        Self::new(a, vec![Atom { x, mass: 1.0 }], 0.0, eps_list)
    }

    pub fn total_mass(&self) -> f64 {
        self.measure_atoms.iter().map(|at| at.mass).sum()
    }

    /// Discrete `a`-energy `sum_{i != j} m_i m_j |x_i - x_j|^{-a}`.
    pub fn energy(&self) -> f64 {
        let at = &self.measure_atoms;
        let mut e = 0.0;
        for i in 0..at.len() {
            for j in i + 1..at.len() {
                e += 2.0 * at[i].mass * at[j].mass * (at[i].x - at[j].x).abs().powf(-self.a);
            }
        }
        e
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub eps: f64,
    pub first: f64,
    pub first_stderr: f64,
    pub second: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrostmanReport {
    pub a: f64,
    pub kappa: f64,
    pub hitting_exponent: f64,
    pub n_traces: usize,
    pub seed: u64,
    pub atoms: usize,
    pub total_mass: f64,
    pub energy: f64,
    pub measure_dimension: f64,
    /// Measure dimension above the hitting exponent `8/kappa - 1`.
    pub feasible: bool,
    pub rows: Vec<MomentRow>,
    /// `max / min` of the moment ratio over `eps`.
    pub ratio_spread: f64,
    pub cauchy_schwarz: bool,
    /// Least squares exponent of the first moment against `eps`.
    pub first_moment_exponent: f64,
    pub options: TraceOptions,
}

impl FrostmanReport {
    pub fn first_moment_rows(&self) -> Vec<ScaleEstimate> {
        self.rows.iter().map(|r| ScaleEstimate { scale: r.eps, estimate: r.first, stderr: r.first_stderr }).collect()
    }
}

pub fn frostman_default_options() -> TraceOptions {
    TraceOptions { horizon: 16.0, n_steps: 800, tail_horizon: 2f64.powi(24), threads: default_threads(), deadline: None }
}

/// First and second moments of `mu(C_eps)` over `n_traces` chordal traces.
/// Sums of dyadic masses are exact, so the Cauchy-Schwarz check is exact too.
pub fn frostman_second_moment(exp: &mut FrostmanExperiment, kappa: f64, n_traces: usize, seed: u64) -> Result<FrostmanReport> {
    frostman_second_moment_with(exp, kappa, n_traces, seed, &frostman_default_options())
}

pub fn frostman_second_moment_with(
    exp: &mut FrostmanExperiment,
    kappa: f64,
    n_traces: usize,
    seed: u64,
    opts: &TraceOptions,
) -> Result<FrostmanReport> {
    check_kappa(kappa)?;
    opts.validate()?;
    if n_traces == 0 {
        return Err(param("n_traces", "must be >= 1"));
    }
    let xs: Vec<f64> = exp.measure_atoms.iter().map(|at| at.x).collect();
    let flow = flow_options(*exp.eps_list.last().unwrap());
    let masses = par_map_until(n_traces, opts.threads, opts.deadline, |i| -> Result<Vec<f64>> {
        let mut d = sample_driving(kappa, opts.horizon, opts.n_steps, trace_seed(seed, i))?;
        extend_geometric(&mut d, opts.tail_horizon);
        let mut ups = Vec::with_capacity(xs.len());
        for part in xs.chunks(DEFAULT_CHUNK) {
            ups.extend(chordal_boundary_distances(&d, part, &flow)?);
        }
        Ok(exp
            .eps_list
            .iter()
            .map(|&eps| exp.measure_atoms.iter().zip(&ups).filter(|(_, &u)| u <= eps).map(|(at, _)| at.mass).sum())
            .collect())
    });
    let n_traces = completed(masses.len())?;
    let m = exp.eps_list.len();
    let (mut s1, mut s2) = (vec![0.0; m], vec![0.0; m]);
    for row in masses {
        for (k, v) in row?.into_iter().enumerate() {
            s1[k] += v;
            s2[k] += v * v;
        }
    }
    let nf = n_traces as f64;
    let mut rows = Vec::with_capacity(m);
    for k in 0..m {
        if s1[k] <= 0.0 {
            return Err(Error::Degenerate(format!("first moment vanishes at eps = {}; increase n_traces", exp.eps_list[k])));
        }
        let (first, first_stderr) = mean_and_stderr(s1[k], s2[k], n_traces);
        let second = s2[k] / nf;
        rows.push(MomentRow { eps: exp.eps_list[k], first, first_stderr, second, ratio: second / (first * first) });
    }
    exp.first_moments = rows.iter().map(|r| r.first).collect();
    exp.second_moments = rows.iter().map(|r| r.second).collect();
    let ratios = rows.iter().map(|r| r.ratio);
    let spread = ratios.clone().fold(f64::MIN, f64::max) / ratios.fold(f64::MAX, f64::min);
    let logs_e: Vec<f64> = rows.iter().map(|r| r.eps.ln()).collect();
    let logs_m: Vec<f64> = rows.iter().map(|r| r.first.ln()).collect();
    let first_moment_exponent = if m >= 2 { fit_line(&logs_e, &logs_m).slope } else { f64::NAN };
    let hitting_exponent = 8.0 / kappa - 1.0;
    Ok(FrostmanReport {
        a: exp.a,
        kappa,
        hitting_exponent,
        n_traces,
        seed,
        atoms: exp.measure_atoms.len(),
        total_mass: exp.total_mass(),
        energy: exp.energy(),
        measure_dimension: exp.measure_dimension,
        feasible: exp.measure_dimension > hitting_exponent,
        cauchy_schwarz: rows.iter().all(|r| r.first * r.first <= r.second),
        rows,
        ratio_spread: spread,
        first_moment_exponent,
        options: *opts,
    })
}
