//! Forward flow of boundary points under the discrete Loewner evolution.
//!
//! For a boundary point `x` that has not been swallowed, the trace distance
//! `dist(x, gamma[0, t])` equals the distance from `x` to the hull, and by the
//! Koebe quarter theorem applied to the reflected map it is comparable, within
//! a factor 4 either way, to the conformal distance
//!
//! ```text
//! Y_t(x) = dist(g_t(x), image of the hull) / |g_t'(x)|.
//! ```
//!
//! These routines track `min_t Y_t(x)` for many boundary points at once, which
//! costs `O(points)` per step instead of the `O(steps)` per trace point that
//! backward composition needs. Steps during which the driving function could
//! reach a tracked point are refined by Brownian-bridge bisection.

use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use super::driving::{bridge_child, keyed_normal, DrivingFunction, LoewnerKind};
use crate::error::{param, Result};
use crate::slit;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowOptions {
    /// Distances below this scale count as hits and need no further resolution.
    pub floor: f64,
    /// Refine a step when a tracked point is within this many step widths of
    /// the hull image.
    pub refine_ratio: f64,
    /// Maximum number of bisections of a single step. Bisection also stops
    /// once step widths fall below `1e-100`.
    pub max_depth: u32,
}

impl Default for FlowOptions {
    fn default() -> Self {
        Self { floor: 1e-3, refine_ratio: 3.0, max_depth: 1000 }
    }
}

trait FlowState {
    fn done(&self) -> bool;
    /// Signed driving increment from `a` to `b`.
    fn delta(&self, a: f64, b: f64) -> f64;
    /// `inc` is the signed driving increment of the step. States keep the
    /// hull image relative to the driving point, so only increments are
    /// ever needed and nothing cancels at small scales.
    fn needs_refine(&self, inc: f64, width: f64, opts: &FlowOptions) -> bool;
    fn apply(&mut self, dt: f64, inc: f64, blind: Option<Blind>);
}

/// A step left unresolved at the depth limit. Points closer to the driving
/// than `reach` whose distance is not yet resolved to the floor keep their
/// previous minimum: the step cannot tell a near miss from a pass.
#[derive(Clone, Copy)]
struct Blind {
    reach: f64,
    width: f64,
    floor: f64,
}

impl Blind {
    #[inline]
    fn hides(blind: Option<Blind>, dist: f64, dg: f64) -> bool {
        matches!(blind, Some(b) if dist < b.reach && b.width > 0.5 * b.floor * dg)
    }
}

// squares of step widths must stay in the normal range
const MIN_WIDTH: f64 = 1e-100;

/// Gaps below this count as swallowed. Such a point sits in a fjord far too
/// narrow for any resolvable step to enter, and its gap would soon underflow.
const MIN_GAP: f64 = 1e-200;

struct Driver<'a> {
    kappa: f64,
    opts: &'a FlowOptions,
}

impl Driver<'_> {
    fn step<S: FlowState>(
        &self,
        state: &mut S,
        dt: f64,
        inc: f64,
        depth: u32,
        key: u64,
    ) {
        if state.done() {
            return;
        }
        let width = inc.abs() + 2.0 * dt.sqrt();
        let unresolved = self.kappa > 0.0 && self.opts.max_depth > 0 && state.needs_refine(inc, width, self.opts);
        let depth_limit = self.opts.max_depth.min(if width < MIN_WIDTH { depth } else { u32::MAX });
        if unresolved && depth < depth_limit {
            let z = keyed_normal(key);
            let first = 0.5 * inc + 0.5 * (self.kappa * dt).sqrt() * z;
            self.step(state, 0.5 * dt, first, depth + 1, bridge_child(key, false));
            self.step(state, 0.5 * dt, inc - first, depth + 1, bridge_child(key, true));
        } else {
            let o = self.opts;
            let blind = unresolved.then_some(Blind { reach: o.refine_ratio * width, width, floor: o.floor });
            state.apply(dt, inc, blind);
        }
    }

    fn run<S: FlowState>(&self, driving: &DrivingFunction, state: &mut S) {
        for j in 1..=driving.n_steps() {
            if state.done() {
                break;
            }
            let key = driving.bridge_key(j);
            let inc = state.delta(driving.values[j - 1], driving.values[j]);
            self.step(state, driving.dt(j), inc, 0, key);
        }
    }
}

/// Chordal flow of the gap `gap` between a boundary point and the hull-image
/// edge lying `edge` beyond the driving point, on the same side. Returns the
/// new gap and `|g'|` at the point, without cancellation for tiny gaps.
#[inline]
fn chordal_gap(edge: f64, gap: f64, dt: f64) -> (f64, f64) {
    let a = 2.0 * dt.sqrt();
    let se = edge.hypot(a);
    let x = edge + gap;
    let sx = x.hypot(a);
    (gap * ((2.0 * edge + gap) / (sx + se)), x / sx)
}

/// Radial analogue of [`chordal_gap`] for the hull-image edge at arc offset
/// `edge` from the driving point, with the terms that depend only on the edge
/// computed once per step.
struct RadialEdge {
    s: f64,
    h0: f64,
    c0: f64,
    s0: f64,
    m: f64,
}

impl RadialEdge {
    fn new(edge: f64, dt: f64) -> Self {
        let s = (-0.5 * dt).exp();
        let m = -(-dt).exp_m1();
        let h0 = 0.5 * edge;
        let (sin0, c0) = h0.sin_cos();
        Self { s, h0, c0, s0: m.sqrt().hypot(s * sin0), m }
    }

    /// New gap and `|g'|` at a point `gap` beyond the edge.
    #[inline]
    fn gap(&self, gap: f64) -> (f64, f64) {
        let Self { s, h0, c0, s0, m } = *self;
        let (sin1, c1) = (h0 + 0.5 * gap).sin_cos();
        let s1 = m.sqrt().hypot(s * sin1);
        // cos h0 - cos h1 = 2 sin(h0 + gap / 4) sin(gap / 4), with the tiny
        // factors kept apart so their product cannot underflow
        let sin_d = (0.25 * gap).sin() * (2.0 * s * (h0 + 0.25 * gap).sin() * (c0 * s * s * (c0 + c1) / (s0 + s1) + s0));
        let cos_d = s * s * c0 * c1 + s0 * s1;
        (2.0 * sin_d.atan2(cos_d), sin1.abs() * s / s1)
    }
}

/// New offset of the hull-image edge at offset `edge` from the driving point.
#[inline]
fn radial_edge(edge: f64, dt: f64) -> f64 {
    let s = (-0.5 * dt).exp();
    let h = 0.5 * edge;
    let sh = (-(-dt).exp_m1() + s * s * h.sin().powi(2)).sqrt();
    2.0 * sh.atan2(h.cos() * s)
}

/// Points left of the hull image occupy `0..lo`, points right of it
/// `hi..n`; `gap` is the distance from the image of a point to the nearest
/// edge of the hull image. The image spans `[u - left, u + right]` around the
/// driving point `u`.
struct Chordal {
    gap: Vec<f64>,
    dg: Vec<f64>,
    best: Vec<f64>,
    lo: usize,
    hi: usize,
    left: f64,
    right: f64,
}

impl Chordal {
    /// Edge offsets from the new driving point and the lengths swept past
    /// the old edges, right side first.
    #[inline]
    fn sides(&self, inc: f64) -> [(f64, f64); 2] {
        [
            ((self.right - inc).max(0.0), (inc - self.right).max(0.0)),
            ((self.left + inc).max(0.0), (-inc - self.left).max(0.0)),
        ]
    }
}

impl FlowState for Chordal {
    fn done(&self) -> bool {
        self.lo == 0 && self.hi == self.gap.len()
    }

    fn delta(&self, a: f64, b: f64) -> f64 {
        b - a
    }

    fn needs_refine(&self, inc: f64, width: f64, opts: &FlowOptions) -> bool {
        let reach = opts.refine_ratio * width;
        let unresolved = |i: usize| self.best[i] > opts.floor && width > 0.5 * opts.floor * self.dg[i];
        // alive points within reach of the driving point, nearest first
        let [(edge_r, shift_r), (edge_l, shift_l)] = self.sides(inc);
        (self.hi..self.gap.len())
            .take_while(|&i| edge_r + self.gap[i] - shift_r < reach)
            .any(unresolved)
            || (0..self.lo)
                .rev()
                .take_while(|&i| edge_l + self.gap[i] - shift_l < reach)
                .any(unresolved)
    }

    fn apply(&mut self, dt: f64, inc: f64, blind: Option<Blind>) {
        let [(edge_r, shift_r), (edge_l, shift_l)] = self.sides(inc);
        while self.hi < self.gap.len() && self.gap[self.hi] - shift_r < MIN_GAP {
            self.hi += 1;
        }
        while self.lo > 0 && self.gap[self.lo - 1] - shift_l < MIN_GAP {
            self.lo -= 1;
        }
        let a = 2.0 * dt.sqrt();
        self.right = edge_r.hypot(a);
        self.left = edge_l.hypot(a);
        let n = self.gap.len();
        for i in (0..self.lo).chain(self.hi..n) {
            let (edge, shift) = if i < self.lo { (edge_l, shift_l) } else { (edge_r, shift_r) };
            let g0 = self.gap[i] - shift;
            let hidden = Blind::hides(blind, edge + g0, self.dg[i]);
            let (g, d) = chordal_gap(edge, g0, dt);
            self.gap[i] = g;
            self.dg[i] *= d;
            let ups = g / self.dg[i];
            if ups < self.best[i] && !hidden {
                self.best[i] = ups;
            }
        }
    }
}

/// Minimum conformal distance `min_t Y_t(x)` from the chordal trace to each
/// real boundary point `x`, over the horizon of the driving function.
pub fn chordal_boundary_distances(
    driving: &DrivingFunction,
    points: &[f64],
    opts: &FlowOptions,
) -> Result<Vec<f64>> {
    if driving.kind != LoewnerKind::Chordal {
        return Err(param("driving", "expected a chordal driving function"));
    }
    let w0 = driving.values[0];
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| points[a].total_cmp(&points[b]));
    let x: Vec<f64> = order.iter().map(|&i| points[i]).collect();
    let gap: Vec<f64> = x.iter().map(|p| (p - w0).abs()).collect();
    let mut state = Chordal {
        lo: x.partition_point(|&p| p < w0),
        hi: x.partition_point(|&p| p <= w0),
        dg: vec![1.0; x.len()],
        best: gap.clone(),
        gap,
        left: 0.0,
        right: 0.0,
    };
    Driver { kappa: driving.kappa, opts }.run(driving, &mut state);
    let mut out = vec![0.0; points.len()];
    for (slot, &i) in order.iter().enumerate() {
        out[i] = state.best[slot];
    }
    Ok(out)
}

#[inline]
fn ccw(from: f64, to: f64) -> f64 {
    (to - from).rem_euclid(TAU)
}

/// The alive arc runs counterclockwise from `start` for `len` radians; the
/// rest of the circle is the hull image. Alive points occupy `lo..hi`, with
/// their gaps to the start and to the end of the arc.
struct Radial {
    to_start: Vec<f64>,
    to_end: Vec<f64>,
    dg: Vec<f64>,
    best: Vec<f64>,
    lo: usize,
    hi: usize,
    /// Offsets of the arc ends from the driving point, counterclockwise to
    /// the start and clockwise to the end.
    start: f64,
    end: f64,
    len: f64,
}

/// Where a step leaves the driving relative to the alive arc.
struct Cut {
    /// Arc length removed at the start and at the end.
    at_start: f64,
    at_end: f64,
    /// Offsets of the arc ends from the new driving point.
    edge_start: f64,
    edge_end: f64,
}

impl Radial {
    /// A driving angle that lands inside the alive arc has swept it from
    /// the end it entered by: the start when moving counterclockwise.
    fn cut(&self, inc: f64) -> Cut {
        let (edge_start, edge_end) = ((self.start - inc).max(0.0), (self.end + inc).max(0.0));
        Cut { at_start: (inc - self.start).max(0.0), at_end: (-inc - self.end).max(0.0), edge_start, edge_end }
    }
}

impl FlowState for Radial {
    fn done(&self) -> bool {
        self.lo >= self.hi || self.len <= 0.0
    }

    fn delta(&self, a: f64, b: f64) -> f64 {
        slit::wrap_angle(b - a)
    }

    fn needs_refine(&self, inc: f64, width: f64, opts: &FlowOptions) -> bool {
        let reach = opts.refine_ratio * width;
        let c = self.cut(inc);
        let unresolved = |i: usize| self.best[i] > opts.floor && width > 0.5 * opts.floor * self.dg[i];
        (self.lo..self.hi)
            .take_while(|&i| c.edge_start + self.to_start[i] - c.at_start < reach)
            .any(unresolved)
            || (self.lo..self.hi)
                .rev()
                .take_while(|&i| c.edge_end + self.to_end[i] - c.at_end < reach)
                .any(unresolved)
    }

    fn apply(&mut self, dt: f64, inc: f64, blind: Option<Blind>) {
        let c = self.cut(inc);
        if self.len - c.at_start - c.at_end < MIN_GAP {
            self.lo = self.hi;
            return;
        }
        while self.lo < self.hi && self.to_start[self.lo] - c.at_start < MIN_GAP {
            self.lo += 1;
        }
        while self.lo < self.hi && self.to_end[self.hi - 1] - c.at_end < MIN_GAP {
            self.hi -= 1;
        }
        let (at_start, at_end) = (RadialEdge::new(c.edge_start, dt), RadialEdge::new(c.edge_end, dt));
        // only offsets small next to 2 pi are accurate, so flow each length
        // from the side nearer the driving point and derive the rest
        let len0 = self.len - c.at_start - c.at_end;
        let len = if c.edge_start <= c.edge_end { at_start.gap(len0).0 } else { at_end.gap(len0).0 };
        self.len = len;
        self.start = radial_edge(c.edge_start, dt);
        self.end = radial_edge(c.edge_end, dt);
        for i in self.lo..self.hi {
            let (gs0, ge0) = (self.to_start[i] - c.at_start, self.to_end[i] - c.at_end);
            let hidden = Blind::hides(blind, (c.edge_start + gs0).min(c.edge_end + ge0), self.dg[i]);
            let deriv = if c.edge_start + gs0 <= c.edge_end + ge0 {
                let (gs, d) = at_start.gap(gs0);
                (self.to_start[i], self.to_end[i]) = (gs, len - gs);
                d
            } else {
                let (ge, d) = at_end.gap(ge0);
                (self.to_start[i], self.to_end[i]) = (len - ge, ge);
                d
            };
            self.dg[i] *= deriv;
            let ups = 2.0 * (0.5 * self.to_start[i].min(self.to_end[i])).sin() / self.dg[i];
            if ups < self.best[i] && !hidden {
                self.best[i] = ups;
            }
        }
    }
}

/// Minimum conformal distance from the radial trace to each boundary point
/// `e^{i angle}` of the unit disk, over the horizon of the driving function.
pub fn radial_boundary_distances(
    driving: &DrivingFunction,
    angles: &[f64],
    opts: &FlowOptions,
) -> Result<Vec<f64>> {
    if driving.kind != LoewnerKind::Radial {
        return Err(param("driving", "expected a radial driving function"));
    }
    let theta0 = driving.values[0];
    let offsets: Vec<f64> = angles.iter().map(|&a| ccw(theta0, a)).collect();
    let mut order: Vec<usize> = (0..angles.len()).collect();
    order.sort_by(|&a, &b| offsets[a].total_cmp(&offsets[b]));
    let to_start: Vec<f64> = order.iter().map(|&i| offsets[i]).collect();
    let best: Vec<f64> = to_start.iter().map(|&o| 2.0 * (0.5 * o).sin().abs()).collect();
    let mut state = Radial {
        to_end: to_start.iter().map(|&o| TAU - o).collect(),
        dg: vec![1.0; angles.len()],
        lo: to_start.iter().take_while(|&&o| o == 0.0).count(),
        hi: angles.len(),
        to_start,
        best,
        start: 0.0,
        end: 0.0,
        len: TAU,
    };
    Driver { kappa: driving.kappa, opts }.run(driving, &mut state);
    let mut out = vec![0.0; angles.len()];
    for (slot, &i) in order.iter().enumerate() {
        out[i] = state.best[slot];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::super::driving::{sample_driving, sample_radial_driving};
    use super::super::trace::{chordal_trace, radial_trace, uniform_grid};
    use super::*;

    #[test]
    fn chordal_zero_kappa_distance_is_exact() {
        // W = 0: g_t(x) = sqrt(x^2 + 4t), hull image [-2 sqrt t, 2 sqrt t], and
        // Y_t(x) = (sqrt(x^2 + 4t) - 2 sqrt t) sqrt(x^2 + 4t) / |x| decreases in t
        let d = sample_driving(0.0, 1.0, 200, 0).unwrap();
        let xs = [-0.5, 0.3, 1.0];
        let best = chordal_boundary_distances(&d, &xs, &FlowOptions::default()).unwrap();
        for (x, b) in xs.iter().zip(&best) {
            let s = (x * x + 4.0f64).sqrt();
            let exact = (s - 2.0) * s / x.abs();
            assert!((b - exact).abs() < 1e-12, "{x}: {b} vs {exact}");
        }
    }

    fn polyline_distance(pts: &[num_complex::Complex64], x: num_complex::Complex64) -> f64 {
        pts.windows(2)
            .map(|w| crate::conformal::segment_distance(x, w[0], w[1]))
            .fold(f64::INFINITY, f64::min)
    }

    // Without bridge refinement the flow and the trace describe the same
    // discrete chain; slack covers the piecewise-constant driving.
    #[test]
    fn chordal_distances_within_koebe_factor() {
        let steps = 2000;
        let slack = 2.0 * (1.0 / steps as f64).sqrt();
        for (kappa, lower) in [(2.5, true), (6.0, true)] {
            for seed in 0..3 {
                let d = sample_driving(kappa, 1.0, steps, seed).unwrap();
                let xs: Vec<f64> = (-6..=6).filter(|&i| i != 0).map(|i| 0.2 * i as f64).collect();
                let opts = FlowOptions { max_depth: 0, ..Default::default() };
                let ups = chordal_boundary_distances(&d, &xs, &opts).unwrap();
                let tr = chordal_trace(&d, &uniform_grid(1.0, 4 * steps)).unwrap();
                for (x, u) in xs.iter().zip(&ups) {
                    let dist = polyline_distance(&tr.points, (*x).into());
                    assert!(*u <= 4.0 * dist + slack, "kappa {kappa} seed {seed} x {x}: {u} vs {dist}");
                    if lower {
                        assert!(*u >= dist / 4.0 - slack, "kappa {kappa} seed {seed} x {x}: {u} vs {dist}");
                    }
                }
            }
        }
    }

    #[test]
    fn radial_distances_within_koebe_factor() {
        let steps = 2000;
        let slack = 2.0 * (1.0 / steps as f64).sqrt();
        for (kappa, seed) in [(2.5, 0), (2.5, 1), (2.5, 2), (6.0, 3), (6.0, 4), (6.0, 5), (6.0, 6)] {
            let horizon: f64 = if kappa > 4.0 { 4.0 } else { 1.0 };
            let slack = slack * horizon.sqrt();
            let d = sample_radial_driving(kappa, horizon, steps, seed, 0.0).unwrap();
            let angles: Vec<f64> = (1..12).map(|i| i as f64 * TAU / 12.0).collect();
            let opts = FlowOptions { max_depth: 0, ..Default::default() };
            let ups = radial_boundary_distances(&d, &angles, &opts).unwrap();
            let tr = radial_trace(&d, &uniform_grid(horizon, 4 * steps)).unwrap();
            for (a, u) in angles.iter().zip(&ups) {
                let dist = polyline_distance(&tr.points, num_complex::Complex64::from_polar(1.0, *a));
                assert!(*u <= 4.0 * dist + slack && *u >= dist / 4.0 - slack, "kappa {kappa} seed {seed} a {a}: {u} vs {dist}");
            }
        }
    }

    #[test]
    fn refined_flow_is_deterministic() {
        let d = sample_driving(6.0, 1.0, 500, 7).unwrap();
        let xs: Vec<f64> = (1..=10).map(|i| 0.15 * i as f64).collect();
        let coarse = chordal_boundary_distances(&d, &xs, &FlowOptions { max_depth: 0, ..Default::default() }).unwrap();
        let fine = chordal_boundary_distances(&d, &xs, &FlowOptions::default()).unwrap();
        for (c, f) in coarse.iter().zip(&fine) {
            assert!(f.is_finite() && *f >= 0.0 && *c >= 0.0);
        }
        let again = chordal_boundary_distances(&d, &xs, &FlowOptions::default()).unwrap();
        assert_eq!(fine, again);
    }

    #[test]
    fn start_point_distance_is_zero() {
        let d = sample_radial_driving(6.0, 0.5, 100, 1, 0.0).unwrap();
        let out = radial_boundary_distances(&d, &[0.0, 1.0], &FlowOptions::default()).unwrap();
        assert_eq!(out[0], 0.0);
        assert!(out[1] > 0.0 && out[1] <= 2.0 * 0.5f64.sin() + 1e-12);
    }
}
