//! Dyadic-square sieves of the unit disk.
//!
//! `Q_{n,k}` is the polar box `1 - 2^-n <= r < 1`,
//! `k 2^-n <= theta / 2pi <= (k + 1) 2^-n`; `T(Q)` is its inner half and
//! `L(Q)` its inner circular segment. A square is bad when the weight
//! integral over `T(Q)` (or `L(Q)`) exceeds `l(Q)^p` (or `l(Q)^{p - delta}`),
//! and the good set is the disk minus the union of bad squares. Since every
//! square reaches out to the unit circle, the good set is star-shaped.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::f64::consts::{PI, TAU};

use crate::conformal::{build_boundary_map, ConformalMap, JordanCurve};
use crate::error::{param, Error, Result};
use crate::stats::{fit_line, LineFit};

/// Radius factor of the boundary-centred disc containing a dyadic square.
pub const COVER_FACTOR: f64 = PI + 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DyadicSquare {
    pub n: u32,
    pub k: u64,
}

impl DyadicSquare {
    pub fn new(n: u32, k: u64) -> Result<Self> {
        if n == 0 || n > 62 || k >= 1u64 << n {
            return Err(param("square", format!("need n >= 1 and k < 2^n, got ({n}, {k})")));
        }
        Ok(Self { n, k })
    }

    /// `l(Q) = 2^-n`.
    pub fn side(&self) -> f64 {
        (-(self.n as f64)).exp2()
    }

    pub fn inner_radius(&self) -> f64 {
        1.0 - self.side()
    }

    /// Outer radius of `T(Q)`.
    pub fn half_radius(&self) -> f64 {
        1.0 - 0.5 * self.side()
    }

    pub fn angles(&self) -> (f64, f64) {
        let w = TAU * self.side();
        (w * self.k as f64, w * (self.k + 1) as f64)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        let r = z.norm();
        r >= self.inner_radius() && r < 1.0 && Self::index_of(z, self.n) == self.k
    }

    /// Angular index at generation `n` of the sector holding `z`.
    pub fn index_of(z: Complex64, n: u32) -> u64 {
        let frac = z.arg().rem_euclid(TAU) / TAU;
        ((frac * (1u64 << n) as f64) as u64).min((1u64 << n) - 1)
    }

    /// Boundary-centred disc `B(e^{2 pi i (k + 1/2) 2^-n}, c 2^-n)` containing `Q`.
    pub fn cover_disc(&self, factor: f64) -> (Complex64, f64) {
        let (a, b) = self.angles();
        (Complex64::from_polar(1.0, 0.5 * (a + b)), factor * self.side())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SieveMode {
    /// `|f'|^2` over `T(Q)`.
    Bounded,
    /// `phi = |f' / max(|f| log |f|, 1)|^2` over `T(Q)`.
    Unbounded,
    /// `|f'|^t` along `L(Q)` with `t = sqrt(1 - p)`, threshold `l(Q)^{p - 5t^2}`.
    Refined,
}

impl SieveMode {
    pub fn name(&self) -> &'static str {
        match self {
            SieveMode::Bounded => "bounded",
            SieveMode::Unbounded => "unbounded",
            SieveMode::Refined => "refined",
        }
    }
}

/// `t = sqrt(1 - p)` and `delta = 5 t^2` of the refined sieve.
pub fn refined_parameters(p: f64) -> (f64, f64) {
    let t = (1.0 - p).sqrt();
    (t, 5.0 * t * t)
}

/// Exponent `1 - 6 sqrt(1 - p)` of the refined Hölder estimate.
pub fn refined_holder_exponent(p: f64) -> f64 {
    1.0 - 6.0 * (1.0 - p).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SieveOptions {
    pub n_max: u32,
    pub quadrature_order: usize,
    /// Upper bound on the number of squares scanned.
    pub max_squares: usize,
}

impl Default for SieveOptions {
    fn default() -> Self {
        Self { n_max: 14, quadrature_order: 16, max_squares: 1_000_000 }
    }
}

const MAX_ORDER: usize = 64;

fn weight(map: &ConformalMap, z: Complex64, mode: SieveMode, t_exp: f64) -> Result<f64> {
    let e = map.eval_checked(z)?;
    let d = e.deriv.norm();
    Ok(match mode {
        SieveMode::Bounded => d * d,
        SieveMode::Unbounded => {
            let m = e.value.norm();
            let s = if m > 1.0 { (m * m.ln()).max(1.0) } else { 1.0 };
            (d / s).powi(2)
        }
        SieveMode::Refined => d.powf(t_exp),
    })
}

fn midpoint_rule(
    map: &ConformalMap,
    sq: &DyadicSquare,
    mode: SieveMode,
    t_exp: f64,
    order: usize,
) -> Result<(f64, f64)> {
    let (a, b) = sq.angles();
    let dth = (b - a) / order as f64;
    let (mut lo, mut hi) = (f64::INFINITY, 0.0f64);
    let mut total = 0.0;
    if mode == SieveMode::Refined {
        let r = sq.inner_radius();
        for j in 0..order {
            let w = weight(map, Complex64::from_polar(r, a + (j as f64 + 0.5) * dth), mode, t_exp)?;
            lo = lo.min(w);
            hi = hi.max(w);
            total += w;
        }
        return Ok((total * r * dth, hi / lo));
    }
    let (r0, r1) = (sq.inner_radius(), sq.half_radius());
    let dr = (r1 - r0) / order as f64;
    for i in 0..order {
        let r = r0 + (i as f64 + 0.5) * dr;
        for j in 0..order {
            let w = weight(map, Complex64::from_polar(r, a + (j as f64 + 0.5) * dth), mode, t_exp)?;
            lo = lo.min(w);
            hi = hi.max(w);
            total += w * r;
        }
    }
    Ok((total * dr * dth, hi / lo))
}

/// Weight integral over `T(Q)` (bounded, unbounded) or `L(Q)` (refined) by
/// the tensor midpoint rule; squares where the weight varies by more than a
/// factor 4 across the nodes are redone at order 64.
pub fn integrate_weight(
    map: &ConformalMap,
    square: &DyadicSquare,
    mode: SieveMode,
    t_exp: f64,
    quadrature_order: usize,
) -> Result<f64> {
    if quadrature_order < 4 {
        return Err(param("quadrature_order", "must be at least 4"));
    }
    let (value, spread) = midpoint_rule(map, square, mode, t_exp, quadrature_order)?;
    if !(spread <= 4.0) && quadrature_order < MAX_ORDER {
        return Ok(midpoint_rule(map, square, mode, t_exp, MAX_ORDER)?.0);
    }
    Ok(value)
}

/// Classified bad squares, content bound and the good-set predicate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SieveResult {
    pub mode: SieveMode,
    pub p: f64,
    #[serde(rename = "N")]
    pub n_min: u32,
    pub n_max: u32,
    pub delta: f64,
    pub t: f64,
    #[serde(with = "pairs")]
    pub bad: Vec<DyadicSquare>,
    /// Weight integral of each bad square, in the order of `bad`.
    pub integrals: Vec<f64>,
    pub content_bound: f64,
    pub quadrature_order: usize,
    #[serde(skip)]
    index: HashSet<DyadicSquare>,
}

mod pairs {
    use super::DyadicSquare;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(v: &[DyadicSquare], s: S) -> Result<S::Ok, S::Error> {
        v.iter().map(|q| (q.n, q.k)).collect::<Vec<_>>().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<DyadicSquare>, D::Error> {
        Ok(Vec::<(u32, u64)>::deserialize(d)?.into_iter().map(|(n, k)| DyadicSquare { n, k }).collect())
    }
}

impl SieveResult {
    /// Threshold exponent: `p`, or `p - delta` in refined mode.
    pub fn threshold_exponent(&self) -> f64 {
        self.p - self.delta
    }

    /// Exponent `e` of the derivative estimate `|f'(z)| <= C (1 - |z|)^-e`.
    pub fn growth_exponent(&self) -> f64 {
        match self.mode {
            SieveMode::Refined => 6.0 * (1.0 - self.p).sqrt(),
            _ => 1.0 - self.p / 2.0,
        }
    }

    pub fn rebuild_index(&mut self) {
        self.index = self.bad.iter().copied().collect();
    }

    /// Membership in the good set `D`.
    pub fn contains(&self, z: Complex64) -> bool {
        let r = z.norm();
        if r >= 1.0 {
            return false;
        }
        if self.index.is_empty() {
            return true;
        }
        for n in self.n_min..=self.n_max {
            if r < 1.0 - (-(n as f64)).exp2() {
                break;
            }
            if self.index.contains(&DyadicSquare { n, k: DyadicSquare::index_of(z, n) }) {
                return false;
            }
        }
        true
    }

    /// Bad squares as boundary-centred discs of radius `factor * l(Q)`.
    pub fn disc_cover(&self, factor: f64) -> Vec<(Complex64, f64)> {
        self.bad.iter().map(|q| q.cover_disc(factor)).collect()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mut r: SieveResult = serde_json::from_str(s)?;
        r.rebuild_index();
        Ok(r)
    }
}

/// Scans generations `n_min..=opts.n_max` and collects the bad squares.
pub fn classify_squares(
    map: &ConformalMap,
    p: f64,
    n_min: u32,
    mode: SieveMode,
    opts: &SieveOptions,
) -> Result<SieveResult> {
    if !(p > 0.0 && p < 1.0) {
        return Err(param("p", format!("must lie in (0, 1), got {p}")));
    }
    if n_min < 1 || n_min > opts.n_max {
        return Err(param("N", format!("need 1 <= N <= n_max = {}, got {n_min}", opts.n_max)));
    }
    if opts.n_max > 40 {
        return Err(Error::Resource(format!("n_max = {} is beyond any square budget", opts.n_max)));
    }
    let total: u64 = (n_min..=opts.n_max).map(|n| 1u64 << n).sum();
    if total > opts.max_squares as u64 {
        return Err(Error::Resource(format!(
            "generations {n_min}..={} hold {total} squares, budget {}",
            opts.n_max, opts.max_squares
        )));
    }
    let (t, delta) = match mode {
        SieveMode::Refined => refined_parameters(p),
        _ => (2.0, 0.0),
    };
    let exponent = p - delta;
    let mut bad = Vec::new();
    let mut integrals = Vec::new();
    for n in n_min..=opts.n_max {
        for k in 0..1u64 << n {
            let q = DyadicSquare { n, k };
            let w = integrate_weight(map, &q, mode, t, opts.quadrature_order)?;
            if w > q.side().powf(exponent) {
                bad.push(q);
                integrals.push(w);
            }
        }
    }
    let content_bound = bad.iter().map(|q| q.side().powf(p)).fold(0.0, |a, b| a + b);
    let mut result = SieveResult {
        mode,
        p,
        n_min,
        n_max: opts.n_max,
        delta,
        t: if mode == SieveMode::Refined { t } else { 0.0 },
        bad,
        integrals,
        content_bound,
        quadrature_order: opts.quadrature_order,
        index: HashSet::new(),
    };
    result.rebuild_index();
    Ok(result)
}

/// `sum r_i^p` over a disc cover; an upper bound for the p-content.
pub fn hausdorff_content(cover: &[(Complex64, f64)], p: f64) -> Result<f64> {
    if !(p >= 0.0) {
        return Err(param("p", "must be non-negative"));
    }
    let mut s = 0.0;
    for &(_, r) in cover {
        if !(r > 0.0) {
            return Err(param("radius", format!("must be positive, got {r}")));
        }
        s += r.powf(p);
    }
    Ok(s)
}

/// Random point of the good set, log-uniform in the distance to the circle.
fn sample_good(sieve: &SieveResult, rng: &mut ChaCha8Rng) -> Complex64 {
    let depth = sieve.n_max as f64 + 2.0;
    loop {
        let u: f64 = rng.random::<f64>() * depth;
        let z = Complex64::from_polar(1.0 - (-u).exp2(), TAU * rng.random::<f64>());
        if sieve.contains(z) {
            return z;
        }
    }
}

/// `max |f'(z)| (1 - |z|)^e` over `z = 0` and `samples` random points of the
/// good set, with `e` the growth exponent of the sieve.
pub fn verify_derivative_bound(map: &ConformalMap, sieve: &SieveResult, samples: usize, seed: u64) -> Result<f64> {
    let e = sieve.growth_exponent();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut best = map.deriv(Complex64::new(0.0, 0.0))?.norm();
    for _ in 0..samples {
        let z = sample_good(sieve, &mut rng);
        best = best.max(map.deriv(z)?.norm() * (1.0 - z.norm()).powf(e));
    }
    Ok(best)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HolderReport {
    pub exponent: f64,
    pub constant: f64,
    pub worst: (Complex64, Complex64),
    pub pairs: usize,
}

/// `max |f(z) - f(z')| / |z - z'|^exponent` over random pairs of the good
/// set: half drawn independently, half at random short separations.
pub fn verify_holder(
    map: &ConformalMap,
    sieve: &SieveResult,
    exponent: f64,
    pairs: usize,
    seed: u64,
) -> Result<HolderReport> {
    if !(exponent > 0.0 && exponent <= 1.0) {
        return Err(param(
            "exponent",
            format!("must lie in (0, 1], got {exponent}; the refined estimate needs p > 35/36"),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let depth = sieve.n_max as f64 + 2.0;
    let mut report = HolderReport {
        exponent,
        constant: 0.0,
        worst: (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0)),
        pairs,
    };
    let mut done = 0;
    while done < pairs {
        let z = sample_good(sieve, &mut rng);
        let w = if done % 2 == 0 {
            sample_good(sieve, &mut rng)
        } else {
            let s = (-rng.random::<f64>() * depth).exp2();
            z + Complex64::from_polar(s, TAU * rng.random::<f64>())
        };
        if w == z || !sieve.contains(w) {
            continue;
        }
        done += 1;
        let ratio = (map.eval(z)? - map.eval(w)?).norm() / (z - w).norm().powf(exponent);
        if ratio > report.constant {
            report.constant = ratio;
            report.worst = (z, w);
        }
    }
    Ok(report)
}

/// Removed triangle `T(x, r)`: bounded by the arc of the unit circle inside
/// `B(x, 2r)` and the two segments from its ends to `(1 - 2r) x`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Triangle {
    pub center: Complex64,
    pub radius: f64,
}

impl Triangle {
    pub fn new(center: Complex64, radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius < 0.5) {
            return Err(param("radius", format!("triangle radius must lie in (0, 1/2), got {radius}")));
        }
        Ok(Self { center: center / center.norm(), radius })
    }

    pub fn apex(&self) -> Complex64 {
        self.center * (1.0 - 2.0 * self.radius)
    }

    /// Half angle of the arc `B(x, 2r) ∩ ∂D`.
    pub fn half_angle(&self) -> f64 {
        2.0 * self.radius.min(1.0).asin()
    }

    pub fn corners(&self) -> [Complex64; 3] {
        let h = self.half_angle();
        let x = self.center.arg();
        [Complex64::from_polar(1.0, x - h), self.apex(), Complex64::from_polar(1.0, x + h)]
    }

    /// Radius at which the ray at angle `psi` enters the triangle, if it does.
    fn entry(&self, psi: f64) -> Option<f64> {
        let off = crate::slit::wrap_angle(psi - self.center.arg());
        let h = self.half_angle();
        if off.abs() >= h {
            return None;
        }
        // the side from the apex to the arc end on the same side as the ray
        let [a, apex, b] = self.corners();
        let end = if off < 0.0 { a } else { b };
        let dir = Complex64::from_polar(1.0, psi);
        // solve s * dir = apex + u (end - apex)
        let e = end - apex;
        let det = dir.re * (-e.im) - dir.im * (-e.re);
        let s = (apex.re * (-e.im) - apex.im * (-e.re)) / det;
        Some(s.clamp(0.0, 1.0))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JohnOptions {
    /// Number of random straight crosscuts.
    pub chords: usize,
    /// Flood-fill grid cells per unit length.
    pub grid: usize,
    /// Boundary vertices of the polygon used for the Hölder regression.
    pub vertices: usize,
    pub seed: u64,
}

impl Default for JohnOptions {
    fn default() -> Self {
        Self { chords: 1000, grid: 100, vertices: 768, seed: 0 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JohnDomainReport {
    pub triangles: Vec<Triangle>,
    /// Largest probed ratio `min(diam of the two sides) / diam(crosscut)`;
    /// a lower estimate of the John constant.
    pub john_constant_estimate: f64,
    pub holder_exponent_estimate: f64,
    pub holder_fit: LineFit,
    pub chords_used: usize,
}

/// The star-shaped domain `D_eps = D \ ∪ T(x_i, r_i)`, described by its
/// radial function.
#[derive(Debug, Clone)]
pub struct JohnDomain {
    pub triangles: Vec<Triangle>,
}

impl JohnDomain {
    pub fn new(triangles: Vec<Triangle>) -> Result<Self> {
        // the union of arcs must leave part of the circle uncovered
        let mut arcs: Vec<(f64, f64)> = triangles
            .iter()
            .map(|t| {
                let c = t.center.arg().rem_euclid(TAU);
                (c - t.half_angle(), c + t.half_angle())
            })
            .collect();
        arcs.sort_by(|a, b| a.0.total_cmp(&b.0));
        if let Some(&(first, _)) = arcs.first() {
            let mut reach = first;
            for &(a, b) in &arcs {
                if a > reach {
                    break;
                }
                reach = reach.max(b);
            }
            if reach >= first + TAU {
                return Err(Error::Geometry("removed triangles cover the whole circle".into()));
            }
        }
        Ok(Self { triangles })
    }

    pub fn radial(&self, psi: f64) -> f64 {
        self.triangles.iter().filter_map(|t| t.entry(psi)).fold(1.0, f64::min)
    }

    pub fn contains(&self, z: Complex64) -> bool {
        z.norm() < self.radial(z.arg())
    }

    /// Boundary polygon: radial samples plus every triangle corner.
    pub fn polygon(&self, samples: usize) -> Result<JordanCurve> {
        let mut angles: Vec<f64> = (0..samples).map(|j| TAU * j as f64 / samples as f64).collect();
        for t in &self.triangles {
            for c in t.corners() {
                angles.push(c.arg().rem_euclid(TAU));
            }
        }
        angles.sort_by(f64::total_cmp);
        angles.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
        let pts = angles.iter().map(|&a| Complex64::from_polar(self.radial(a), a)).collect();
        JordanCurve::from_vertices(pts)
    }
}

fn flood_components(mask: &[bool], g: usize) -> Vec<Vec<usize>> {
    let mut seen = vec![false; mask.len()];
    let mut comps = Vec::new();
    let mut stack = Vec::new();
    for s in 0..mask.len() {
        if !mask[s] || seen[s] {
            continue;
        }
        let mut comp = Vec::new();
        seen[s] = true;
        stack.push(s);
        while let Some(c) = stack.pop() {
            comp.push(c);
            let (i, j) = (c / g, c % g);
            let mut push = |n: usize| {
                if mask[n] && !seen[n] {
                    seen[n] = true;
                    stack.push(n);
                }
            };
            if i > 0 {
                push(c - g);
            }
            if i + 1 < g {
                push(c + g);
            }
            if j > 0 {
                push(c - 1);
            }
            if j + 1 < g {
                push(c + 1);
            }
        }
        comps.push(comp);
    }
    comps
}

/// Diameter estimate of a set of grid cells: widths along 32 directions,
/// taken over the leftmost and rightmost cell of every row.
fn cell_diameter(cells: &[usize], g: usize, cell: impl Fn(usize) -> Complex64) -> f64 {
    let mut rows = vec![(usize::MAX, 0usize); g];
    for &c in cells {
        let (i, j) = (c / g, c % g);
        rows[i] = (rows[i].0.min(j), rows[i].1.max(j));
    }
    let extremes: Vec<Complex64> = rows
        .iter()
        .enumerate()
        .filter(|(_, r)| r.0 != usize::MAX)
        .flat_map(|(i, r)| [cell(i * g + r.0), cell(i * g + r.1)])
        .collect();
    (0..32)
        .map(|k| {
            let d = Complex64::from_polar(1.0, PI * k as f64 / 32.0);
            let (lo, hi) = extremes
                .iter()
                .map(|p| (p * d.conj()).re)
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            hi - lo
        })
        .fold(0.0, f64::max)
}

/// Probe estimate of the John constant by straight crosscuts between random
/// boundary points, split on a grid by flood fill.
pub fn probe_john_constant(domain: &JohnDomain, chords: usize, grid: usize, seed: u64) -> (f64, usize) {
    let g = 2 * grid;
    let h = 2.0 / g as f64;
    let cell = |c: usize| Complex64::new(-1.0 + h * ((c % g) as f64 + 0.5), -1.0 + h * ((c / g) as f64 + 0.5));
    let inside: Vec<bool> = (0..g * g).map(|c| domain.contains(cell(c))).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let (mut worst, mut used) = (0.0f64, 0);
    for j in 0..chords {
        let a1 = TAU * rng.random::<f64>();
        let a2 = if j % 2 == 0 {
            TAU * rng.random::<f64>()
        } else {
            a1 + (if rng.random::<bool>() { 1.0 } else { -1.0 }) * (-rng.random::<f64>() * 8.0).exp2()
        };
        let p = Complex64::from_polar(domain.radial(a1), a1);
        let q = Complex64::from_polar(domain.radial(a2), a2);
        let len = (q - p).norm();
        if len < 4.0 * h {
            continue;
        }
        // the open chord must lie in the domain
        let m = (len / (0.25 * h)).ceil() as usize;
        if !(1..m).all(|i| domain.contains(p + (q - p) * (i as f64 / m as f64))) {
            continue;
        }
        let mut mask = inside.clone();
        for i in 0..=4 * m {
            let z = p + (q - p) * (i as f64 / (4 * m) as f64);
            let (ci, cj) = (((z.im + 1.0) / h).floor(), ((z.re + 1.0) / h).floor());
            for di in -1..=1i64 {
                for dj in -1..=1i64 {
                    let (ii, jj) = (ci as i64 + di, cj as i64 + dj);
                    if ii >= 0 && jj >= 0 && (ii as usize) < g && (jj as usize) < g {
                        let c = ii as usize * g + jj as usize;
                        let centre = cell(c);
                        if crate::conformal::segment_distance(centre, p, q) < 0.75 * h {
                            mask[c] = false;
                        }
                    }
                }
            }
        }
        let mut diams: Vec<f64> = flood_components(&mask, g)
            .into_iter()
            .filter(|c| c.len() > 1)
            .map(|c| cell_diameter(&c, g, cell))
            .collect();
        if diams.len() < 2 {
            continue;
        }
        diams.sort_by(|a, b| b.total_cmp(a));
        used += 1;
        worst = worst.max((diams[1] + h) / len);
    }
    (worst.max(1.0), used)
}

/// Regression exponent of the boundary modulus of continuity
/// `max_theta |f(e^{i(theta + s)}) - f(e^{i theta})|` against `s`.
pub fn boundary_holder_exponent(map: &ConformalMap, scales: &[f64], samples: usize) -> Result<LineFit> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    let pts: Vec<Complex64> = (0..samples)
        .map(|j| map.eval(Complex64::from_polar(1.0, TAU * j as f64 / samples as f64)))
        .collect::<Result<_>>()?;
    for &s in scales {
        let mut osc = 0.0f64;
        for (j, &w) in pts.iter().enumerate() {
            let th = TAU * j as f64 / samples as f64;
            osc = osc.max((map.eval(Complex64::from_polar(1.0, th + s))? - w).norm());
        }
        xs.push(s.ln());
        ys.push(osc.ln());
    }
    Ok(fit_line(&xs, &ys))
}

/// Dyadic scales used for the boundary Hölder regression.
pub fn holder_scales() -> Vec<f64> {
    (2..=6).map(|j| (-(j as f64)).exp2()).collect()
}

/// John-domain report for `D \ ∪ T(x_i, r_i)`.
pub fn john_domain_report(triangles: Vec<Triangle>, opts: &JohnOptions) -> Result<JohnDomainReport> {
    let domain = JohnDomain::new(triangles)?;
    let (m, used) = probe_john_constant(&domain, opts.chords, opts.grid, opts.seed);
    let map = build_boundary_map(&domain.polygon(opts.vertices)?)?;
    let fit = boundary_holder_exponent(&map, &holder_scales(), 256)?;
    Ok(JohnDomainReport {
        triangles: domain.triangles,
        john_constant_estimate: m,
        holder_exponent_estimate: fit.slope,
        holder_fit: fit,
        chords_used: used,
    })
}

/// Triangles `T(x, r)` from the boundary-centred disc cover of the bad set,
/// `r = (pi + 1) 2^-n`.
pub fn sieve_triangles(sieve: &SieveResult) -> Result<Vec<Triangle>> {
    sieve
        .bad
        .iter()
        .map(|q| {
            let (x, r) = q.cover_disc(COVER_FACTOR);
            if r >= 0.5 {
                return Err(Error::Geometry(format!(
                    "bad square at generation {} gives a triangle of radius {r:.3} >= 1/2",
                    q.n
                )));
            }
            Triangle::new(x, r)
        })
        .collect()
}

pub fn build_john_domain(sieve: &SieveResult, opts: &JohnOptions) -> Result<JohnDomainReport> {
    john_domain_report(sieve_triangles(sieve)?, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn square_geometry() {
        let q = DyadicSquare::new(2, 1).unwrap();
        assert_eq!(q.side(), 0.25);
        assert!(q.contains(Complex64::from_polar(0.8, 2.0)));
        assert!(!q.contains(Complex64::from_polar(0.7, 2.0)));
        assert!(!q.contains(Complex64::from_polar(0.8, 0.5)));
        assert!(DyadicSquare::new(2, 4).is_err());
    }

    #[test]
    fn identity_area_and_length() {
        let id = ConformalMap::identity();
        let q = DyadicSquare::new(2, 0).unwrap();
        let area = integrate_weight(&id, &q, SieveMode::Bounded, 2.0, 16).unwrap();
        let exact = 0.5 * (0.875f64.powi(2) - 0.75f64.powi(2)) * (TAU / 4.0);
        assert!((area - exact).abs() < 1e-12);
        for n in [1u32, 3, 7] {
            let q = DyadicSquare::new(n, 1).unwrap();
            let len = integrate_weight(&id, &q, SieveMode::Refined, 0.37, 16).unwrap();
            let exact = TAU * q.inner_radius() * q.side();
            assert!((len - exact).abs() < 1e-12);
        }
    }

    #[test]
    fn membership_and_json() {
        let mob = ConformalMap::mobius(c(0.97, 0.0), 0.0).unwrap();
        let s = classify_squares(&mob, 1.0 / 3.0, 2, SieveMode::Bounded, &SieveOptions { n_max: 8, ..Default::default() })
            .unwrap();
        assert!(!s.bad.is_empty());
        for q in &s.bad {
            let (a, b) = q.angles();
            let z = Complex64::from_polar(0.5 * (q.inner_radius() + 1.0), 0.5 * (a + b));
            assert!(!s.contains(z));
        }
        let back = SieveResult::from_json(&s.to_json().unwrap()).unwrap();
        assert_eq!(back.bad, s.bad);
        assert!(back.contains(c(0.0, 0.0)) && !back.contains(c(0.999, 0.0)));
        let v: serde_json::Value = serde_json::from_str(&s.to_json().unwrap()).unwrap();
        assert!(v["bad"][0].is_array() && v["N"] == 2);
    }

    #[test]
    fn triangle_entry_matches_polygon() {
        let t = Triangle::new(c(1.0, 0.0), 0.125).unwrap();
        let d = JohnDomain::new(vec![t]).unwrap();
        assert!((d.radial(0.0) - 0.75).abs() < 1e-12);
        assert_eq!(d.radial(PI), 1.0);
        let [a, apex, _] = t.corners();
        let mid = 0.5 * (a + apex);
        assert!((d.radial(mid.arg()) - mid.norm()).abs() < 1e-12);
        assert!(matches!(
            JohnDomain::new((0..8).map(|k| Triangle::new(Complex64::from_polar(1.0, k as f64 * TAU / 8.0), 0.45).unwrap()).collect()),
            Err(Error::Geometry(_))
        ));
    }

    #[test]
    fn refined_exponents() {
        let (t, delta) = refined_parameters(0.99);
        assert!((t - 0.1).abs() < 1e-12 && (delta - 0.05).abs() < 1e-12);
        assert!((refined_holder_exponent(0.99) - 0.4).abs() < 1e-12);
    }
}
