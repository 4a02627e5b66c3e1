use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};

/// Flatness of the standard Koch snowflake (equilateral bumps on the middle
/// third of every segment).
pub const CLASSICAL_FLATNESS: f64 = 0.5;

const MAX_DEPTH: u32 = 8;

/// Closed polygonal Jordan curve; the closing edge from the last vertex back
/// to the first is implicit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JordanCurve {
    pub vertices: Vec<Complex64>,
    pub depth: u32,
    pub flatness: f64,
}

impl JordanCurve {
    pub fn from_vertices(vertices: Vec<Complex64>) -> Result<Self> {
        let mut vertices = vertices;
        if vertices.len() > 1 && vertices.first() == vertices.last() {
            vertices.pop();
        }
        if vertices.len() < 3 {
            return Err(Error::Geometry("a Jordan curve needs at least 3 vertices".into()));
        }
        Ok(Self { vertices, depth: 0, flatness: 0.0 })
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Edges `(v_i, v_{i+1})` including the closing edge.
    pub fn edges(&self) -> impl Iterator<Item = (Complex64, Complex64)> + '_ {
        let n = self.vertices.len();
        (0..n).map(move |i| (self.vertices[i], self.vertices[(i + 1) % n]))
    }

    pub fn max_edge(&self) -> f64 {
        self.edges().map(|(a, b)| (b - a).norm()).fold(0.0, f64::max)
    }

    pub fn centroid(&self) -> Complex64 {
        self.vertices.iter().sum::<Complex64>() / self.vertices.len() as f64
    }

    /// Signed area (positive for counterclockwise curves).
    pub fn signed_area(&self) -> f64 {
        0.5 * self.edges().map(|(a, b)| a.re * b.im - b.re * a.im).sum::<f64>()
    }

    pub fn winding_number(&self, p: Complex64) -> i64 {
        let total: f64 = self.edges().map(|(a, b)| ((b - p) / (a - p)).arg()).sum();
        (total / std::f64::consts::TAU).round() as i64
    }

    pub fn contains(&self, p: Complex64) -> bool {
        self.winding_number(p) != 0
    }

    /// Euclidean distance from `p` to the polyline.
    pub fn distance(&self, p: Complex64) -> f64 {
        self.edges().map(|(a, b)| segment_distance(p, a, b)).fold(f64::INFINITY, f64::min)
    }

    /// Same curve with every edge split into `factor` equal pieces.
    pub fn subdivide(&self, factor: usize) -> Self {
        let mut vertices = Vec::with_capacity(self.len() * factor);
        for (a, b) in self.edges() {
            for j in 0..factor {
                vertices.push(a + (b - a) * (j as f64 / factor as f64));
            }
        }
        Self { vertices, depth: self.depth, flatness: self.flatness }
    }

    /// Checks that no two non-adjacent edges intersect.
    pub fn is_simple(&self) -> bool {
        let n = self.len();
        let edges: Vec<_> = self.edges().collect();
        // sweep over edges sorted by their left end
        let mut order: Vec<usize> = (0..n).collect();
        let lo = |i: usize| edges[i].0.re.min(edges[i].1.re);
        let hi = |i: usize| edges[i].0.re.max(edges[i].1.re);
        order.sort_by(|&a, &b| lo(a).total_cmp(&lo(b)));
        for (pos, &i) in order.iter().enumerate() {
            for &j in &order[pos + 1..] {
                if lo(j) > hi(i) {
                    break;
                }
                let adjacent = (i + 1) % n == j || (j + 1) % n == i || i == j;
                if !adjacent && segments_intersect(edges[i], edges[j]) {
                    return false;
                }
            }
        }
        true
    }
}

pub(crate) fn segment_distance(p: Complex64, a: Complex64, b: Complex64) -> f64 {
    let ab = b - a;
    let len2 = ab.norm_sqr();
    if len2 == 0.0 {
        return (p - a).norm();
    }
    let t = (((p - a) * ab.conj()).re / len2).clamp(0.0, 1.0);
    (p - (a + ab * t)).norm()
}

fn cross(a: Complex64, b: Complex64) -> f64 {
    a.re * b.im - a.im * b.re
}

fn segments_intersect(s: (Complex64, Complex64), t: (Complex64, Complex64)) -> bool {
    let d1 = cross(s.1 - s.0, t.0 - s.0);
    let d2 = cross(s.1 - s.0, t.1 - s.0);
    let d3 = cross(t.1 - t.0, s.0 - t.0);
    let d4 = cross(t.1 - t.0, s.1 - t.0);
    (d1 * d2 < 0.0) && (d3 * d4 < 0.0)
}

/// Koch-type snowflake over the counterclockwise unit-side equilateral
/// triangle centred at the origin.
///
/// Each generation replaces a segment `AB` by four segments through the
/// thirds of `AB` and an outward apex of height `flatness * |AB| / sqrt(3)`
/// over the midpoint. `CLASSICAL_FLATNESS` gives the standard snowflake of
/// dimension `log 4 / log 3`; `flatness -> 0` collapses onto the triangle.
pub fn koch_snowflake(depth: u32, flatness: f64) -> Result<JordanCurve> {
    if depth > MAX_DEPTH {
        return Err(Error::Resource(format!(
            "depth {depth} exceeds the supported maximum {MAX_DEPTH} ({} vertices)",
            3usize << (2 * depth)
        )));
    }
    if !(flatness > 0.0 && flatness < 1.0) {
        return Err(param("flatness", format!("must lie in (0, 1), got {flatness}")));
    }
    let mut vertices: Vec<Complex64> = (0..3)
        .map(|k| Complex64::from_polar(1.0 / 3f64.sqrt(), std::f64::consts::FRAC_PI_2 + k as f64 * 2.0 * std::f64::consts::FRAC_PI_3))
        .collect();
    let outward = Complex64::new(0.0, -1.0);
    let height = flatness / 3f64.sqrt();
    for _ in 0..depth {
        let n = vertices.len();
        let mut next = Vec::with_capacity(4 * n);
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            let ab = b - a;
            let apex = a + ab * 0.5 + outward * ab * height;
            next.extend_from_slice(&[a, a + ab / 3.0, apex, a + ab * (2.0 / 3.0)]);
        }
        vertices = next;
    }
    Ok(JordanCurve { vertices, depth, flatness })
}
