//! Geodesic zipper: a numerical Riemann map from the unit disk onto the
//! interior of a polygonal Jordan curve.
//!
//! The forward map sends the domain to the upper half plane:
//!
//! 1. `z -> i sqrt((z - v1) / (z - v0))` opens the curve at the edge `v0 v1`
//!    (`v1 -> 0`, `v0 -> inf`).
//! 2. For each further vertex with current image `c`, the arc of the circle
//!    through 0 and `c` orthogonal to the real line is unzipped by
//!    `z -> sqrt(T(z)^2 + h^2) / h`, `T(z) = z / (1 - z Re c / |c|^2)`,
//!    `h = |c|^2 / Im c`, which sends `c` to 0. Dividing by `h` keeps the
//!    point cloud at unit scale.
//! 3. The closing edge is then an arc from 0 to the image `x` of `v0`;
//!    `z -> z / (1 - z / x)` sends it to a curve from 0 to infinity, which is
//!    replaced by the ray through the image of its midpoint, and a power map
//!    opens the sector containing the domain onto the half plane.
//!
//! A Cayley transform centred at the image of an interior point finishes the
//! map to the disk. Every step has a closed-form inverse, so evaluation of
//! `f: D -> G` runs the chain backwards.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::koch::JordanCurve;
use super::ConformalMap;
use crate::error::{Error, Result};
use crate::slit;

const I: Complex64 = Complex64::new(0.0, 1.0);

/// One unzipping step, stored by the parameters of `T` and the slit height.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GeodesicStep {
    pub a: f64,
    pub h: f64,
}

impl GeodesicStep {
    fn new(c: Complex64) -> Self {
        let im = c.im.max(1e-14 * c.norm().max(1e-300));
        let n2 = c.re * c.re + im * im;
        Self { a: c.re / n2, h: n2 / im }
    }

    #[inline]
    fn forward(&self, z: Complex64) -> Complex64 {
        let t = z / (1.0 - self.a * z);
        slit::unzip_forward(t, self.h * self.h) / self.h
    }

    /// Image of a real point, with `inf` standing for the point at infinity.
    fn forward_real(&self, x: f64) -> f64 {
        let t = if x.is_infinite() {
            if self.a == 0.0 {
                return x;
            }
            -1.0 / self.a
        } else {
            x / (1.0 - self.a * x)
        };
        if t.is_infinite() {
            return t;
        }
        t.signum() * (t * t + self.h * self.h).sqrt() / self.h
    }

    #[inline]
    fn inverse(&self, w: Complex64) -> (Complex64, Complex64) {
        let u = w * self.h;
        let t = slit::unzip_inverse(u, self.h);
        let dt = if t.norm_sqr() > 0.0 { slit::unzip_inverse_deriv(u, t) } else { Complex64::new(0.0, 0.0) };
        let q = 1.0 + self.a * t;
        (t / q, dt * self.h / (q * q))
    }
}

/// Serializable parameter list of a boundary-fitted map; reloading it
/// reproduces the map exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZipperMap {
    pub v0: Complex64,
    pub v1: Complex64,
    pub steps: Vec<GeodesicStep>,
    /// Image of `v0` after the unzipping steps (`inf` if it stayed there).
    pub tail: f64,
    /// Sector `{sector_start < arg < sector_start + sector_opening}` holding
    /// the domain after the last unzipping step.
    pub sector_start: f64,
    pub sector_opening: f64,
    /// Image in the half plane of the normalization point `f(0)`.
    pub center: Complex64,
    /// Rotation making `f'(0) > 0`.
    pub rotation: f64,
    pub interior_point: Complex64,
    pub vertex_count: usize,
    pub max_edge: f64,
}

impl ZipperMap {
    fn open(&self, z: Complex64) -> Complex64 {
        I * ((z - self.v1) / (z - self.v0)).sqrt()
    }

    fn untail(&self, z: Complex64) -> Complex64 {
        if self.tail.is_infinite() {
            z
        } else {
            z / (1.0 - z / self.tail)
        }
    }

    fn sector(&self, z: Complex64) -> Complex64 {
        let z = self.untail(z);
        let v = z * Complex64::from_polar(1.0, -self.sector_start);
        v.powf(PI / self.sector_opening)
    }

    /// Forward map from the domain to the upper half plane.
    pub fn to_half_plane(&self, z: Complex64) -> Complex64 {
        let mut w = self.open(z);
        for s in &self.steps {
            w = s.forward(w);
        }
        self.sector(w)
    }

    /// Inverse map from the upper half plane to the domain, with derivative.
    pub fn from_half_plane(&self, w: Complex64) -> (Complex64, Complex64) {
        // boundary points must stay on the upper side of the power-map cut
        let w = Complex64::new(w.re, w.im.max(0.0));
        let q = self.sector_opening / PI;
        let p = if w.norm_sqr() > 0.0 { w.powf(q) } else { w };
        let rot = Complex64::from_polar(1.0, self.sector_start);
        let mut z = rot * p;
        let mut d = if w.norm_sqr() > 0.0 { rot * q * p / w } else { Complex64::new(0.0, 0.0) };
        if self.tail.is_finite() {
            let x = self.tail;
            let den = x + z;
            d *= x * x / (den * den);
            z = x * z / den;
            z.im = z.im.max(0.0);
        }
        for s in self.steps.iter().rev() {
            let (z2, dz) = s.inverse(z);
            z = z2;
            d *= dz;
        }
        let u = -(z * z);
        let one_u = 1.0 - u;
        let value = (self.v1 - u * self.v0) / one_u;
        d *= (self.v1 - self.v0) / (one_u * one_u) * (-2.0 * z);
        (value, d)
    }

    /// Preimage `f^{-1}(z)` in the closed disk of a point of the closed domain.
    pub fn to_disk(&self, z: Complex64) -> Complex64 {
        if z == self.v0 {
            // v0 goes to infinity in the half plane
            return Complex64::from_polar(1.0, self.rotation);
        }
        let w = self.to_half_plane(z);
        let c = self.center;
        (w - c) / (w - c.conj()) * Complex64::from_polar(1.0, self.rotation)
    }

    /// `f(xi)` and `f'(xi)` for `xi` in the closed unit disk.
    pub fn jet(&self, xi: Complex64) -> (Complex64, Complex64) {
        let rot = Complex64::from_polar(1.0, -self.rotation);
        let x = xi * rot;
        let c = self.center;
        let den = 1.0 - x;
        let w = (c - c.conj() * x) / den;
        let dw = (c - c.conj()) / (den * den) * rot;
        let (z, dz) = self.from_half_plane(w);
        (z, dz * dw)
    }
}

/// Numerical Riemann map from the disk onto the interior of `curve`, with
/// `f(0)` at the vertex centroid and `f'(0) > 0`. Resolution is the vertex
/// count; subdivide the curve for a finer map.
pub fn build_boundary_map(curve: &JordanCurve) -> Result<ConformalMap> {
    let n = curve.len();
    if n < 3 {
        return Err(Error::Geometry("curve needs at least 3 vertices".into()));
    }
    if !curve.is_simple() {
        return Err(Error::Geometry("curve is not simple".into()));
    }
    let p0 = curve.centroid();
    if !curve.contains(p0) {
        return Err(Error::Geometry("vertex centroid lies outside the curve".into()));
    }
    let v = &curve.vertices;
    let (v0, v1) = (v[0], v[1]);
    let open = |z: Complex64| I * ((z - v1) / (z - v0)).sqrt();

    // images of the remaining vertices, the closing-edge midpoint and p0
    let mut pts: Vec<Complex64> = v[2..].iter().map(|&z| open(z)).collect();
    let mut mid = open(0.5 * (v[n - 1] + v0));
    let mut inner = open(p0);
    let mut tail = f64::INFINITY;
    let mut steps = Vec::with_capacity(n - 2);
    for k in 0..pts.len() {
        let step = GeodesicStep::new(pts[k]);
        for p in &mut pts[k + 1..] {
            *p = step.forward(*p);
        }
        mid = step.forward(mid);
        inner = step.forward(inner);
        tail = step.forward_real(tail);
        steps.push(step);
    }
    let untail = |z: Complex64| if tail.is_finite() { z / (1.0 - z / tail) } else { z };
    let theta = untail(mid).arg();
    if !(theta > 0.0 && theta < PI) || !inner.im.is_finite() {
        return Err(Error::Numeric(format!(
            "zipper failed to converge: closing-edge image at angle {theta:.3e} after {} steps",
            steps.len()
        )));
    }
    let (sector_start, sector_opening) =
        if untail(inner).arg() < theta { (0.0, theta) } else { (theta, PI - theta) };
    let mut map = ZipperMap {
        v0,
        v1,
        steps,
        tail,
        sector_start,
        sector_opening,
        center: Complex64::new(0.0, 1.0),
        rotation: 0.0,
        interior_point: p0,
        vertex_count: n,
        max_edge: curve.max_edge(),
    };
    let center = map.sector(inner);
    if !(center.im > 0.0) || !center.re.is_finite() {
        return Err(Error::Numeric(format!("interior point mapped to {center}, outside the half plane")));
    }
    map.center = center;
    let (_, d0) = map.jet(Complex64::new(0.0, 0.0));
    map.rotation = d0.arg();
    Ok(ConformalMap::BoundaryFitted(Box::new(map)))
}
