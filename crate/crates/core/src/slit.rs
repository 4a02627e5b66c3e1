//! Elementary slit maps shared by the Loewner solver and the zipper.
//!
//! Chordal: the vertical slit `[u, u + i a]` in the upper half plane with
//! `a = 2 sqrt(dt)` is removed by `g(z) = u + sqrt((z - u)^2 + a^2)`, which
//! has half-plane capacity `2 dt`.
//!
//! Radial: the radial slit `[x, 1]` in the unit disk is removed by
//! `G = K^{-1}(c K(z))` with `K(z) = z / (1 + z)^2` and `c = e^{dt}`, so that
//! `G(0) = 0` and `G'(0) = e^{dt}`.

use num_complex::Complex64;

/// Clamp a point into the closed upper half plane, turning `-0.0` into `+0.0`
/// so principal square roots of negative reals land on `+i`.
#[inline]
fn upper(z: Complex64) -> Complex64 {
    Complex64::new(z.re, if z.im > 0.0 { z.im } else { 0.0 })
}

/// `sqrt(w^2 - a^2)` with the branch mapping the closed upper half plane onto
/// the upper half plane minus `[0, i a]`.
#[inline]
pub fn unzip_inverse(w: Complex64, a: f64) -> Complex64 {
    let w = upper(w);
    let r = upper(w - a).sqrt() * upper(w + a).sqrt();
    if r.im < 0.0 {
        Complex64::new(r.re, 0.0)
    } else {
        r
    }
}

/// Derivative of [`unzip_inverse`] with respect to `w`.
#[inline]
pub fn unzip_inverse_deriv(w: Complex64, value: Complex64) -> Complex64 {
    w / value
}

/// `sqrt(z^2 + a^2)` mapping the upper half plane minus `[0, i a]` onto the
/// upper half plane; `a2` is `a^2`. The base of the slit is sent to `-a`,
/// its limit from the negative real axis.
#[inline]
pub fn unzip_forward(z: Complex64, a2: f64) -> Complex64 {
    if z.norm_sqr() < 1e-300 {
        return Complex64::new(-a2.sqrt(), 0.0);
    }
    z * (Complex64::new(1.0, 0.0) + a2 / (z * z)).sqrt()
}

/// Inverse chordal slit map for one Loewner step with driving value `u` and
/// capacity increment `dt`.
#[inline]
pub fn chordal_inverse(w: Complex64, u: f64, dt: f64) -> Complex64 {
    u + unzip_inverse(w - u, 2.0 * dt.sqrt())
}

/// Image of a real boundary point under the forward chordal slit map and the
/// modulus of its derivative there.
#[inline]
pub fn chordal_boundary_flow(x: f64, u: f64, dt: f64) -> (f64, f64) {
    let d = x - u;
    let s = (d * d + 4.0 * dt).sqrt();
    (u + d.signum() * s, d.abs() / s)
}

/// Half-width of the image of a chordal slit: `2 sqrt(dt)`.
#[inline]
pub fn chordal_slit_halfwidth(dt: f64) -> f64 {
    2.0 * dt.sqrt()
}

#[inline]
fn koebe_disk(z: Complex64) -> Complex64 {
    let q = 1.0 + z;
    z / (q * q)
}

/// Solves `z / (1 + z)^2 = y` for the root inside the closed unit disk.
#[inline]
fn koebe_disk_inverse(y: Complex64) -> Complex64 {
    let s = (1.0 - 4.0 * y).sqrt();
    let b = 1.0 - 2.0 * y;
    let d1 = b + s;
    let d2 = b - s;
    let d = if d1.norm_sqr() >= d2.norm_sqr() { d1 } else { d2 };
    2.0 * y / d
}

/// Tip of the radial slit removed by one step of capacity `dt` at angle 0:
/// the real root `x` of `x / (1 + x)^2 = e^{-dt} / 4` in `(0, 1)`.
pub fn radial_slit_tip(dt: f64) -> f64 {
    let y = 0.25 * (-dt).exp();
    // 1 - 4y = 1 - e^{-dt}, computed without cancellation
    let s = (-(-dt).exp_m1()).sqrt();
    2.0 * y / (1.0 - 2.0 * y + s)
}

/// Inverse radial slit map at driving angle `theta`: maps the disk onto the
/// disk minus a radial slit ending at `e^{i theta}`.
pub fn radial_inverse(w: Complex64, theta: f64, dt: f64) -> Complex64 {
    let rot = Complex64::from_polar(1.0, theta);
    let v = w / rot;
    if (1.0 + v).norm_sqr() < 1e-28 {
        return w;
    }
    let y = koebe_disk(v) * (-dt).exp();
    rot * koebe_disk_inverse(y)
}

/// Derivative of the inverse radial slit map, given its input and output in
/// the rotated frame. Uses `K'(z) = (1 - z) / (1 + z)^3`.
pub fn radial_inverse_deriv(w: Complex64, theta: f64, dt: f64) -> Complex64 {
    let rot = Complex64::from_polar(1.0, theta);
    let v = w / rot;
    if (1.0 + v).norm_sqr() < 1e-28 {
        return Complex64::new((-dt).exp(), 0.0);
    }
    let y = koebe_disk(v) * (-dt).exp();
    let z = koebe_disk_inverse(y);
    let kp = |q: Complex64| (1.0 - q) / ((1.0 + q) * (1.0 + q) * (1.0 + q));
    (-dt).exp() * kp(v) / kp(z)
}

/// Forward radial slit map at angle 0 (removes the slit `[tip, 1]`).
pub fn radial_forward(z: Complex64, dt: f64) -> Complex64 {
    if (1.0 + z).norm_sqr() < 1e-28 {
        return z;
    }
    koebe_disk_inverse(koebe_disk(z) * dt.exp())
}

/// Forward radial flow of a boundary point at angle `phi` (relative to the
/// driving angle, in `(-pi, pi]`). Returns the new relative angle and the
/// modulus of the derivative. `positive_side` resolves `phi == 0`.
#[inline]
pub fn radial_boundary_flow(phi: f64, dt: f64, positive_side: bool) -> (f64, f64) {
    let shrink = (-0.5 * dt).exp();
    let half = 0.5 * phi;
    let c = half.cos() * shrink;
    let psi_half = c.clamp(-1.0, 1.0).acos();
    let sign = if phi > 0.0 || (phi == 0.0 && positive_side) { 1.0 } else { -1.0 };
    let psi = sign * 2.0 * psi_half;
    let sp = psi_half.sin();
    let deriv = if sp > 0.0 { (half.sin().abs() * shrink) / sp } else { 0.0 };
    (psi, deriv)
}

/// Wrap an angle into `(-pi, pi]`.
#[inline]
pub fn wrap_angle(a: f64) -> f64 {
    use std::f64::consts::{PI, TAU};
    let r = a.rem_euclid(TAU);
    if r > PI {
        r - TAU
    } else {
        r
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn chordal_inverse_tip_and_boundary() {
        let dt = 0.01;
        let tip = chordal_inverse(c(0.3, 0.0), 0.3, dt);
        assert!((tip - c(0.3, 0.2)).norm() < 1e-15);
        // points outside the slit image stay real with the right sign
        let left = chordal_inverse(c(-1.0, 0.0), 0.0, dt);
        assert!(left.re < 0.0 && left.im == 0.0);
        let right = chordal_inverse(c(1.0, 0.0), 0.0, dt);
        assert!(right.re > 0.0 && right.im == 0.0);
    }

    #[test]
    fn chordal_forward_inverts_inverse() {
        let dt = 0.05;
        let a2: f64 = 4.0 * dt;
        for &w in &[c(0.1, 0.3), c(-2.0, 0.01), c(3.0, 4.0), c(0.0, 1e-3)] {
            let z = unzip_inverse(w, a2.sqrt());
            assert!(z.im >= 0.0);
            let back = unzip_forward(z, a2);
            assert!((back - w).norm() < 1e-12, "{w} -> {z} -> {back}");
        }
    }

    #[test]
    fn radial_slit_capacity() {
        let dt = 0.02;
        let h = 1e-6;
        let d = (radial_forward(c(h, 0.0), dt) - radial_forward(c(-h, 0.0), dt)) / (2.0 * h);
        assert!((d.re - dt.exp()).abs() < 1e-8);
        let tip = radial_slit_tip(dt);
        assert!((radial_inverse(c(1.0, 0.0), 0.0, dt) - c(tip, 0.0)).norm() < 1e-12);
        assert!(tip > 0.0 && tip < 1.0);
    }

    #[test]
    fn radial_maps_invert() {
        let dt = 0.1;
        for &w in &[c(0.2, 0.3), c(-0.5, 0.1), c(0.0, -0.9), c(0.7, 0.0)] {
            let z = radial_inverse(w, 0.0, dt);
            assert!(z.norm() < 1.0);
            let back = radial_forward(z, dt);
            assert!((back - w).norm() < 1e-12, "{w} -> {z} -> {back}");
        }
    }

    #[test]
    fn radial_boundary_flow_matches_map() {
        let dt = 0.07;
        for &phi in &[0.5_f64, -1.2, 2.9, -3.0] {
            let z = Complex64::from_polar(1.0, phi);
            let g = radial_forward(z * (1.0 - 1e-13), dt);
            let (psi, _) = radial_boundary_flow(phi, dt, true);
            assert!((wrap_angle(g.arg() - psi)).abs() < 1e-5, "{phi}: {} vs {psi}", g.arg());
        }
    }

    #[test]
    fn radial_inverse_derivative() {
        let dt = 0.3;
        let w = c(0.3, -0.4);
        let h = 1e-6;
        let fd = (radial_inverse(w + h, 1.0, dt) - radial_inverse(w - h, 1.0, dt)) / (2.0 * h);
        let an = radial_inverse_deriv(w, 1.0, dt);
        assert!((fd - an).norm() < 1e-7);
    }
}
