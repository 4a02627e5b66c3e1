use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::driving::{DrivingFunction, LoewnerKind};
use crate::conformal::{ConformalMap, SourceDomain};
use crate::error::{param, Error, Result};
use crate::slit;

/// Time-stamped polyline approximation of an SLE curve.
///
/// `flags[i]` marks points evaluated approximately (boundary-limit points
/// pulled back inside the domain before mapping).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trace {
    pub times: Vec<f64>,
    pub points: Vec<Complex64>,
    pub flags: Vec<bool>,
    pub kind: LoewnerKind,
    pub regularization: f64,
}

impl Trace {
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }
}

/// `count` points geometrically spaced on `[t_min, t_max]`.
pub fn geometric_grid(t_min: f64, t_max: f64, count: usize) -> Vec<f64> {
    assert!(t_min > 0.0 && t_max > t_min && count >= 2);
    let ratio = (t_max / t_min).ln() / (count - 1) as f64;
    (0..count).map(|i| if i + 1 == count { t_max } else { t_min * (ratio * i as f64).exp() }).collect()
}

/// `count + 1` uniformly spaced points on `[0, t_max]`.
pub fn uniform_grid(t_max: f64, count: usize) -> Vec<f64> {
    (0..=count).map(|i| t_max * i as f64 / count as f64).collect()
}

fn check_times(driving: &DrivingFunction, eval_times: &[f64], kind: LoewnerKind) -> Result<()> {
    if driving.kind != kind {
        return Err(param("driving", format!("expected a {kind:?} driving function")));
    }
    let horizon = driving.horizon();
    for &t in eval_times {
        if !(0.0..=horizon).contains(&t) {
            return Err(param("eval_times", format!("time {t} outside [0, {horizon}]")));
        }
    }
    Ok(())
}

/// Step index `k >= 1` with `times[k-1] < t <= times[k]`.
fn step_of(times: &[f64], t: f64) -> usize {
    times.partition_point(|&s| s < t).max(1)
}

fn check_point(z: Complex64, step: usize) -> Result<Complex64> {
    if z.re.is_finite() && z.im.is_finite() {
        Ok(z)
    } else {
        Err(Error::Evaluation { step, reason: "non-finite value in slit-map composition".into() })
    }
}

/// Chordal trace `gamma(t) = lim_{y -> 0} g_t^{-1}(W_t + i y)`.
///
/// The last (possibly partial) slit map sends the driving point to the slit
/// tip `W + 2 i sqrt(s)` exactly, so the tip needs no regularization; the
/// earlier maps are composed backwards from that tip.
pub fn chordal_trace(driving: &DrivingFunction, eval_times: &[f64]) -> Result<Trace> {
    check_times(driving, eval_times, LoewnerKind::Chordal)?;
    let times = &driving.times;
    let values = &driving.values;
    let mut points = Vec::with_capacity(eval_times.len());
    for &t in eval_times {
        if t == 0.0 {
            points.push(Complex64::new(values[0], 0.0));
            continue;
        }
        let k = step_of(times, t);
        let partial = t - times[k - 1];
        let mut z = Complex64::new(values[k], slit::chordal_slit_halfwidth(partial));
        for j in (1..k).rev() {
            z = slit::chordal_inverse(z, values[j], driving.dt(j));
        }
        points.push(check_point(z, k)?);
    }
    Ok(Trace {
        times: eval_times.to_vec(),
        flags: vec![false; points.len()],
        points,
        kind: LoewnerKind::Chordal,
        regularization: driving.regularization(),
    })
}

/// Radial trace in the unit disk from `e^{i W_0}` towards 0.
pub fn radial_trace(driving: &DrivingFunction, eval_times: &[f64]) -> Result<Trace> {
    check_times(driving, eval_times, LoewnerKind::Radial)?;
    let times = &driving.times;
    let values = &driving.values;
    let mut points = Vec::with_capacity(eval_times.len());
    for &t in eval_times {
        if t == 0.0 {
            points.push(Complex64::from_polar(1.0, values[0]));
            continue;
        }
        let k = step_of(times, t);
        let partial = t - times[k - 1];
        let mut z = Complex64::from_polar(slit::radial_slit_tip(partial), values[k]);
        for j in (1..k).rev() {
            z = slit::radial_inverse(z, values[j], driving.dt(j));
        }
        points.push(check_point(z, k)?);
    }
    Ok(Trace {
        times: eval_times.to_vec(),
        flags: vec![false; points.len()],
        points,
        kind: LoewnerKind::Radial,
        regularization: driving.regularization(),
    })
}

/// Half-plane capacity of the discrete hull at time `t`, read off from the
/// expansion `g_t(z) = z + hcap / z + O(z^-2)` of the forward map at a far
/// point.
pub fn chordal_capacity(driving: &DrivingFunction, t: f64) -> Result<f64> {
    check_times(driving, &[t], LoewnerKind::Chordal)?;
    if t == 0.0 {
        return Ok(0.0);
    }
    let k = step_of(&driving.times, t);
    let scale = 1.0 + driving.values[..=k].iter().fold(0.0f64, |m, v| m.max(v.abs())) + t.sqrt();
    let z0 = Complex64::new(0.0, 1e3 * scale);
    let mut z = z0;
    for j in 1..=k {
        let dt = if j == k { t - driving.times[j - 1] } else { driving.dt(j) };
        let u = driving.values[j];
        z = u + slit::unzip_forward(z - u, 4.0 * dt);
    }
    Ok(((z - z0) * z0).re)
}

/// Pointwise image of a trace under a conformal map.
///
/// Points within the trace's regularization height of the source boundary are
/// pulled back inside along the normal and flagged approximate.
pub fn map_trace(trace: &Trace, map: &ConformalMap) -> Result<Trace> {
    let h = trace.regularization.max(1e-12);
    let mut points = Vec::with_capacity(trace.len());
    let mut flags = Vec::with_capacity(trace.len());
    for (&z, &flag) in trace.points.iter().zip(&trace.flags) {
        let (inside, near) = match map.source() {
            SourceDomain::Disk => {
                let r = z.norm();
                if r > 1.0 + 1e-12 {
                    return Err(Error::Domain { re: z.re, im: z.im });
                }
                if r >= 1.0 - h {
                    (z * ((1.0 - h) / r.max(1e-300)), true)
                } else {
                    (z, false)
                }
            }
            SourceDomain::HalfPlane => {
                if z.im < -1e-12 {
                    return Err(Error::Domain { re: z.re, im: z.im });
                }
                if z.im < h {
                    (Complex64::new(z.re, h), true)
                } else {
                    (z, false)
                }
            }
        };
        points.push(map.eval(inside)?);
        flags.push(flag || near);
    }
    Ok(Trace { times: trace.times.clone(), points, flags, kind: trace.kind, regularization: h })
}

#[cfg(test)]
mod tests {
    use super::super::driving::{sample_driving, sample_radial_driving};
    use super::*;

    #[test]
    fn time_zero_anchor() {
        let d = sample_driving(3.0, 1.0, 50, 1).unwrap();
        let tr = chordal_trace(&d, &[0.0]).unwrap();
        assert_eq!(tr.points[0], Complex64::new(0.0, 0.0));
        let d = sample_radial_driving(3.0, 1.0, 50, 1, 1.0).unwrap();
        let tr = radial_trace(&d, &[0.0]).unwrap();
        assert!((tr.points[0] - Complex64::from_polar(1.0, 1.0)).norm() < 1e-15);
    }

    #[test]
    fn zero_kappa_chordal_is_vertical() {
        let d = sample_driving(0.0, 1.0, 1000, 0).unwrap();
        let ts = geometric_grid(0.01, 1.0, 20);
        let tr = chordal_trace(&d, &ts).unwrap();
        for (t, z) in ts.iter().zip(&tr.points) {
            let exact = 2.0 * t.sqrt();
            assert!(z.re.abs() < 1e-12);
            assert!(((z.im - exact) / exact).abs() < 1e-10);
        }
    }

    #[test]
    fn zero_kappa_radial_slit() {
        let d = sample_radial_driving(0.0, 2.0, 400, 0, 0.5).unwrap();
        let ts = uniform_grid(2.0, 40);
        let tr = radial_trace(&d, &ts).unwrap();
        let mut last = 1.0 + 1e-12;
        for (t, z) in ts.iter().zip(&tr.points) {
            let r = z.norm();
            assert!(r < last);
            last = r;
            if *t > 0.0 {
                assert!((r - slit::radial_slit_tip(*t)).abs() < 1e-10);
                assert!((z.arg() - 0.5).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn out_of_range_time_rejected() {
        let d = sample_driving(1.0, 1.0, 10, 0).unwrap();
        assert!(chordal_trace(&d, &[1.5]).is_err());
        assert!(radial_trace(&d, &[0.5]).is_err());
    }

    #[test]
    fn capacity_is_twice_time() {
        for kappa in [0.0, 2.0, 6.0] {
            let d = sample_driving(kappa, 1.0, 500, 11).unwrap();
            for t in [0.25, 0.5, 1.0] {
                let c = chordal_capacity(&d, t).unwrap();
                assert!((c - 2.0 * t).abs() < 0.02 * 2.0 * t, "kappa {kappa} t {t}: {c}");
            }
        }
    }
}
