//! Integral means spectra and the dimension bounds built on them.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::f64::consts::TAU;

use crate::conformal::ConformalMap;
use crate::error::{param, Result};
use crate::stats::fit_line;

/// Minimum number of trapezoid nodes per circle.
pub const MIN_CIRCLE_POINTS: usize = 1 << 12;

/// Default dyadic radii `1 - 2^-j`, `j = 4..=12`.
pub fn dyadic_radii() -> Vec<f64> {
    (4..=12).map(|j| 1.0 - (-(j as f64)).exp2()).collect()
}

fn circle_points(r: f64) -> usize {
    let want = (32.0 / (1.0 - r)).ceil() as usize;
    want.next_power_of_two().max(MIN_CIRCLE_POINTS)
}

/// `|f'|` sampled on circles; reused across exponents.
#[derive(Debug, Clone)]
pub struct CircleSamples {
    pub radii: Vec<f64>,
    moduli: Vec<Vec<f64>>,
}

impl CircleSamples {
    pub fn new(map: &ConformalMap, radii: &[f64]) -> Result<Self> {
        let mut prev = 0.0;
        for &r in radii {
            if !(r > prev && r < 1.0) {
                return Err(param("radii", "must be strictly increasing inside (0, 1)"));
            }
            prev = r;
        }
        let moduli = radii
            .iter()
            .map(|&r| {
                let m = circle_points(r);
                (0..m)
                    .map(|j| Ok(map.deriv(Complex64::from_polar(r, TAU * j as f64 / m as f64))?.norm()))
                    .collect::<Result<Vec<f64>>>()
            })
            .collect::<Result<_>>()?;
        Ok(Self { radii: radii.to_vec(), moduli })
    }

    /// Trapezoid values of `int_{|z|=r} |f'|^t |dz|` and whether halving the
    /// node count moves any of them by more than 1%.
    pub fn means(&self, t: f64) -> (Vec<f64>, bool) {
        let mut warn = false;
        let means = self
            .radii
            .iter()
            .zip(&self.moduli)
            .map(|(&r, m)| {
                let pw: Vec<f64> = m.iter().map(|d| d.powf(t)).collect();
                let full = pw.iter().sum::<f64>() * TAU * r / pw.len() as f64;
                let half = pw.iter().step_by(2).sum::<f64>() * TAU * r / (pw.len() / 2) as f64;
                if (full - half).abs() > 0.01 * full.abs() {
                    warn = true;
                }
                full
            })
            .collect();
        (means, warn)
    }

    pub fn estimate(&self, t: f64) -> SpectrumEstimate {
        let (means, precision_warning) = self.means(t);
        let xs: Vec<f64> = self.radii.iter().map(|r| -(1.0 - r).ln()).collect();
        let ys: Vec<f64> = means.iter().map(|m| m.ln()).collect();
        let fit = fit_line(&xs, &ys);
        SpectrumEstimate {
            t,
            radii: self.radii.clone(),
            means,
            beta_hat: fit.slope,
            r_squared: fit.r_squared,
            low_confidence: !(fit.r_squared >= 0.9),
            precision_warning,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralMeans {
    pub radii: Vec<f64>,
    pub means: Vec<f64>,
    pub precision_warning: bool,
}

/// `int_{|z|=r} |f'(z)|^t |dz|` by the trapezoid rule on each circle.
pub fn integral_means(map: &ConformalMap, t: f64, radii: &[f64]) -> Result<IntegralMeans> {
    let s = CircleSamples::new(map, radii)?;
    let (means, precision_warning) = s.means(t);
    Ok(IntegralMeans { radii: radii.to_vec(), means, precision_warning })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumEstimate {
    pub t: f64,
    pub radii: Vec<f64>,
    pub means: Vec<f64>,
    /// Raw slope of `log means` against `log 1/(1 - r)`.
    pub beta_hat: f64,
    pub r_squared: f64,
    pub low_confidence: bool,
    pub precision_warning: bool,
}

impl SpectrumEstimate {
    pub fn header_json(&self) -> serde_json::Value {
        serde_json::json!({
            "t": self.t,
            "beta_hat": self.beta_hat,
            "r_squared": self.r_squared,
            "low_confidence": self.low_confidence,
            "precision_warning": self.precision_warning,
        })
    }
}

pub fn estimate_beta(map: &ConformalMap, t: f64) -> Result<SpectrumEstimate> {
    Ok(CircleSamples::new(map, &dyadic_radii())?.estimate(t))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UniversalBoundCheck {
    pub t: f64,
    pub beta_hat: f64,
    pub bound: f64,
    pub margin: f64,
    pub pass: bool,
    /// False when the regression was too poor to judge.
    pub applicable: bool,
}

pub const UNIVERSAL_TOLERANCE: f64 = 0.1;

/// `margin = 4 t^2 - beta_hat`; passes when `margin > -0.1`.
pub fn check_universal_bound(estimate: &SpectrumEstimate) -> UniversalBoundCheck {
    let bound = 4.0 * estimate.t * estimate.t;
    let margin = bound - estimate.beta_hat;
    UniversalBoundCheck {
        t: estimate.t,
        beta_hat: estimate.beta_hat,
        bound,
        margin,
        pass: margin > -UNIVERSAL_TOLERANCE,
        applicable: estimate.r_squared >= 0.9,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RootKind {
    Interior,
    /// `F <= 0` already at the lower end: the bound equals the flat value.
    LowerEndpoint,
    /// `F > 0` on the whole bracket: no solution below 2.
    NoSolution,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JohnDimension {
    pub kappa: f64,
    pub d: f64,
    pub kind: RootKind,
    pub bracket: (f64, f64),
    /// `F(d) = beta_hat(d) - d + (2 - 8/kappa)` at 5 points of the bracket.
    pub profile: Vec<(f64, f64)>,
    pub monotone: bool,
    pub iterations: usize,
    pub low_confidence: bool,
}

pub const JOHN_TOLERANCE: f64 = 1e-3;

/// Bisection for `beta_hat(d) = d - (2 - 8/kappa)` on `[2 - 8/kappa, 2]`.
pub fn solve_john_dimension(map: &ConformalMap, kappa: f64) -> Result<JohnDimension> {
    let samples = CircleSamples::new(map, &dyadic_radii())?;
    solve_john_dimension_with(&samples, kappa)
}

pub fn solve_john_dimension_with(samples: &CircleSamples, kappa: f64) -> Result<JohnDimension> {
    if !(kappa > 4.0 && kappa <= 8.0) {
        return Err(param("kappa", format!("must lie in (4, 8], got {kappa}")));
    }
    let d0 = 2.0 - 8.0 / kappa;
    let mut low_confidence = false;
    let mut f = |d: f64| {
        let e = samples.estimate(d);
        low_confidence |= e.low_confidence;
        e.beta_hat - d + d0
    };
    let profile: Vec<(f64, f64)> = (0..5).map(|i| d0 + (2.0 - d0) * i as f64 / 4.0).map(|d| (d, f(d))).collect();
    let monotone = profile.windows(2).all(|w| w[1].1 <= w[0].1 + 0.05);
    let (flo, fhi) = (profile[0].1, profile[4].1);
    let mut out = JohnDimension {
        kappa,
        d: d0,
        kind: RootKind::LowerEndpoint,
        bracket: (d0, 2.0),
        profile,
        monotone,
        iterations: 0,
        low_confidence: false,
    };
    if flo <= 0.0 {
        out.low_confidence = low_confidence;
        return Ok(out);
    }
    if fhi > 0.0 {
        out.d = 2.0;
        out.kind = RootKind::NoSolution;
        out.low_confidence = low_confidence;
        return Ok(out);
    }
    let (mut lo, mut hi) = (d0, 2.0);
    while hi - lo > JOHN_TOLERANCE {
        let mid = 0.5 * (lo + hi);
        if f(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        out.iterations += 1;
    }
    out.d = 0.5 * (lo + hi);
    out.kind = RootKind::Interior;
    out.low_confidence = low_confidence;
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoveringSum {
    pub t: f64,
    pub kappa: f64,
    pub generations: Vec<u32>,
    /// `2^{-n (t - 2 + 8/kappa)} int_{|z| = 1 - 2^-n} |f'|^t`.
    pub terms: Vec<f64>,
    pub partial_sums: Vec<f64>,
    pub beta_hat: f64,
    /// Fitted ratio of consecutive terms.
    pub decay_ratio: f64,
    pub converges: bool,
}

/// Per-generation terms of the expected t-content bound of the trace on the
/// boundary, `n = n_min..=n_max`.
pub fn covering_sum(map: &ConformalMap, t: f64, kappa: f64, n_min: u32, n_max: u32) -> Result<CoveringSum> {
    let d0 = 2.0 - 8.0 / kappa;
    if !(kappa > 4.0 && kappa <= 8.0) {
        return Err(param("kappa", format!("must lie in (4, 8], got {kappa}")));
    }
    if !(t >= d0) {
        return Err(param("t", format!("must be at least 2 - 8/kappa = {d0}, got {t}")));
    }
    if n_min < 1 || n_max < n_min + 1 || n_max > 30 {
        return Err(param("N", "need 1 <= N < n_max <= 30"));
    }
    let generations: Vec<u32> = (n_min..=n_max).collect();
    let radii: Vec<f64> = generations.iter().map(|&n| 1.0 - (-(n as f64)).exp2()).collect();
    let samples = CircleSamples::new(map, &radii)?;
    let (means, _) = samples.means(t);
    let terms: Vec<f64> = generations.iter().zip(&means).map(|(&n, m)| (-(n as f64) * (t - d0)).exp2() * m).collect();
    let mut acc = 0.0;
    let partial_sums = terms.iter().map(|x| {
        acc += x;
        acc
    });
    let partial_sums: Vec<f64> = partial_sums.collect();
    let ns: Vec<f64> = generations.iter().map(|&n| n as f64).collect();
    let logs: Vec<f64> = terms.iter().map(|x| x.log2()).collect();
    let decay_ratio = fit_line(&ns, &logs).slope.exp2();
    let beta_hat = samples.estimate(t).beta_hat;
    Ok(CoveringSum {
        t,
        kappa,
        generations,
        terms,
        partial_sums,
        beta_hat,
        decay_ratio,
        converges: beta_hat < t - d0,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SymbolicBranch {
    pub c: f64,
    pub alpha: f64,
    /// `2 - c alpha p / 2`.
    pub value: f64,
}

pub const DEFAULT_C: f64 = 0.01;
pub const DEFAULT_ALPHA: f64 = 0.1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DimensionBound {
    pub kappa: f64,
    pub p: f64,
    /// Dimension bound `8/kappa - 1` of the set of boundary points hit.
    pub a: f64,
    pub refined_applicable: bool,
    /// `1 / (1 - 6 sqrt(1 - p))` when `6 sqrt(1 - p) < 1`.
    pub branch_refined: Option<f64>,
    pub branch_symbolic: SymbolicBranch,
    pub branch_john: Option<f64>,
}

impl DimensionBound {
    /// Smallest applicable upper bound.
    pub fn best(&self) -> f64 {
        let mut b = self.branch_symbolic.value;
        if let Some(r) = self.branch_refined {
            b = b.min(r);
        }
        if let Some(j) = self.branch_john {
            b = b.min(j);
        }
        b
    }
}

pub fn dkappa_bounds(kappa: f64, c: f64, alpha: f64, branch_john: Option<f64>) -> Result<DimensionBound> {
    if !(kappa > 4.0 && kappa < 8.0) {
        return Err(param("kappa", format!("must lie in (4, 8), got {kappa}")));
    }
    if !(c > 0.0 && alpha > 0.0 && c.is_finite() && alpha.is_finite()) {
        return Err(param("c", "constants c and alpha must be positive"));
    }
    let p = 8.0 / kappa - 1.0;
    let s = 6.0 * (1.0 - p).sqrt();
    let refined_applicable = s < 1.0;
    Ok(DimensionBound {
        kappa,
        p,
        a: p,
        refined_applicable,
        branch_refined: refined_applicable.then(|| 1.0 / (1.0 - s)),
        branch_symbolic: SymbolicBranch { c, alpha, value: 2.0 - c * alpha * p / 2.0 },
        branch_john,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_means_are_circle_lengths() {
        let m = integral_means(&ConformalMap::identity(), 1.7, &[0.5, 0.9]).unwrap();
        assert!((m.means[1] - TAU * 0.9).abs() < 1e-12);
        assert!(!m.precision_warning);
    }

    #[test]
    fn node_count_scales_with_radius() {
        assert_eq!(circle_points(0.5), MIN_CIRCLE_POINTS);
        assert_eq!(circle_points(1.0 - (-12f64).exp2()), 1 << 17);
    }

    #[test]
    fn bracket_endpoint_for_flat_spectrum() {
        let r = solve_john_dimension(&ConformalMap::identity(), 8.0).unwrap();
        assert!((r.d - 1.0).abs() < 0.02, "{r:?}");
        assert!(dkappa_bounds(8.0, 0.01, 0.1, None).is_err());
    }
}
