//! Small numerical helpers: least squares lines and box counting.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::collections::HashSet;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LineFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
}

/// Unweighted least squares line through `(x, y)`.
pub fn fit_line(xs: &[f64], ys: &[f64]) -> LineFit {
    assert_eq!(xs.len(), ys.len());
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxx, mut sxy, mut syy) = (0.0, 0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxx += (x - mx) * (x - mx);
        sxy += (x - mx) * (y - my);
        syy += (y - my) * (y - my);
    }
    let slope = sxy / sxx;
    let r_squared = if syy > 0.0 { sxy * sxy / (sxx * syy) } else { 1.0 };
    LineFit { slope, intercept: my - slope * mx, r_squared }
}

/// Number of grid boxes of side `size` containing at least one point.
pub fn count_boxes(points: &[Complex64], size: f64) -> usize {
    points
        .iter()
        .map(|p| ((p.re / size).floor() as i64, (p.im / size).floor() as i64))
        .collect::<HashSet<_>>()
        .len()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoxCountFit {
    pub sizes: Vec<f64>,
    pub counts: Vec<f64>,
    pub slope: f64,
    pub r_squared: f64,
}

/// Box-counting slope of `log N(s)` against `log(1/s)`.
pub fn box_counting_dimension(points: &[Complex64], sizes: &[f64]) -> BoxCountFit {
    let counts: Vec<f64> = sizes.iter().map(|&s| count_boxes(points, s) as f64).collect();
    fit_counts(sizes, counts)
}

pub fn fit_counts(sizes: &[f64], counts: Vec<f64>) -> BoxCountFit {
    let xs: Vec<f64> = sizes.iter().map(|s| -s.ln()).collect();
    let ys: Vec<f64> = counts.iter().map(|c| c.max(f64::MIN_POSITIVE).ln()).collect();
    let fit = fit_line(&xs, &ys);
    BoxCountFit { sizes: sizes.to_vec(), counts, slope: fit.slope, r_squared: fit.r_squared }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let xs = [1.0, 2.0, 3.0, 4.0];
        let ys: Vec<f64> = xs.iter().map(|x| 2.0 * x - 1.0).collect();
        let f = fit_line(&xs, &ys);
        assert!((f.slope - 2.0).abs() < 1e-12 && (f.intercept + 1.0).abs() < 1e-12);
        assert!((f.r_squared - 1.0).abs() < 1e-12);
    }

    #[test]
    fn segment_has_dimension_one() {
        let pts: Vec<Complex64> = (0..100_000).map(|i| Complex64::new(i as f64 / 100_000.0, 0.3)).collect();
        let sizes: Vec<f64> = (2..10).map(|j| 2f64.powi(-j)).collect();
        let fit = box_counting_dimension(&pts, &sizes);
        assert!((fit.slope - 1.0).abs() < 0.02);
    }
}
