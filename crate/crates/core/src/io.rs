//! Text serializations: CSV tables with 17 significant digits, pretty JSON,
//! and self-contained SVG log-log plots.

use std::fmt::Write as _;
use std::path::Path;

use num_complex::Complex64;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::boundary_stats::ScaleEstimate;
use crate::conformal::JordanCurve;
use crate::error::{Error, Result};
use crate::loewner::{DrivingFunction, Trace};
use crate::spectrum::SpectrumEstimate;

/// A float with 17 significant digits, enough to round-trip any `f64`.
pub fn fmt17(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn table<const N: usize>(header: [&str; N], rows: impl Iterator<Item = [String; N]>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Columns `time,re,im,flag`; the flag is 0 or 1.
pub fn trace_csv(trace: &Trace) -> String {
    table(
        ["time", "re", "im", "flag"],
        (0..trace.len()).map(|i| {
            let p = trace.points[i];
            [fmt17(trace.times[i]), fmt17(p.re), fmt17(p.im), (trace.flags[i] as u8).to_string()]
        }),
    )
}

/// Columns `time,value`.
pub fn driving_csv(d: &DrivingFunction) -> String {
    table(["time", "value"], d.times.iter().zip(&d.values).map(|(&t, &w)| [fmt17(t), fmt17(w)]))
}

/// Vertex rows `re,im`; the curve closes implicitly.
pub fn curve_csv(curve: &JordanCurve) -> String {
    table(["re", "im"], curve.vertices.iter().map(|v| [fmt17(v.re), fmt17(v.im)]))
}

pub fn parse_curve_csv(text: &str) -> Result<JordanCurve> {
    let mut vertices = Vec::new();
    for (n, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (n == 0 && line.starts_with("re")) {
            continue;
        }
        let bad = || Error::Geometry(format!("line {}: expected `re,im`, got `{line}`", n + 1));
        let mut cols = line.split(',');
        let (Some(re), Some(im), None) = (cols.next(), cols.next(), cols.next()) else {
            return Err(bad());
        };
        let re: f64 = re.trim().parse().map_err(|_| bad())?;
        let im: f64 = im.trim().parse().map_err(|_| bad())?;
        vertices.push(Complex64::new(re, im));
    }
    JordanCurve::from_vertices(vertices)
}

/// Columns `radius,mean`, preceded by a `#` line holding the JSON header.
pub fn spectrum_csv(est: &SpectrumEstimate) -> String {
    let mut out = format!("# {}\n", est.header_json());
    out.push_str(&table(["radius", "mean"], est.radii.iter().zip(&est.means).map(|(&r, &m)| [fmt17(r), fmt17(m)])));
    out
}

/// Columns `scale,estimate,stderr`.
pub fn scale_table_csv(rows: &[ScaleEstimate]) -> String {
    table(["scale", "estimate", "stderr"], rows.iter().map(|r| [fmt17(r.scale), fmt17(r.estimate), fmt17(r.stderr)]))
}

pub fn to_json<T: Serialize + ?Sized>(value: &T) -> Result<String> {
    let mut s = serde_json::to_string_pretty(value)?;
    s.push('\n');
    Ok(s)
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes `contents` to `dir/name` and returns its digest.
pub fn write_digested(dir: &Path, name: &str, contents: &str) -> Result<String> {
    std::fs::write(dir.join(name), contents)?;
    Ok(sha256_hex(contents.as_bytes()))
}

/// File name of a plot carrying its fitted exponent, e.g.
/// `line-dimension_slope_0.6700.svg`.
pub fn plot_file_name(stem: &str, exponent: f64) -> String {
    format!("{stem}_slope_{exponent:.4}.svg")
}

/// Points and a fitted line `ln y = slope ln x + intercept`.
#[derive(Debug, Clone)]
pub struct LogLogPlot<'a> {
    pub title: &'a str,
    pub x_label: &'a str,
    pub y_label: &'a str,
    pub xs: &'a [f64],
    pub ys: &'a [f64],
    pub slope: f64,
    pub intercept: f64,
    /// Text in the top right corner, e.g. `dimension = 0.6667`.
    pub annotation: &'a str,
}

const W: f64 = 480.0;
const H: f64 = 360.0;
const MARGIN: f64 = 60.0;

impl LogLogPlot<'_> {
    /// Self-contained SVG with axes, decade ticks, the points, the fitted
    /// line and the annotation. Non-positive values are skipped.
    pub fn svg(&self) -> String {
        let pts: Vec<(f64, f64)> = self
            .xs
            .iter()
            .zip(self.ys)
            .filter(|(&x, &y)| x > 0.0 && y > 0.0 && x.is_finite() && y.is_finite())
            .map(|(&x, &y)| (x.log10(), y.log10()))
            .collect();
        let span = |v: &mut dyn Iterator<Item = f64>| {
            let (lo, hi) = v.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), x| (a.min(x), b.max(x)));
            if lo.is_finite() {
                let pad = ((hi - lo) * 0.08).max(0.1);
                (lo - pad, hi + pad)
            } else {
                (0.0, 1.0)
            }
        };
        let (x0, x1) = span(&mut pts.iter().map(|p| p.0));
        let (y0, y1) = span(&mut pts.iter().map(|p| p.1));
        let px = |x: f64| MARGIN + (x - x0) / (x1 - x0) * (W - 1.5 * MARGIN);
        let py = |y: f64| H - MARGIN - (y - y0) / (y1 - y0) * (H - 1.5 * MARGIN);

        let mut s = String::new();
        let _ = writeln!(
            s,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">"#
        );
        let _ = writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#);
        let _ = writeln!(s, r#"<text x="{}" y="20" text-anchor="middle" font-size="13">{}</text>"#, W / 2.0, escape(self.title));
        let (ax, ay) = (px(x0), py(y0));
        let _ = writeln!(
            s,
            r#"<path d="M{ax:.2},{:.2} L{ax:.2},{ay:.2} L{:.2},{ay:.2}" stroke="black" fill="none"/>"#,
            py(y1),
            px(x1)
        );
        for k in x0.ceil() as i32..=x1.floor() as i32 {
            let x = px(k as f64);
            let _ = writeln!(s, r#"<line x1="{x:.2}" y1="{ay:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#, ay + 5.0);
            let _ = writeln!(s, r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">1e{k}</text>"#, ay + 18.0);
        }
        for k in y0.ceil() as i32..=y1.floor() as i32 {
            let y = py(k as f64);
            let _ = writeln!(s, r#"<line x1="{:.2}" y1="{y:.2}" x2="{ax:.2}" y2="{y:.2}" stroke="black"/>"#, ax - 5.0);
            let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{k}</text>"#, ax - 8.0, y + 4.0);
        }
        let _ = writeln!(s, r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">{}</text>"#, W / 2.0, H - 15.0, escape(self.x_label));
        let _ = writeln!(
            s,
            r#"<text x="15" y="{:.2}" text-anchor="middle" transform="rotate(-90 15 {:.2})">{}</text>"#,
            H / 2.0,
            H / 2.0,
            escape(self.y_label)
        );
        // the fit is in natural logs; convert to log10 coordinates
        if self.slope.is_finite() && self.intercept.is_finite() {
            let fy = |x: f64| self.slope * x + self.intercept / std::f64::consts::LN_10;
            let _ = writeln!(
                s,
                r#"<line x1="{:.2}" y1="{:.2}" x2="{:.2}" y2="{:.2}" stroke="steelblue" stroke-width="1.5"/>"#,
                px(x0),
                py(fy(x0)),
                px(x1),
                py(fy(x1))
            );
        }
        for &(x, y) in &pts {
            let _ = writeln!(s, r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="firebrick"/>"#, px(x), py(y));
        }
        let _ = writeln!(s, r#"<text x="{:.2}" y="40" text-anchor="end">{}</text>"#, W - 20.0, escape(self.annotation));
        s.push_str("</svg>\n");
        s
    }
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
