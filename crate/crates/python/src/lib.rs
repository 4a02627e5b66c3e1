//! Python module `slelab`. Simple results come back as floats and lists;
//! structured ones as JSON strings in the same layout the runner writes.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

use slelab::boundary_stats::hitting_probability as hitting;
use slelab::conformal::ConformalMap;
use slelab::loewner::{chordal_trace as chordal, sample_driving as driving, uniform_grid};
use slelab::runner::{self, ExperimentConfig, RunOptions, Severity};
use slelab::sieve::{classify_squares as classify, SieveMode, SieveOptions};
use slelab::spectrum::{check_universal_bound, dkappa_bounds as dkappa, estimate_beta as beta, DEFAULT_ALPHA, DEFAULT_C};
use slelab::Error;

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Parameter { .. } | Error::Config { .. } | Error::Json(_) | Error::Domain { .. } => {
            PyValueError::new_err(e.to_string())
        }
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_json<T: Serialize>(v: &T) -> PyResult<String> {
    serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

fn parse_map(map: &str) -> PyResult<ConformalMap> {
    serde_json::from_str(map).map_err(|e| PyValueError::new_err(format!("map: {e}")))
}

/// Brownian driving function `sqrt(kappa) B_t` on `n_steps` uniform steps:
/// `(times, values)`.
#[pyfunction]
fn sample_driving(kappa: f64, horizon: f64, n_steps: usize, seed: u64) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let d = driving(kappa, horizon, n_steps, seed).map_err(py_err)?;
    Ok((d.times, d.values))
}

/// Chordal trace points `(t, re, im)` at `n_points` uniform times.
#[pyfunction]
fn chordal_trace(py: Python<'_>, kappa: f64, horizon: f64, n_steps: usize, seed: u64, n_points: usize) -> PyResult<Vec<(f64, f64, f64)>> {
    py.detach(|| {
        let d = driving(kappa, horizon, n_steps, seed)?;
        let tr = chordal(&d, &uniform_grid(horizon, n_points))?;
        Ok(tr.times.iter().zip(&tr.points).map(|(&t, p)| (t, p.re, p.im)).collect())
    })
    .map_err(py_err)
}

/// Fraction of radial traces meeting `B(e^{i angle}, radius)` and its
/// standard error.
#[pyfunction]
fn hitting_probability(py: Python<'_>, kappa: f64, center_angle: f64, radius: f64, n_traces: usize, seed: u64) -> PyResult<(f64, f64)> {
    let e = py.detach(|| hitting(kappa, center_angle, radius, n_traces, seed)).map_err(py_err)?;
    Ok((e.estimate, e.stderr))
}

/// Integral means growth exponent of a map given as a JSON descriptor, with
/// the universal bound check.
#[pyfunction]
#[pyo3(signature = (t, map = "{\"kind\": \"identity\"}"))]
fn estimate_beta(py: Python<'_>, t: f64, map: &str) -> PyResult<String> {
    let map = parse_map(map)?;
    let est = py.detach(|| beta(&map, t)).map_err(py_err)?;
    to_json(&serde_json::json!({ "estimate": est, "universal_bound": check_universal_bound(&est) }))
}

#[pyfunction]
#[pyo3(signature = (p, n, mode = "bounded", n_max = 10, map = "{\"kind\": \"identity\"}"))]
fn classify_squares(py: Python<'_>, p: f64, n: u32, mode: &str, n_max: u32, map: &str) -> PyResult<String> {
    let map = parse_map(map)?;
    let mode: SieveMode = serde_json::from_value(serde_json::Value::String(mode.into()))
        .map_err(|e| PyValueError::new_err(format!("mode: {e}")))?;
    let opts = SieveOptions { n_max, ..SieveOptions::default() };
    let sieve = py.detach(|| classify(&map, p, n, mode, &opts)).map_err(py_err)?;
    to_json(&sieve)
}

#[pyfunction]
#[pyo3(signature = (kappa, c = DEFAULT_C, alpha = DEFAULT_ALPHA, branch_john = None))]
fn dkappa_bounds(kappa: f64, c: f64, alpha: f64, branch_john: Option<f64>) -> PyResult<String> {
    to_json(&dkappa(kappa, c, alpha, branch_john).map_err(py_err)?)
}

/// Diagnostics `(severity, key, message)` for an experiment config.
#[pyfunction]
fn validate_config(config: &str) -> Vec<(String, String, String)> {
    runner::validate_json(config)
        .into_iter()
        .map(|d| {
            let s = if d.severity == Severity::Error { "error" } else { "warning" };
            (s.to_string(), d.key, d.message)
        })
        .collect()
}

/// Runs an experiment config and returns its manifest as JSON.
#[pyfunction]
#[pyo3(signature = (config, threads = None))]
fn run_config(py: Python<'_>, config: &str, threads: Option<usize>) -> PyResult<String> {
    let cfg = ExperimentConfig::from_json(config).map_err(py_err)?;
    let opts = threads.map_or_else(RunOptions::default, |threads| RunOptions { threads });
    let m = py.detach(|| runner::run_with(&cfg, &opts)).map_err(py_err)?;
    to_json(&m)
}

#[pymodule(name = "slelab")]
fn slelab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(sample_driving, m)?)?;
    m.add_function(wrap_pyfunction!(chordal_trace, m)?)?;
    m.add_function(wrap_pyfunction!(hitting_probability, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_beta, m)?)?;
    m.add_function(wrap_pyfunction!(classify_squares, m)?)?;
    m.add_function(wrap_pyfunction!(dkappa_bounds, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(run_config, m)?)?;
    Ok(())
}
