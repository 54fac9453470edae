//! Python bindings for the `fas_sep` library.

use fas_sep::cf_engine;
use fas_sep::cli::{parse_scheme, PointConfig};
use fas_sep::correlation;
use fas_sep::mc_sim::{self, McStop};
use fas_sep::sep_analytic::{self, ExactMethod, SepResult};
use fas_sep::FasError;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

fn to_py(e: FasError) -> PyErr {
    match e {
        FasError::InvalidParameter { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn point(
    n: usize,
    k: usize,
    snr_db: f64,
    w: Option<f64>,
    mu: Option<f64>,
) -> PyResult<PointConfig> {
    match (mu, w) {
        (Some(mu), _) => Ok(PointConfig::from_mu(n, k, mu, snr_db)),
        (None, Some(w)) => PointConfig::from_w(n, k, w, snr_db).map_err(to_py),
        (None, None) => PointConfig::from_w(n, k, 0.2, snr_db).map_err(to_py),
    }
}

fn result_dict<'py>(py: Python<'py>, r: &SepResult) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("value", r.value)?;
    d.set_item("method", r.method.name())?;
    d.set_item("diagnostics", r.diagnostics.summary())?;
    Ok(d)
}

/// Port correlation for an aperture of `w` wavelengths.
#[pyfunction]
fn mu_from_w(w: f64) -> PyResult<f64> {
    correlation::mu_from_w(w).map_err(to_py)
}

/// Characteristic function of the combined SNR at `x <= 0`.
#[pyfunction]
#[pyo3(signature = (x, n, k, gamma_av, mu))]
fn cf_value(x: f64, n: usize, k: usize, gamma_av: f64, mu: f64) -> PyResult<f64> {
    let model = correlation::CorrelationModel::from_mu(mu, 1.0).map_err(to_py)?;
    let cfg = cf_engine::FasConfig::with_gamma(n, k, model, gamma_av).map_err(to_py)?;
    cf_engine::cf_value_auto(x, &cfg, 1e-12)
        .map(|(v, _)| v)
        .map_err(to_py)
}

/// Exact SEP; `method` is "auto", "closed_form" or "quadrature".
#[pyfunction]
#[pyo3(signature = (scheme, n, k, snr_db, w=None, mu=None, method="auto"))]
fn sep_exact<'py>(
    py: Python<'py>,
    scheme: &str,
    n: usize,
    k: usize,
    snr_db: f64,
    w: Option<f64>,
    mu: Option<f64>,
    method: &str,
) -> PyResult<Bound<'py, PyDict>> {
    let scheme = parse_scheme(scheme).map_err(to_py)?;
    let method = match method {
        "auto" => ExactMethod::Auto,
        "closed_form" => ExactMethod::ClosedForm,
        "quadrature" => ExactMethod::Quadrature,
        other => return Err(PyValueError::new_err(format!("unknown method {other:?}"))),
    };
    let cfg = point(n, k, snr_db, w, mu)?.fas_config().map_err(to_py)?;
    let r = py
        .detach(|| sep_analytic::sep_exact(scheme, &cfg, method))
        .map_err(to_py)?;
    result_dict(py, &r)
}

/// High-SNR asymptotic SEP.
#[pyfunction]
#[pyo3(signature = (scheme, n, k, snr_db, w=None, mu=None))]
fn sep_asymptotic(
    scheme: &str,
    n: usize,
    k: usize,
    snr_db: f64,
    w: Option<f64>,
    mu: Option<f64>,
) -> PyResult<f64> {
    let scheme = parse_scheme(scheme).map_err(to_py)?;
    let cfg = point(n, k, snr_db, w, mu)?.fas_config().map_err(to_py)?;
    sep_analytic::sep_asymptotic(scheme, &cfg)
        .map(|r| r.value)
        .map_err(to_py)
}

/// Monte Carlo symbol error rate with a 95% Wilson interval.
#[pyfunction]
#[pyo3(signature = (scheme, n, k, snr_db, w=None, mu=None, max_trials=1_000_000, target_errors=200, seed=1, chunk_size=10_000))]
#[allow(clippy::too_many_arguments)]
fn simulate<'py>(
    py: Python<'py>,
    scheme: &str,
    n: usize,
    k: usize,
    snr_db: f64,
    w: Option<f64>,
    mu: Option<f64>,
    max_trials: u64,
    target_errors: u64,
    seed: u64,
    chunk_size: u64,
) -> PyResult<Bound<'py, PyDict>> {
    let scheme = parse_scheme(scheme).map_err(to_py)?;
    let cfg = point(n, k, snr_db, w, mu)?.fas_config().map_err(to_py)?;
    let stop = McStop {
        max_trials,
        target_errors,
        chunk_size,
    };
    let est = py
        .detach(|| mc_sim::simulate_ser(&cfg, scheme, stop, seed))
        .map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("ser", est.ser)?;
    d.set_item("ci_low", est.ci_low)?;
    d.set_item("ci_high", est.ci_high)?;
    d.set_item("trials", est.trials)?;
    d.set_item("errors", est.errors)?;
    d.set_item("seed", est.seed)?;
    Ok(d)
}

#[pymodule]
fn fas_sep_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(mu_from_w, m)?)?;
    m.add_function(wrap_pyfunction!(cf_value, m)?)?;
    m.add_function(wrap_pyfunction!(sep_exact, m)?)?;
    m.add_function(wrap_pyfunction!(sep_asymptotic, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    Ok(())
}
