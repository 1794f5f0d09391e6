//! Python bindings: the main types and operations of the heterodimensional
//! cycle laboratory, exchanged as JSON documents plus plain numeric tuples.

use nalgebra::DVector;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use blab::covering::{self, Orientation};
use blab::model::CycleParams;
use blab::retmap::ReturnMap;

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    PyRuntimeError::new_err(e.to_string())
}

fn parse_params(json: &str) -> PyResult<CycleParams> {
    CycleParams::from_json(json).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn parse_orientation(name: &str) -> PyResult<Orientation> {
    match name {
        "cs" => Ok(Orientation::Cs),
        "cu" => Ok(Orientation::Cu),
        other => Err(PyValueError::new_err(format!(
            "unknown orientation {other:?} (expected \"cs\" or \"cu\")"
        ))),
    }
}

/// JSON document of one of the bundled reference parameter sets:
/// "ref1", "ref1-typeII", "ref1-cu", "ref2", "ref-sf", "ref-df".
#[pyfunction]
fn reference_params(name: &str) -> PyResult<String> {
    let params = match name {
        "ref1" => blab::model::params::ref1(),
        "ref1-typeII" => blab::model::params::ref1_type2(),
        "ref1-cu" => blab::model::params::ref1_cu(),
        "ref2" => blab::model::params::ref2(),
        "ref-sf" => blab::model::params::ref_sf(),
        "ref-df" => blab::model::params::ref_df(),
        other => return Err(PyValueError::new_err(format!("unknown reference set {other:?}"))),
    };
    params.to_json().map_err(err)
}

/// Validate a parameter document; returns the normalized JSON.
#[pyfunction]
fn validate_params(params_json: &str) -> PyResult<String> {
    parse_params(params_json)?.to_json().map_err(err)
}

/// Non-degeneracy report (JSON).
#[pyfunction]
fn nondegeneracy(params_json: &str) -> PyResult<String> {
    let params = parse_params(params_json)?;
    let report = blab::model::validate_nondegeneracy(&params).map_err(err)?;
    blab::report::to_json_string(&report).map_err(err)
}

/// `(theta, alpha, cycle_type)`; the last two are None for focus cases.
#[pyfunction]
fn moduli(params_json: &str) -> PyResult<(f64, Option<f64>, Option<String>)> {
    let params = parse_params(params_json)?;
    let m = blab::analysis::compute_moduli(&params).map_err(err)?;
    Ok((m.theta, m.alpha, m.cycle_type.map(|t| format!("{t:?}"))))
}

/// Affine skeleton of `T_{k,m}` as `(A_km, B_km)`.
#[pyfunction]
fn return_coeffs(params_json: &str, k: u32, m: u32) -> PyResult<(f64, f64)> {
    let ret = ReturnMap::new(&parse_params(params_json)?).map_err(err)?;
    let c = ret.coeffs(k, m).map_err(err)?;
    Ok((c.a_km, c.b_km))
}

/// Cross-form evaluation `(X, Y', Z) -> (X', Y, Z')`.
#[pyfunction]
fn cross_map(
    params_json: &str,
    k: u32,
    m: u32,
    x: f64,
    ybar: Vec<f64>,
    z: Vec<f64>,
) -> PyResult<(f64, Vec<f64>, Vec<f64>)> {
    let ret = ReturnMap::new(&parse_params(params_json)?).map_err(err)?;
    let img = ret
        .cross(k, m, x, &DVector::from_vec(ybar), &DVector::from_vec(z))
        .map_err(err)?;
    Ok((img.xbar, img.y.iter().cloned().collect(), img.zbar.iter().cloned().collect()))
}

/// Covering family for the requested orientation, with its verification
/// report, as JSON.
#[pyfunction]
fn build_covering(params_json: &str, orientation: &str) -> PyResult<String> {
    let ret = ReturnMap::new(&parse_params(params_json)?).map_err(err)?;
    let set = covering::build_covering_set_oriented(&ret, parse_orientation(orientation)?)
        .map_err(err)?;
    let verification = covering::verify_covering(&set).map_err(err)?;
    let out = serde_json::json!({
        "set": serde_json::from_str::<serde_json::Value>(&blab::report::to_json_string(&set).map_err(err)?).map_err(err)?,
        "verification": serde_json::from_str::<serde_json::Value>(&blab::report::to_json_string(&verification).map_err(err)?).map_err(err)?,
    });
    blab::report::to_json_string(&out).map_err(err)
}

/// Full blender certificate (JSON).
#[pyfunction]
#[pyo3(signature = (params_json, orientation, trials=20, depth=15, tol=1e-10, seed=0))]
fn verify_blender(
    params_json: &str,
    orientation: &str,
    trials: usize,
    depth: usize,
    tol: f64,
    seed: u64,
) -> PyResult<String> {
    let params = parse_params(params_json)?;
    let ret = ReturnMap::new(&params).map_err(err)?;
    let orientation = parse_orientation(orientation)?;
    let set = covering::build_covering_set_oriented(&ret, orientation).map_err(err)?;
    let cert = blab::blender::verify_blender(&ret, &set, orientation, trials, depth, tol, seed)
        .map_err(err)?;
    blab::report::to_json_string(&cert).map_err(err)
}

/// Activation intervals for the splitting parameter (JSON).
#[pyfunction]
#[pyo3(signature = (params_json, m_lo=1, m_hi=40, k_lo=1, k_hi=40, kappa=0.1))]
fn activation_intervals(
    params_json: &str,
    m_lo: u32,
    m_hi: u32,
    k_lo: u32,
    k_hi: u32,
    kappa: f64,
) -> PyResult<String> {
    let params = parse_params(params_json)?;
    let iv = blab::analysis::activation_intervals(&params, (m_lo, m_hi), (k_lo, k_hi), kappa)
        .map_err(err)?;
    blab::report::to_json_string(&iv).map_err(err)
}

/// Rational-theta report (JSON).
#[pyfunction]
#[pyo3(signature = (params_json, max_den=1_000_000))]
fn rational_theta(params_json: &str, max_den: u64) -> PyResult<String> {
    let params = parse_params(params_json)?;
    let r = blab::analysis::rational_theta_check(&params, max_den).map_err(err)?;
    blab::report::to_json_string(&r).map_err(err)
}

/// All `(k, m)` with `k <= k_max` and `|m - k theta - target| < tol/ln_gamma`.
#[pyfunction]
#[pyo3(signature = (theta, target, tol, ln_gamma, k_max, even=false))]
fn search_km(
    theta: f64,
    target: f64,
    tol: f64,
    ln_gamma: f64,
    k_max: u64,
    even: bool,
) -> PyResult<Vec<(u32, u32)>> {
    let parity = if even { covering::Parity::Even } else { covering::Parity::Any };
    Ok(covering::search_km(theta, target, tol, ln_gamma, k_max, parity).hits)
}

/// Run a scenario document (same schema as the CLI) and return the exit
/// code: 0 all certifications passed, 2 certification failure.
#[pyfunction]
fn run_scenario(scenario_json: &str, action: &str, out_dir: &str) -> PyResult<i32> {
    let scenario = blab::report::Scenario::from_json(scenario_json)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let action = blab::report::Action::parse(action)
        .ok_or_else(|| PyValueError::new_err(format!("unknown action {action:?}")))?;
    let outcome = blab::report::run_scenario(&scenario, &[action], std::path::Path::new(out_dir))
        .map_err(err)?;
    Ok(outcome.exit_code)
}

#[pymodule]
fn blab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(reference_params, m)?)?;
    m.add_function(wrap_pyfunction!(validate_params, m)?)?;
    m.add_function(wrap_pyfunction!(nondegeneracy, m)?)?;
    m.add_function(wrap_pyfunction!(moduli, m)?)?;
    m.add_function(wrap_pyfunction!(return_coeffs, m)?)?;
    m.add_function(wrap_pyfunction!(cross_map, m)?)?;
    m.add_function(wrap_pyfunction!(build_covering, m)?)?;
    m.add_function(wrap_pyfunction!(verify_blender, m)?)?;
    m.add_function(wrap_pyfunction!(activation_intervals, m)?)?;
    m.add_function(wrap_pyfunction!(rational_theta, m)?)?;
    m.add_function(wrap_pyfunction!(search_km, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
