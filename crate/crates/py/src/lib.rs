//! Python bindings. Specs and results cross the boundary as JSON text.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use blender_forge_cli::{execute, Command};
use blender_forge_core::arithmetic::check_a1 as core_check_a1;
use blender_forge_core::blender_certifier::{certify_ifs as core_certify_ifs, CertifyOptions};
use blender_forge_core::cycle_model::CycleSpec;
use blender_forge_core::return_map::coeffs as core_coeffs;
use blender_forge_core::Error;

fn spec_of(json: &str) -> PyResult<CycleSpec> {
    let spec: CycleSpec = serde_json::from_str(json).map_err(|e| PyValueError::new_err(e.to_string()))?;
    spec.validated().map_err(to_py)?;
    Ok(spec)
}

fn to_py(e: Error) -> PyErr {
    match e {
        Error::InvalidSpec { .. } | Error::Domain { .. } => PyValueError::new_err(e.to_string()),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn dump<T: serde::Serialize>(t: &T) -> PyResult<String> {
    serde_json::to_string(t).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Run a CLI command on a spec document; returns (envelope JSON, exit code).
#[pyfunction]
#[pyo3(signature = (command, doc, seed=0, overrides=Vec::new()))]
fn run(command: &str, doc: &str, seed: u64, overrides: Vec<(String, String)>) -> PyResult<(String, i32)> {
    let command = <Command as clap::ValueEnum>::from_str(command, false).map_err(PyValueError::new_err)?;
    let doc = serde_json::from_str(doc).map_err(|e| PyValueError::new_err(e.to_string()))?;
    let out = execute(command, doc, &overrides, seed);
    Ok((out.json, out.exit_code))
}

/// Condition A1 witnesses for ω/2π = p/q, as JSON.
#[pyfunction]
fn check_a1(spec: &str, q: i64, p: i64) -> PyResult<String> {
    dump(&core_check_a1(&spec_of(spec)?, q, p).map_err(to_py)?)
}

/// (A_km, B_km) with the admissibility flag, as JSON.
#[pyfunction]
fn coeffs(spec: &str, k: i64, m: i64) -> PyResult<String> {
    dump(&core_coeffs(&spec_of(spec)?, k, m).map_err(to_py)?)
}

/// Covering certificate for raw (A, B) values, as JSON.
#[pyfunction]
fn certify_ifs(spec: &str, a: Vec<f64>, b: Vec<f64>) -> PyResult<String> {
    let pairs: Vec<(i64, i64)> = (1..=a.len() as i64).map(|i| (i, i)).collect();
    dump(&core_certify_ifs(&spec_of(spec)?, &pairs, &a, &b, &CertifyOptions::default()).map_err(to_py)?)
}

#[pymodule]
fn blender_forge(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("SCHEMA", blender_forge_cli::SCHEMA)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(check_a1, m)?)?;
    m.add_function(wrap_pyfunction!(coeffs, m)?)?;
    m.add_function(wrap_pyfunction!(certify_ifs, m)?)?;
    Ok(())
}
