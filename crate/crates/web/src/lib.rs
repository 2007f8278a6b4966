//! Browser bindings: a few survival curves computed in WebAssembly.
//!
//! Every exported function returns one value per measurement `n = 1..=n_max`
//! (time `t = nτ`). The `*_series` functions hold the logic and are plain
//! Rust so they can be tested natively.

use lattice_zeno::dynamics::{evolve, step_operator, InitialState, MeasurementProtocol};
use lattice_zeno::effective::{open_chain_survival, ring_survival};
use lattice_zeno::lattice::build;
use lattice_zeno::meanfield::{mf_series, mf_solve};
use lattice_zeno::{DetectorLayout, Geometry, LatticeSpec};
use wasm_bindgen::prelude::*;

/// Largest accepted `n_max`.
pub const MAX_STEPS: usize = 200_000;

fn check(n_max: usize) -> Result<(), String> {
    if n_max == 0 || n_max > MAX_STEPS {
        return Err(format!("n_max must lie in 1..={MAX_STEPS}, got {n_max}"));
    }
    Ok(())
}

fn exact(
    geometry: Geometry,
    n: usize,
    ell: usize,
    tau: f64,
    n_max: usize,
) -> Result<Vec<f64>, String> {
    check(n_max)?;
    let (h, d) =
        build(&LatticeSpec::new(geometry, n, DetectorLayout::End)).map_err(|e| e.to_string())?;
    let psi = InitialState::Position(ell)
        .prepare(&h, &d)
        .map_err(|e| e.to_string())?;
    let u = step_operator(&h, &d, tau).map_err(|e| e.to_string())?;
    let proto = MeasurementProtocol::new(tau, n_max).map_err(|e| e.to_string())?;
    let s = evolve(&u, &psi, &proto).map_err(|e| e.to_string())?;
    Ok(s.survival().collect())
}

/// Exact survival on the open chain with a detector on site `n`.
pub fn chain_exact_series(
    n: usize,
    ell: usize,
    tau: f64,
    n_max: usize,
) -> Result<Vec<f64>, String> {
    exact(Geometry::ChainOpen, n, ell, tau, n_max)
}

/// Perturbative closed-form survival for the same chain.
pub fn chain_perturbative_series(
    n: usize,
    ell: usize,
    tau: f64,
    n_max: usize,
) -> Result<Vec<f64>, String> {
    check(n_max)?;
    (1..=n_max)
        .map(|k| open_chain_survival(n, ell, tau, k as f64 * tau).map_err(|e| e.to_string()))
        .collect()
}

/// Exact survival on the ring with a detector on site `n`.
pub fn ring_exact_series(n: usize, ell: usize, tau: f64, n_max: usize) -> Result<Vec<f64>, String> {
    exact(Geometry::Ring, n, ell, tau, n_max)
}

/// Long-time survival on the even ring.
pub fn ring_plateau_value(n: usize, ell: usize) -> Result<f64, String> {
    ring_survival(n, ell, 1.0, 0.0)
        .map(|r| r.plateau)
        .map_err(|e| e.to_string())
}

/// First-detection probabilities `p_n` of the complete graph.
pub fn meanfield_detection_series(
    n: usize,
    tau: f64,
    ell: usize,
    n_max: usize,
) -> Result<Vec<f64>, String> {
    check(n_max)?;
    let sol = mf_solve(n, tau).map_err(|e| e.to_string())?;
    let s = mf_series(&sol, ell, n_max).map_err(|e| e.to_string())?;
    Ok(s.detection().collect())
}

fn js<T>(r: Result<T, String>) -> Result<T, JsError> {
    r.map_err(|e| JsError::new(&e))
}

#[wasm_bindgen]
pub fn chain_exact(n: usize, ell: usize, tau: f64, n_max: usize) -> Result<Vec<f64>, JsError> {
    js(chain_exact_series(n, ell, tau, n_max))
}

#[wasm_bindgen]
pub fn chain_perturbative(
    n: usize,
    ell: usize,
    tau: f64,
    n_max: usize,
) -> Result<Vec<f64>, JsError> {
    js(chain_perturbative_series(n, ell, tau, n_max))
}

#[wasm_bindgen]
pub fn ring_exact(n: usize, ell: usize, tau: f64, n_max: usize) -> Result<Vec<f64>, JsError> {
    js(ring_exact_series(n, ell, tau, n_max))
}

#[wasm_bindgen]
pub fn ring_plateau(n: usize, ell: usize) -> Result<f64, JsError> {
    js(ring_plateau_value(n, ell))
}

#[wasm_bindgen]
pub fn meanfield_detection(
    n: usize,
    tau: f64,
    ell: usize,
    n_max: usize,
) -> Result<Vec<f64>, JsError> {
    js(meanfield_detection_series(n, tau, ell, n_max))
}
