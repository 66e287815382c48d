//! Python bindings for the tagqkd simulator.
//!
//! Unitaries cross the boundary as 2x2 nested lists of complex numbers,
//! states as flat lists of complex amplitudes.

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use tagqkd::experiment;
use tagqkd::pairstate;
use tagqkd::protocol;
use tagqkd::qcore;

type Matrix = [[Complex64; 2]; 2];

fn unitary_from_py(entries: Matrix) -> PyResult<qcore::Unitary2> {
    qcore::Unitary2::from_entries(entries).map_err(|e| PyValueError::new_err(e.to_string()))
}

fn unitary_to_py(u: &qcore::Unitary2) -> Matrix {
    u.entries()
}

/// Haar-random SU(2) matrix from a seeded stream.
#[pyfunction]
fn haar_su2(seed: u64, trial: u64) -> Matrix {
    let mut rng = qcore::RngStream::substream(seed, 0, trial);
    unitary_to_py(&qcore::haar_su2(&mut rng))
}

/// Bell-sector weights (delta1, delta2, delta3) of U⊗U applied to the
/// triplet |Psi+>.
#[pyfunction]
fn bell_decompose(entries: Matrix) -> PyResult<(Complex64, Complex64, Complex64)> {
    let u = unitary_from_py(entries)?;
    let w = qcore::bell_decompose(&u).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((w.delta1, w.delta2, w.delta3))
}

/// <Psi-| U⊗U |Psi->; det(U), so 1 on SU(2).
#[pyfunction]
fn singlet_image(entries: Matrix) -> PyResult<Complex64> {
    let u = unitary_from_py(entries)?;
    Ok(qcore::singlet_image(&u))
}

/// Closed-form post-selection acceptance probability |(1 + delta1)/2|^2.
#[pyfunction]
fn postselect_probability(entries: Matrix) -> PyResult<f64> {
    let u = unitary_from_py(entries)?;
    pairstate::postselect_probability_closed_form(&u)
        .map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Full pipeline for one pair: encode, collective noise, Bob's tag, random
/// phase gate, post-selection. Returns ((gamma_HV, gamma_VH, gamma_VV,
/// gamma_HH), probability).
#[pyfunction]
#[pyo3(signature = (alpha, beta, entries, phi_a = 0.0, phi_b = 0.0, theta = 0.0))]
fn simulate_pair(
    alpha: Complex64,
    beta: Complex64,
    entries: Matrix,
    phi_a: f64,
    phi_b: f64,
    theta: f64,
) -> PyResult<((Complex64, Complex64, Complex64, Complex64), f64)> {
    let u = unitary_from_py(entries)?;
    let (state, probability) = protocol::honest_pair(alpha, beta, &u, phi_a, phi_b, theta)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let g = state.gamma();
    Ok(((g[0], g[1], g[2], g[3]), probability))
}

fn parse_kind(noise: &str, policy: &str, eve: &str) -> PyResult<(protocol::NoiseKind, protocol::BobPolicy, protocol::EvePolicy)> {
    // reuse the CLI config grammar for the enum fields
    let text = format!("n_pairs = 1\nseed = 0\nnoise = {noise}\npolicy = {policy}\neve = {eve}\n");
    let config = experiment::parse_session_config(&text)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((config.noise, config.policy, config.eve))
}

/// Runs a QKD session and returns the statistics as a dict.
#[pyfunction]
#[pyo3(signature = (n_pairs, seed, noise = "fixed", policy = "identity", eve = "none", loss_per_photon = 0.0, sample_fraction_for_qber = 0.25))]
#[allow(clippy::too_many_arguments)]
fn run_session<'py>(
    py: Python<'py>,
    n_pairs: usize,
    seed: u64,
    noise: &str,
    policy: &str,
    eve: &str,
    loss_per_photon: f64,
    sample_fraction_for_qber: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let (noise, policy, eve) = parse_kind(noise, policy, eve)?;
    let config = protocol::SessionConfig {
        n_pairs,
        noise,
        policy,
        eve,
        loss_per_photon,
        seed,
        sample_fraction_for_qber,
    };
    config
        .validate()
        .map_err(PyValueError::new_err)?;
    let stats = protocol::run_session(&config)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    let dict = PyDict::new(py);
    dict.set_item("sent", stats.sent)?;
    dict.set_item("surviving_loss", stats.surviving_loss)?;
    dict.set_item("post_selected", stats.post_selected)?;
    dict.set_item("sifted", stats.sifted)?;
    dict.set_item("sampled_for_qber", stats.sampled_for_qber)?;
    dict.set_item("errors_in_sample", stats.errors_in_sample)?;
    dict.set_item("qber", stats.qber)?;
    dict.set_item("post_select_rate", stats.post_select_rate)?;
    dict.set_item("intrinsic_efficiency", stats.intrinsic_efficiency)?;
    Ok(dict)
}

/// Monte Carlo of the acceptance probability over Haar-random unitaries:
/// (mean, std_error, max |closed form - simulation|).
#[pyfunction]
fn postselect_stats(trials: u64, seed: u64) -> PyResult<(f64, f64, f64)> {
    let (report, _) = experiment::postselect_stats(trials, seed)
        .map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok((report.mean_acceptance, report.std_error, report.max_discrepancy))
}

#[pymodule]
fn tagqkd_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_function(wrap_pyfunction!(haar_su2, m)?)?;
    m.add_function(wrap_pyfunction!(bell_decompose, m)?)?;
    m.add_function(wrap_pyfunction!(singlet_image, m)?)?;
    m.add_function(wrap_pyfunction!(postselect_probability, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_pair, m)?)?;
    m.add_function(wrap_pyfunction!(run_session, m)?)?;
    m.add_function(wrap_pyfunction!(postselect_stats, m)?)?;
    Ok(())
}
