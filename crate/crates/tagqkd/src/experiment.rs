//! Experiment drivers behind the CLI: config-file parsing, Monte Carlo
//! summaries and machine-readable output records.
//!
//! Per-trial data is emitted as line-delimited JSON records, aggregates as a
//! single JSON summary document; both carry a schema-version field and
//! round-trip exactly through serde.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measurement::{
    beamsplitter_measure, branch_weight, pauli_frame, MeasurementBasis,
};
use crate::pairstate::{noise_pipeline, postselect_probability_closed_form};
use crate::protocol::{
    run_session, BobPolicy, EvePolicy, NoiseKind, ProtocolError, SessionConfig, SessionStats,
};
use crate::qcore::{haar_su2, C64, QcoreError, RngStream, Unitary2, bell_decompose};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("line {line}: cannot parse `{text}` (expected `key = value`)")]
    Malformed { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: invalid value for `{key}`: {message}")]
    InvalidValue {
        line: usize,
        key: String,
        message: String,
    },
    #[error("missing required key `{key}`")]
    MissingKey { key: String },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Protocol(#[from] ProtocolError),
    #[error(transparent)]
    Qcore(#[from] QcoreError),
    #[error(transparent)]
    Measurement(#[from] crate::measurement::MeasurementError),
    #[error("unitary spec: {0}")]
    UnitarySpec(String),
}

fn parse_policy(value: &str) -> Result<BobPolicy, String> {
    match value {
        "identity" => Ok(BobPolicy::Identity),
        "uniform-haar" => Ok(BobPolicy::UniformHaar),
        other => {
            if let Some(rest) = other.strip_prefix("feedback:") {
                let epsilon: f64 = rest
                    .parse()
                    .map_err(|_| format!("cannot parse feedback angle `{rest}`"))?;
                Ok(BobPolicy::Feedback { epsilon })
            } else {
                Err(format!(
                    "expected identity, uniform-haar or feedback:<epsilon>, got `{other}`"
                ))
            }
        }
    }
}

fn parse_noise(value: &str) -> Result<NoiseKind, String> {
    match value {
        "fixed" | "identity" => Ok(NoiseKind::Fixed),
        "iid-haar" => Ok(NoiseKind::IidHaar),
        other => {
            if let Some(rest) = other.strip_prefix("random-walk:") {
                let step_sigma: f64 = rest
                    .parse()
                    .map_err(|_| format!("cannot parse step sigma `{rest}`"))?;
                Ok(NoiseKind::RandomWalk { step_sigma })
            } else {
                Err(format!(
                    "expected fixed, iid-haar or random-walk:<sigma>, got `{other}`"
                ))
            }
        }
    }
}

fn parse_eve(value: &str) -> Result<EvePolicy, String> {
    match value {
        "none" => Ok(EvePolicy::None),
        "intercept-resend" => Ok(EvePolicy::InterceptResend),
        other => Err(format!(
            "expected none or intercept-resend, got `{other}`"
        )),
    }
}

/// Parses the flat `key = value` session config format.
///
/// Keys mirror the `SessionConfig` fields: `n_pairs`, `noise`, `policy`,
/// `eve`, `loss_per_photon`, `seed`, `sample_fraction_for_qber`. Lines
/// starting with `#` and blank lines are ignored; unknown keys are errors.
pub fn parse_session_config(text: &str) -> Result<SessionConfig, ConfigError> {
    let mut n_pairs: Option<usize> = None;
    let mut noise = NoiseKind::Fixed;
    let mut policy = BobPolicy::Identity;
    let mut eve = EvePolicy::None;
    let mut loss_per_photon = 0.0;
    let mut seed: Option<u64> = None;
    let mut sample_fraction_for_qber = 0.25;

    for (line_index, raw) in text.lines().enumerate() {
        let line = line_index + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let (key, value) = content.split_once('=').ok_or_else(|| ConfigError::Malformed {
            line,
            text: content.to_string(),
        })?;
        let key = key.trim();
        let value = value.trim();
        let invalid = |message: String| ConfigError::InvalidValue {
            line,
            key: key.to_string(),
            message,
        };
        match key {
            "n_pairs" => {
                n_pairs = Some(value.parse().map_err(|_| invalid("expected a positive integer".into()))?)
            }
            "noise" => noise = parse_noise(value).map_err(invalid)?,
            "policy" => policy = parse_policy(value).map_err(invalid)?,
            "eve" => eve = parse_eve(value).map_err(invalid)?,
            "loss_per_photon" => {
                loss_per_photon = value.parse().map_err(|_| invalid("expected a probability".into()))?
            }
            "seed" => seed = Some(value.parse().map_err(|_| invalid("expected a 64-bit integer".into()))?),
            "sample_fraction_for_qber" => {
                sample_fraction_for_qber =
                    value.parse().map_err(|_| invalid("expected a fraction".into()))?
            }
            other => {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: other.to_string(),
                })
            }
        }
    }

    let config = SessionConfig {
        n_pairs: n_pairs.ok_or(ConfigError::MissingKey { key: "n_pairs".into() })?,
        noise,
        policy,
        eve,
        loss_per_photon,
        seed: seed.ok_or(ConfigError::MissingKey { key: "seed".into() })?,
        sample_fraction_for_qber,
    };
    config.validate().map_err(ConfigError::Invalid)?;
    Ok(config)
}

/// Unitary input to `bell-decompose`: raw entries or the Hurwitz angles
/// `(xi, phi1, phi2)` giving `a = cos(xi) e^{i phi1}`, `b = sin(xi) e^{i
/// phi2}`.
pub fn unitary_from_entries(values: &[f64]) -> Result<Unitary2, ExperimentError> {
    if values.len() != 8 {
        return Err(ExperimentError::UnitarySpec(format!(
            "expected 8 numbers (4 complex entries, re/im interleaved), got {}",
            values.len()
        )));
    }
    let e = |i: usize| C64::new(values[2 * i], values[2 * i + 1]);
    let u = Unitary2::from_entries([[e(0), e(1)], [e(2), e(3)]])?;
    if !u.is_special(1e-9) {
        return Err(ExperimentError::UnitarySpec(format!(
            "determinant is not 1 (got {:?}); supply an SU(2) matrix",
            u.det()
        )));
    }
    Ok(u)
}

pub fn unitary_from_angles(values: &[f64]) -> Result<Unitary2, ExperimentError> {
    if values.len() != 3 {
        return Err(ExperimentError::UnitarySpec(format!(
            "expected 3 angles (xi, phi1, phi2), got {}",
            values.len()
        )));
    }
    let (xi, phi1, phi2) = (values[0], values[1], values[2]);
    let a = C64::from_polar(xi.cos(), phi1);
    let b = C64::from_polar(xi.sin(), phi2);
    Ok(Unitary2::from_su2_pair(a, b)?)
}

fn complex_pair(z: C64) -> [f64; 2] {
    [z.re, z.im]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BellDecomposeReport {
    pub schema_version: u32,
    pub delta1: [f64; 2],
    pub delta2: [f64; 2],
    pub delta3: [f64; 2],
    pub normalization_residual: f64,
    pub acceptance_probability: f64,
}

pub fn bell_decompose_report(u: &Unitary2) -> Result<BellDecomposeReport, ExperimentError> {
    let weights = bell_decompose(u)?;
    Ok(BellDecomposeReport {
        schema_version: SCHEMA_VERSION,
        delta1: complex_pair(weights.delta1),
        delta2: complex_pair(weights.delta2),
        delta3: complex_pair(weights.delta3),
        normalization_residual: (weights.norm_sq_sum() - 1.0).abs(),
        acceptance_probability: weights.acceptance_probability(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostselectTrialRecord {
    pub schema_version: u32,
    pub trial: u64,
    pub acceptance: f64,
    /// |closed form - full 36-dim simulation| for this trial's unitary.
    pub discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PostselectStatsReport {
    pub schema_version: u32,
    pub trials: u64,
    pub seed: u64,
    pub mean_acceptance: f64,
    pub std_error: f64,
    pub max_discrepancy: f64,
}

// stream ids for the experiment drivers
const STREAM_POSTSELECT: u64 = 10;
const STREAM_CIRCUIT: u64 = 11;

/// Monte Carlo over Haar-random channel unitaries: per-trial acceptance from
/// the full pipeline, checked against the closed form.
pub fn postselect_stats(
    trials: u64,
    seed: u64,
) -> Result<(PostselectStatsReport, Vec<PostselectTrialRecord>), ExperimentError> {
    let mut records = Vec::with_capacity(trials as usize);
    let (mut sum, mut sum_sq, mut max_discrepancy) = (0.0, 0.0, 0.0f64);
    let alpha = C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
    for trial in 0..trials {
        let mut rng = RngStream::substream(seed, STREAM_POSTSELECT, trial);
        let u = haar_su2(&mut rng);
        let closed = postselect_probability_closed_form(&u)
            .map_err(ProtocolError::from)?;
        let simulated = match noise_pipeline(alpha, alpha, rng.angle(), &u, rng.angle()) {
            Ok((_, probability)) => probability,
            Err(crate::pairstate::PairError::EmptyPostSelection) => 0.0,
            Err(e) => return Err(ProtocolError::from(e).into()),
        };
        let discrepancy = (closed - simulated).abs();
        max_discrepancy = max_discrepancy.max(discrepancy);
        sum += simulated;
        sum_sq += simulated * simulated;
        records.push(PostselectTrialRecord {
            schema_version: SCHEMA_VERSION,
            trial,
            acceptance: simulated,
            discrepancy,
        });
    }
    let n = trials as f64;
    let mean = sum / n;
    let variance = (sum_sq / n - mean * mean).max(0.0);
    Ok((
        PostselectStatsReport {
            schema_version: SCHEMA_VERSION,
            trials,
            seed,
            mean_acceptance: mean,
            std_error: (variance / n).sqrt(),
            max_discrepancy,
        },
        records,
    ))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BasisRateRecord {
    pub schema_version: u32,
    pub theta: f64,
    pub phi: f64,
    pub success_rate: f64,
    pub std_error: f64,
    /// Exact lower bound on this basis's success probability from the Born
    /// weights of the frame-preserving branches.
    pub exact_success_probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureCircuitReport {
    pub schema_version: u32,
    pub trials: u64,
    pub seed: u64,
    pub split_rate: f64,
    pub branch_p0_k0_rate: f64,
    pub min_success_rate: f64,
    pub min_success_std_error: f64,
    pub bases: Vec<BasisRateRecord>,
}

/// Default measurement-basis grid: Bloch angles covering the computational,
/// diagonal and circular bases plus generic directions.
pub fn default_basis_grid() -> Vec<(f64, f64)> {
    let thetas = [
        0.0,
        std::f64::consts::FRAC_PI_4,
        std::f64::consts::FRAC_PI_2,
        2.2,
    ];
    let phis = [0.0, std::f64::consts::FRAC_PI_4, std::f64::consts::FRAC_PI_2];
    let mut grid = Vec::new();
    for &theta in &thetas {
        for &phi in &phis {
            grid.push((theta, phi));
        }
    }
    grid
}

/// Samples the beamsplitter circuit over the basis grid with fresh random
/// logical input states per trial.
pub fn measure_circuit_stats(
    trials: u64,
    seed: u64,
    grid: &[(f64, f64)],
) -> Result<(MeasureCircuitReport, Vec<BasisRateRecord>), ExperimentError> {
    let mut bases = Vec::with_capacity(grid.len());
    let mut split_total = 0u64;
    let mut branch_total = 0u64;
    let mut all_trials = 0u64;
    for (basis_index, &(theta, phi)) in grid.iter().enumerate() {
        let basis = MeasurementBasis::from_bloch(theta, phi);
        let mut successes = 0u64;
        let mut exact_min = f64::INFINITY;
        for trial in 0..trials {
            let mut rng =
                RngStream::substream(seed, STREAM_CIRCUIT + basis_index as u64, trial);
            let w = rng.uniform();
            let alpha = C64::from_polar(w.sqrt(), rng.angle());
            let beta = C64::from_polar((1.0 - w).sqrt(), rng.angle());
            let state = crate::pairstate::PolPairState::logical(alpha, beta)
                .map_err(ProtocolError::from)?;
            let mut exact = 0.0;
            for p in 0..2u8 {
                for k in 0..2u8 {
                    if basis.preserved_by(pauli_frame(p, k)) {
                        exact += branch_weight(&state, p, k)?;
                    }
                }
            }
            exact_min = exact_min.min(exact);
            let record = beamsplitter_measure(&state, &basis, &mut rng)?;
            all_trials += 1;
            if record.split {
                split_total += 1;
                if record.p == Some(0) && record.k == Some(0) {
                    branch_total += 1;
                }
            }
            if record.final_outcome.is_some() {
                successes += 1;
            }
        }
        let rate = successes as f64 / trials as f64;
        bases.push(BasisRateRecord {
            schema_version: SCHEMA_VERSION,
            theta,
            phi,
            success_rate: rate,
            std_error: (rate * (1.0 - rate) / trials as f64).sqrt(),
            exact_success_probability: exact_min,
        });
    }
    let min_record = bases
        .iter()
        .min_by(|a, b| a.success_rate.total_cmp(&b.success_rate))
        .expect("grid is non-empty")
        .clone();
    let report = MeasureCircuitReport {
        schema_version: SCHEMA_VERSION,
        trials,
        seed,
        split_rate: split_total as f64 / all_trials as f64,
        branch_p0_k0_rate: branch_total as f64 / all_trials as f64,
        min_success_rate: min_record.success_rate,
        min_success_std_error: min_record.std_error,
        bases: bases.clone(),
    };
    Ok((report, bases))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QkdRunReport {
    pub schema_version: u32,
    pub config: SessionConfig,
    pub stats: SessionStats,
}

pub fn qkd_run(config: &SessionConfig) -> Result<QkdRunReport, ExperimentError> {
    config.validate().map_err(ConfigError::Invalid)?;
    let stats = run_session(config)?;
    Ok(QkdRunReport {
        schema_version: SCHEMA_VERSION,
        config: *config,
        stats,
    })
}

/// Output format for the CLI: one pretty summary document, or line-delimited
/// per-trial records followed by the summary line.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OutputFormat {
    Summary,
    Records,
}
