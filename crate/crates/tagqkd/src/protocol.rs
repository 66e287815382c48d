//! End-to-end QKD sessions: Alice's four-state source, the time-varying
//! collective-noise channel with loss and an optional intercept-resend
//! eavesdropper, Bob's rotation policy + tag + post-selection + basis
//! measurement, sifting and session statistics.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::measurement::{qkd_measure, Basis, QkdOutcome};
use crate::pairstate::{
    apply_collective, apply_tag, encode, postselect, PairError, PairState, Polarization,
    PolPairState, TagSpec,
};
use crate::qcore::{haar_su2, C64, RngStream, Unitary2};

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("Alice and Bob records are misaligned at position {position}")]
    Misaligned { position: usize },
    #[error(transparent)]
    Pair(#[from] PairError),
}

/// One entry of Alice's preparation log.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AliceRecord {
    pub bit: u8,
    pub basis: Basis,
    pub pair_index: usize,
}

/// Bob's per-pair result.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BobRecord {
    pub accepted: bool,
    pub basis: Basis,
    pub outcome: QkdOutcome,
    pub pair_index: usize,
}

/// Bob's pre-tag rotation policy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum BobPolicy {
    /// No rotation; efficiency depends entirely on the channel.
    Identity,
    /// Fresh Haar-random B per pair; environment-independent 1/3 acceptance.
    UniformHaar,
    /// `B = (U')†` where `U'` is the channel unitary off by a rotation of
    /// fixed angle epsilon about a random axis. `epsilon = 0` undoes the
    /// channel exactly.
    Feedback { epsilon: f64 },
}

/// Channel noise process; emits one collective unitary per pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum NoiseKind {
    /// Constant unitary for the whole session (Euler-free: identity) —
    /// see [`NoiseProcess::fixed`] for an arbitrary constant.
    Fixed,
    /// Independent Haar sample per pair.
    IidHaar,
    /// Composes a rotation of Gaussian angle (std `step_sigma`) about a
    /// random axis onto the current unitary between pairs.
    RandomWalk { step_sigma: f64 },
}

#[derive(Debug, Clone)]
pub struct NoiseProcess {
    kind: NoiseKind,
    current: Unitary2,
}

impl NoiseProcess {
    pub fn fixed(u: Unitary2) -> Self {
        Self {
            kind: NoiseKind::Fixed,
            current: u,
        }
    }

    pub fn iid_haar(rng: &mut RngStream) -> Self {
        Self {
            kind: NoiseKind::IidHaar,
            current: haar_su2(rng),
        }
    }

    pub fn random_walk(step_sigma: f64, start: Unitary2) -> Self {
        Self {
            kind: NoiseKind::RandomWalk { step_sigma },
            current: start,
        }
    }

    pub fn current(&self) -> &Unitary2 {
        &self.current
    }

    /// Advances to the unitary for the next pair.
    pub fn advance(&mut self, rng: &mut RngStream) {
        match self.kind {
            NoiseKind::Fixed => {}
            NoiseKind::IidHaar => self.current = haar_su2(rng),
            NoiseKind::RandomWalk { step_sigma } => {
                let axis = rng.unit_axis();
                let angle = rng.normal(step_sigma);
                self.current = Unitary2::rotation_about(axis, angle).compose(&self.current);
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EvePolicy {
    None,
    InterceptResend,
}

/// Full configuration of one QKD session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub n_pairs: usize,
    pub noise: NoiseKind,
    pub policy: BobPolicy,
    pub eve: EvePolicy,
    /// Per-photon erasure probability; the pair is lost if either photon is.
    pub loss_per_photon: f64,
    pub seed: u64,
    /// Fraction of the sifted key disclosed to estimate the QBER.
    pub sample_fraction_for_qber: f64,
}

impl SessionConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.n_pairs < 1 {
            return Err("n_pairs must be at least 1".into());
        }
        if !(0.0..1.0).contains(&self.loss_per_photon) {
            return Err("loss_per_photon must be in [0, 1)".into());
        }
        if !(0.0..=1.0).contains(&self.sample_fraction_for_qber) {
            return Err("sample_fraction_for_qber must be in [0, 1]".into());
        }
        if let BobPolicy::Feedback { epsilon } = self.policy {
            if epsilon < 0.0 {
                return Err("feedback epsilon must be non-negative".into());
            }
        }
        if let NoiseKind::RandomWalk { step_sigma } = self.noise {
            if step_sigma < 0.0 {
                return Err("random-walk step_sigma must be non-negative".into());
            }
        }
        Ok(())
    }
}

/// Aggregated outcome of one session.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SessionStats {
    pub sent: usize,
    pub surviving_loss: usize,
    pub post_selected: usize,
    pub sifted: usize,
    pub sampled_for_qber: usize,
    pub errors_in_sample: usize,
    pub qber: f64,
    /// Acceptance rate among pairs that survived loss.
    pub post_select_rate: f64,
    /// Sifted bits per transmitted pair.
    pub intrinsic_efficiency: f64,
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn state_amplitudes(bit: u8, basis: Basis) -> (C64, C64) {
    let zero = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let r = Complex64::new(FRAC_1_SQRT_2, 0.0);
    match (basis, bit) {
        (Basis::Computational, 0) => (one, zero),
        (Basis::Computational, _) => (zero, one),
        (Basis::Diagonal, 0) => (r, r),
        (Basis::Diagonal, _) => (r, -r),
    }
}

/// Alice's source: one of the four BB84 signal states in the tagged
/// encoding, with a fresh interferometer phase.
pub fn alice_prepare(bit: u8, basis: Basis, rng: &mut RngStream) -> PairState {
    let (alpha, beta) = state_amplitudes(bit, basis);
    encode(alpha, beta, rng.angle()).expect("signal amplitudes are normalized")
}

/// Transmits one pair: erases it with probability `1 - (1 - eta)^2`,
/// otherwise applies the process's current collective unitary. The process
/// advances either way.
pub fn channel_transmit(
    state: &PairState,
    noise: &mut NoiseProcess,
    eta: f64,
    rng: &mut RngStream,
) -> Result<Option<PairState>, ProtocolError> {
    let lost = rng.bernoulli(eta) | rng.bernoulli(eta);
    let result = if lost {
        None
    } else {
        Some(apply_collective(state, noise.current())?)
    };
    noise.advance(rng);
    Ok(result)
}

/// Intercept-resend attack in Alice's frame: Eve measures the logical qubit
/// in a uniformly random BB84 basis and re-prepares what she observed.
pub fn eve_intercept_resend(
    state: &PairState,
    rng: &mut RngStream,
) -> Result<PairState, ProtocolError> {
    let basis = if rng.bit() == 0 {
        Basis::Computational
    } else {
        Basis::Diagonal
    };
    let mut weights = [0.0; 2];
    for bit in 0..2u8 {
        let (alpha, beta) = state_amplitudes(bit, basis);
        let reference = encode(alpha, beta, 0.0)?;
        weights[bit as usize] = reference.fidelity(state);
    }
    let total = weights[0] + weights[1];
    let observed = if total > 0.0 && rng.bernoulli(weights[0] / total) {
        0
    } else {
        1
    };
    Ok(alice_prepare(observed, basis, rng))
}

fn bob_rotation(policy: BobPolicy, channel_u: &Unitary2, rng: &mut RngStream) -> Unitary2 {
    match policy {
        BobPolicy::Identity => Unitary2::identity(),
        BobPolicy::UniformHaar => haar_su2(rng),
        BobPolicy::Feedback { epsilon } => {
            let estimate_error = Unitary2::rotation_about(rng.unit_axis(), epsilon);
            estimate_error.compose(channel_u).adjoint()
        }
    }
}

/// Bob's receiver for one pair: rotation B per policy, tag `T_H` with a
/// fresh interferometer phase, random phase gate, post-selection (sampled at
/// the exact acceptance probability), then a uniformly chosen basis
/// measurement.
///
/// `channel_u` is the collective unitary the pair actually saw; only the
/// feedback policy reads it.
pub fn bob_receive(
    state: &PairState,
    policy: BobPolicy,
    channel_u: &Unitary2,
    pair_index: usize,
    rng: &mut RngStream,
) -> Result<BobRecord, ProtocolError> {
    let rotation = bob_rotation(policy, channel_u, rng);
    let state = apply_collective(state, &rotation)?;
    let state = apply_tag(
        &state,
        TagSpec {
            axis: Polarization::H,
            phase: rng.angle(),
        },
    )?;
    // random phase gate: e^{i theta} per V photon, diagonal in polarization
    let state = apply_collective(&state, &Unitary2::phase_on_v(rng.angle()))?;
    let basis = if rng.bit() == 0 {
        Basis::Computational
    } else {
        Basis::Diagonal
    };
    let (pol_state, probability) = match postselect(&state) {
        Ok(result) => result,
        Err(PairError::EmptyPostSelection) => {
            return Ok(BobRecord {
                accepted: false,
                basis,
                outcome: QkdOutcome::Inconclusive,
                pair_index,
            })
        }
        Err(e) => return Err(e.into()),
    };
    if !rng.bernoulli(probability) {
        return Ok(BobRecord {
            accepted: false,
            basis,
            outcome: QkdOutcome::Inconclusive,
            pair_index,
        });
    }
    let outcome = qkd_measure(&pol_state, basis, rng);
    Ok(BobRecord {
        accepted: true,
        basis,
        outcome,
        pair_index,
    })
}

/// Keeps the pairs where Bob accepted, the outcome is a bit, and the bases
/// match. Returns (alice_bit, bob_bit) pairs.
pub fn sift(
    alice: &[AliceRecord],
    bob: &[BobRecord],
) -> Result<Vec<(u8, u8)>, ProtocolError> {
    if alice.len() != bob.len() {
        return Err(ProtocolError::Misaligned {
            position: alice.len().min(bob.len()),
        });
    }
    let mut kept = Vec::new();
    for (position, (a, b)) in alice.iter().zip(bob.iter()).enumerate() {
        if a.pair_index != b.pair_index {
            return Err(ProtocolError::Misaligned { position });
        }
        if !b.accepted || a.basis != b.basis {
            continue;
        }
        if let QkdOutcome::Bit(bob_bit) = b.outcome {
            kept.push((a.bit, bob_bit));
        }
    }
    Ok(kept)
}

// Stream ids for substream derivation from the session seed.
const STREAM_NOISE: u64 = 0;
const STREAM_PAIR: u64 = 1;
const STREAM_QBER: u64 = 2;

/// Runs a full session. Deterministic given the config (seed included).
pub fn run_session(config: &SessionConfig) -> Result<SessionStats, ProtocolError> {
    let mut noise_rng = RngStream::substream(config.seed, STREAM_NOISE, 0);
    let mut noise = match config.noise {
        NoiseKind::Fixed => NoiseProcess::fixed(Unitary2::identity()),
        NoiseKind::IidHaar => NoiseProcess::iid_haar(&mut noise_rng),
        NoiseKind::RandomWalk { step_sigma } => {
            NoiseProcess::random_walk(step_sigma, haar_su2(&mut noise_rng))
        }
    };

    let mut alice_log = Vec::with_capacity(config.n_pairs);
    let mut bob_log = Vec::with_capacity(config.n_pairs);
    let mut surviving_loss = 0usize;
    let mut post_selected = 0usize;

    for pair_index in 0..config.n_pairs {
        let mut rng = RngStream::substream(config.seed, STREAM_PAIR, pair_index as u64);
        let bit = rng.bit();
        let basis = if rng.bit() == 0 {
            Basis::Computational
        } else {
            Basis::Diagonal
        };
        alice_log.push(AliceRecord {
            bit,
            basis,
            pair_index,
        });

        let mut state = alice_prepare(bit, basis, &mut rng);
        if config.eve == EvePolicy::InterceptResend {
            state = eve_intercept_resend(&state, &mut rng)?;
        }
        let channel_u = *noise.current();
        let transmitted =
            channel_transmit(&state, &mut noise, config.loss_per_photon, &mut rng)?;
        let record = match transmitted {
            None => BobRecord {
                accepted: false,
                basis: Basis::Computational,
                outcome: QkdOutcome::Inconclusive,
                pair_index,
            },
            Some(state) => {
                surviving_loss += 1;
                let record =
                    bob_receive(&state, config.policy, &channel_u, pair_index, &mut rng)?;
                if record.accepted {
                    post_selected += 1;
                }
                record
            }
        };
        bob_log.push(record);
    }

    let sifted_pairs = sift(&alice_log, &bob_log)?;
    let mut qber_rng = RngStream::substream(config.seed, STREAM_QBER, 0);
    let mut sampled = 0usize;
    let mut errors = 0usize;
    for &(a, b) in &sifted_pairs {
        if qber_rng.bernoulli(config.sample_fraction_for_qber) {
            sampled += 1;
            if a != b {
                errors += 1;
            }
        }
    }
    let qber = if sampled > 0 {
        errors as f64 / sampled as f64
    } else {
        0.0
    };
    Ok(SessionStats {
        sent: config.n_pairs,
        surviving_loss,
        post_selected,
        sifted: sifted_pairs.len(),
        sampled_for_qber: sampled,
        errors_in_sample: errors,
        qber,
        post_select_rate: if surviving_loss > 0 {
            post_selected as f64 / surviving_loss as f64
        } else {
            0.0
        },
        intrinsic_efficiency: sifted_pairs.len() as f64 / config.n_pairs as f64,
    })
}

/// Recovered logical state check used in tests and bindings: runs the honest
/// pipeline for one pair and returns the post-selected state and
/// probability.
pub fn honest_pair(
    alpha: C64,
    beta: C64,
    u: &Unitary2,
    phi_a: f64,
    phi_b: f64,
    theta: f64,
) -> Result<(PolPairState, f64), PairError> {
    let state = encode(alpha, beta, phi_a)?;
    let state = apply_collective(&state, u)?;
    let state = apply_tag(
        &state,
        TagSpec {
            axis: Polarization::H,
            phase: phi_b,
        },
    )?;
    let state = apply_collective(&state, &Unitary2::phase_on_v(theta))?;
    postselect(&state)
}
