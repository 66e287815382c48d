//! Bob's measurement procedures on the post-selected polarization state:
//! the symmetric-beamsplitter circuit for measuring the logical qubit in an
//! arbitrary basis, the computational/diagonal QKD measurements with
//! contamination discard, and the random phase gate.

use num_complex::Complex64;
use thiserror::Error;

use crate::pairstate::{PolPairState, PairError, POL_HH, POL_HV, POL_VH, POL_VV};
use crate::qcore::{C64, RngStream, TOL_INPUT};

#[derive(Debug, Error, PartialEq)]
pub enum MeasurementError {
    #[error("input state is contaminated (weight {weight:.3e} outside span{{HV, VH}}); discard first")]
    Contaminated { weight: f64 },
    #[error(transparent)]
    Pair(#[from] PairError),
}

/// QKD measurement basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    /// `{|HV>, |VH>}` — measure each photon's H/V polarization.
    Computational,
    /// `{|Psi+>, |Psi->}` — Hadamard on both photons, then H/V.
    Diagonal,
}

/// Outcome of a QKD measurement on one pair.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QkdOutcome {
    Bit(u8),
    /// Landed in the {HH, VV} sector (computational basis only).
    Contaminated,
    /// No conclusive result (pair discarded before measurement).
    Inconclusive,
}

/// Pauli correction frame left on the unmeasured photon by the beamsplitter
/// circuit.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PauliCorrection {
    I,
    X,
    Z,
    XZ,
}

impl PauliCorrection {
    pub fn matrix(&self) -> [[C64; 2]; 2] {
        let zero = C64::new(0.0, 0.0);
        let one = C64::new(1.0, 0.0);
        match self {
            PauliCorrection::I => [[one, zero], [zero, one]],
            PauliCorrection::X => [[zero, one], [one, zero]],
            PauliCorrection::Z => [[one, zero], [zero, -one]],
            // X then Z reading right-to-left: Z * X
            PauliCorrection::XZ => [[zero, one], [-one, zero]],
        }
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        let m = self.matrix();
        [
            m[0][0] * v[0] + m[0][1] * v[1],
            m[1][0] * v[0] + m[1][1] * v[1],
        ]
    }
}

/// Correction frame for the branch record (p, k).
///
/// The table is frozen from the brute-force collapse oracle (see tests):
/// with the logical qubit carried as `alpha |H> + beta |V>` on the
/// unmeasured photon, measuring photon A (p = 0) leaves an X-type frame and
/// measuring photon B (p = 1) leaves the identity-type frame; a `|->`
/// outcome (k = 1) adds a Z.
pub fn pauli_frame(p: u8, k: u8) -> PauliCorrection {
    match (p, k) {
        (0, 0) => PauliCorrection::X,
        (0, 1) => PauliCorrection::XZ,
        (1, 0) => PauliCorrection::I,
        _ => PauliCorrection::Z,
    }
}

/// A single-photon polarization measurement basis for the beamsplitter
/// circuit's adjustable gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeasurementBasis {
    states: [[C64; 2]; 2],
}

impl MeasurementBasis {
    /// Basis from Bloch angles: `|m0> = cos(theta/2)|H> + e^{i phi}
    /// sin(theta/2)|V>` and its orthogonal complement.
    pub fn from_bloch(theta: f64, phi: f64) -> Self {
        let c = (theta / 2.0).cos();
        let s = (theta / 2.0).sin();
        let e = C64::from_polar(1.0, phi);
        Self {
            states: [
                [C64::new(c, 0.0), e * s],
                [C64::new(s, 0.0), -e * c],
            ],
        }
    }

    pub fn computational() -> Self {
        Self::from_bloch(0.0, 0.0)
    }

    pub fn diagonal() -> Self {
        Self::from_bloch(std::f64::consts::FRAC_PI_2, 0.0)
    }

    pub fn state(&self, index: usize) -> [C64; 2] {
        self.states[index]
    }

    /// True when `correction` maps the basis onto itself as a set (up to
    /// phases), possibly swapping the two outcomes. The preset gate then
    /// still implements this basis under that frame.
    pub fn preserved_by(&self, correction: PauliCorrection) -> bool {
        let mapped0 = correction.apply(self.states[0]);
        let overlap_keep = inner2(self.states[0], mapped0).norm();
        let overlap_swap = inner2(self.states[1], mapped0).norm();
        overlap_keep > 1.0 - TOL_INPUT || overlap_swap > 1.0 - TOL_INPUT
    }
}

fn inner2(bra: [C64; 2], ket: [C64; 2]) -> C64 {
    bra[0].conj() * ket[0] + bra[1].conj() * ket[1]
}

/// Record of one pass through the beamsplitter circuit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BeamsplitterRecord {
    /// Photons exited different branches.
    pub split: bool,
    /// 0 if photon A (the first photon) took branch b1; defined when split.
    pub p: Option<u8>,
    /// 0 if the branch-b1 photon measured `|+>`; defined when split.
    pub k: Option<u8>,
    /// Bit in the target basis when the frame allowed the preset gate to
    /// measure it; `None` otherwise.
    pub final_outcome: Option<u8>,
}

const PLUS: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, std::f64::consts::FRAC_1_SQRT_2];
const MINUS: [f64; 2] = [std::f64::consts::FRAC_1_SQRT_2, -std::f64::consts::FRAC_1_SQRT_2];

/// Collapsed state of the unmeasured (branch-b2) photon given the branch
/// record (p, k), together with the Born probability of that k outcome.
///
/// `p` selects which photon was measured in the `{|+>, |->}` basis: photon A
/// for `p = 0`, photon B for `p = 1`. The returned 2-vector is normalized.
pub fn collapsed_b2_state(
    state: &PolPairState,
    p: u8,
    k: u8,
) -> Result<([C64; 2], f64), MeasurementError> {
    let psi = state.as_matrix();
    let basis = if k == 0 { PLUS } else { MINUS };
    let mut collapsed = [C64::new(0.0, 0.0); 2];
    for remaining in 0..2 {
        let mut acc = C64::new(0.0, 0.0);
        for measured in 0..2 {
            let joint = if p == 0 {
                psi[measured][remaining]
            } else {
                psi[remaining][measured]
            };
            acc += basis[measured] * joint;
        }
        collapsed[remaining] = acc;
    }
    let prob = collapsed[0].norm_sqr() + collapsed[1].norm_sqr();
    if prob < 1e-15 {
        return Ok(([C64::new(0.0, 0.0); 2], 0.0));
    }
    let scale = prob.sqrt();
    Ok(([collapsed[0] / scale, collapsed[1] / scale], prob))
}

/// Exact Born weight of the joint branch event `{split, p, k}` for a state
/// in the code space: `1/2 (split) * 1/2 (routing) * P(k | p)`.
pub fn branch_weight(state: &PolPairState, p: u8, k: u8) -> Result<f64, MeasurementError> {
    reject_contaminated(state)?;
    let (_, prob_k) = collapsed_b2_state(state, p, k)?;
    Ok(0.5 * 0.5 * prob_k)
}

fn reject_contaminated(state: &PolPairState) -> Result<(), MeasurementError> {
    let weight = state.contamination();
    if weight >= TOL_INPUT {
        return Err(MeasurementError::Contaminated { weight });
    }
    Ok(())
}

/// One pass through the symmetric-beamsplitter circuit of the
/// arbitrary-basis measurement.
///
/// Photons are routed independently to the two branches; when they split,
/// the branch-b1 photon is measured in the `{|+>, |->}` basis giving `k`,
/// leaving the branch-b2 photon carrying the logical qubit up to the Pauli
/// frame `pauli_frame(p, k)`. The preset gate measures it in `target`
/// whenever that frame preserves the basis; the identity frame always does,
/// so every basis succeeds with probability at least 1/8.
pub fn beamsplitter_measure(
    state: &PolPairState,
    target: &MeasurementBasis,
    rng: &mut RngStream,
) -> Result<BeamsplitterRecord, MeasurementError> {
    reject_contaminated(state)?;
    let route_a = rng.bit();
    let route_b = rng.bit();
    if route_a == route_b {
        return Ok(BeamsplitterRecord {
            split: false,
            p: None,
            k: None,
            final_outcome: None,
        });
    }
    // p = 0 when photon A exited branch b1 (branch 0)
    let p = route_a;
    let (_, prob_k0) = collapsed_b2_state(state, p, 0)?;
    let k = if rng.bernoulli(prob_k0) { 0 } else { 1 };
    let (collapsed, _) = collapsed_b2_state(state, p, k)?;

    let frame = pauli_frame(p, k);
    let final_outcome = if target.preserved_by(frame) {
        // measure in {P m0, P m1}; the outcome index already undoes any
        // swap the frame introduced
        let m0 = frame.apply(target.state(0));
        let prob0 = inner2(m0, collapsed).norm_sqr();
        Some(if rng.bernoulli(prob0) { 0 } else { 1 })
    } else {
        None
    };
    Ok(BeamsplitterRecord {
        split: true,
        p: Some(p),
        k: Some(k),
        final_outcome,
    })
}

fn hadamard2(v: [C64; 2]) -> [C64; 2] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    [r * (v[0] + v[1]), r * (v[0] - v[1])]
}

/// Born probabilities over (HH, HV, VH, VV) after the optional basis change.
fn outcome_weights(state: &PolPairState, basis: Basis) -> [[f64; 2]; 2] {
    let mut psi = state.as_matrix();
    if basis == Basis::Diagonal {
        // Hadamard on both photons
        let mut rotated = [[C64::new(0.0, 0.0); 2]; 2];
        for col in 0..2 {
            let column = hadamard2([psi[0][col], psi[1][col]]);
            rotated[0][col] = column[0];
            rotated[1][col] = column[1];
        }
        for (row_out, row_in) in psi.iter_mut().zip(rotated.iter()) {
            let transformed = hadamard2(*row_in);
            *row_out = transformed;
        }
    }
    let mut weights = [[0.0; 2]; 2];
    for a in 0..2 {
        for b in 0..2 {
            weights[a][b] = psi[a][b].norm_sqr();
        }
    }
    weights
}

/// Bob's QKD measurement.
///
/// Computational: measure each photon's H/V polarization; `HV -> 0`,
/// `VH -> 1`, equal polarizations are contaminated and discarded. Diagonal:
/// Hadamard both photons first; equal polarizations then signal `|Psi+>`
/// (bit 0), different `|Psi->` (bit 1).
pub fn qkd_measure(state: &PolPairState, basis: Basis, rng: &mut RngStream) -> QkdOutcome {
    let weights = outcome_weights(state, basis);
    let total: f64 = weights.iter().flatten().sum();
    let mut draw = rng.uniform() * total;
    let mut outcome = (1, 1);
    'sample: for a in 0..2 {
        for b in 0..2 {
            draw -= weights[a][b];
            if draw <= 0.0 {
                outcome = (a, b);
                break 'sample;
            }
        }
    }
    match basis {
        Basis::Computational => match outcome {
            (0, 1) => QkdOutcome::Bit(0),
            (1, 0) => QkdOutcome::Bit(1),
            _ => QkdOutcome::Contaminated,
        },
        Basis::Diagonal => {
            if outcome.0 == outcome.1 {
                QkdOutcome::Bit(0)
            } else {
                QkdOutcome::Bit(1)
            }
        }
    }
}

/// Exact outcome distribution of [`qkd_measure`] (for Born-sum checks).
pub fn qkd_outcome_probabilities(state: &PolPairState, basis: Basis) -> [(QkdOutcome, f64); 3] {
    let w = outcome_weights(state, basis);
    match basis {
        Basis::Computational => [
            (QkdOutcome::Bit(0), w[0][1]),
            (QkdOutcome::Bit(1), w[1][0]),
            (QkdOutcome::Contaminated, w[0][0] + w[1][1]),
        ],
        Basis::Diagonal => [
            (QkdOutcome::Bit(0), w[0][0] + w[1][1]),
            (QkdOutcome::Bit(1), w[0][1] + w[1][0]),
            (QkdOutcome::Contaminated, 0.0),
        ],
    }
}

/// Phase gate `e^{i theta}` per V photon: `|HH> -> |HH>`, `|HV>, |VH> ->
/// e^{i theta}`, `|VV> -> e^{2 i theta}`. Diagonal, so every sector weight
/// `|gamma_i|^2` is untouched.
pub fn random_phase_gate(state: &PolPairState, theta: f64) -> PolPairState {
    let one_v = Complex64::from_polar(1.0, theta);
    let two_v = Complex64::from_polar(1.0, 2.0 * theta);
    let g = state.gamma();
    PolPairState::from_amplitudes([g[POL_HV] * one_v, g[POL_VH] * one_v, g[POL_VV] * two_v, g[POL_HH]])
        .expect("diagonal phase preserves the norm")
}
