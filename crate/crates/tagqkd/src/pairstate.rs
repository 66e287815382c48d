//! Joint state of the photon pair over polarization and tag count, plus the
//! tag operation, collective/single-photon noise, arrival-time arithmetic and
//! post-selection.
//!
//! Photon A is emitted first, photon B follows after the fixed pair
//! separation. Each photon carries a tag count tau in {0, 1, 2}: the number
//! of delay lines it has passed through (at most one per party).

use thiserror::Error;

use crate::qcore::{C64, Unitary2, QcoreError, TOL_INPUT};

/// Number of tag counts a photon can carry (0, 1 or 2).
pub const TAU_STATES: usize = 3;
/// Dimension of the full pair space: (2 pol x 3 tau) per photon, squared.
pub const PAIR_DIM: usize = 36;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Polarization {
    H = 0,
    V = 1,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhotonSlot {
    A,
    B,
}

#[derive(Debug, Error, PartialEq)]
pub enum PairError {
    #[error("amplitudes are not normalized (squared norm {norm_sq})")]
    NotNormalized { norm_sq: f64 },
    #[error("tag count overflow: a photon already tagged twice matched the tag axis")]
    TagOverflow,
    #[error("post-selection probability below threshold (empty post-selection)")]
    EmptyPostSelection,
    #[error(transparent)]
    Qcore(#[from] QcoreError),
}

/// Emission separation and tag delay, in the same arbitrary time unit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimingConfig {
    pair_separation: f64,
    tag_delay: f64,
}

impl TimingConfig {
    /// Requires both durations positive and `2 * tag_delay < pair_separation`
    /// so tags can never reorder the photons' arrival.
    pub fn new(pair_separation: f64, tag_delay: f64) -> Option<Self> {
        if pair_separation > 0.0 && tag_delay > 0.0 && 2.0 * tag_delay < pair_separation {
            Some(Self {
                pair_separation,
                tag_delay,
            })
        } else {
            None
        }
    }

    pub fn pair_separation(&self) -> f64 {
        self.pair_separation
    }

    pub fn tag_delay(&self) -> f64 {
        self.tag_delay
    }
}

/// A tag operation: delay the photons whose polarization equals `axis`,
/// multiplying their amplitude by the interferometer phase `e^{i phase}`
/// picked up on the delay arm.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TagSpec {
    pub axis: Polarization,
    pub phase: f64,
}

#[inline]
fn index(pol_a: usize, tau_a: usize, pol_b: usize, tau_b: usize) -> usize {
    ((pol_a * TAU_STATES + tau_a) * 2 + pol_b) * TAU_STATES + tau_b
}

#[inline]
fn unpack(i: usize) -> (usize, usize, usize, usize) {
    let tau_b = i % TAU_STATES;
    let rest = i / TAU_STATES;
    let pol_b = rest % 2;
    let rest = rest / 2;
    let tau_a = rest % TAU_STATES;
    let pol_a = rest / TAU_STATES;
    (pol_a, tau_a, pol_b, tau_b)
}

/// Pure state of the photon pair, indexed by (pol_A, tau_A, pol_B, tau_B).
#[derive(Debug, Clone, PartialEq)]
pub struct PairState {
    amp: [C64; PAIR_DIM],
}

impl PairState {
    fn zero() -> Self {
        Self {
            amp: [C64::new(0.0, 0.0); PAIR_DIM],
        }
    }

    /// Amplitude on the basis ket |pol_A, tau_A; pol_B, tau_B>.
    pub fn amplitude(
        &self,
        pol_a: Polarization,
        tau_a: usize,
        pol_b: Polarization,
        tau_b: usize,
    ) -> C64 {
        self.amp[index(pol_a as usize, tau_a, pol_b as usize, tau_b)]
    }

    pub fn norm_sq(&self) -> f64 {
        self.amp.iter().map(|a| a.norm_sqr()).sum()
    }

    /// `|<self|other>|^2`, insensitive to global phase.
    pub fn fidelity(&self, other: &Self) -> f64 {
        let overlap: C64 = self
            .amp
            .iter()
            .zip(other.amp.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        overlap.norm_sqr()
    }

    pub fn max_amplitude_difference(&self, other: &Self) -> f64 {
        self.amp
            .iter()
            .zip(other.amp.iter())
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}

/// Alice's encoding: `alpha |H,0; V,1> + beta |V,1; H,0>` up to the global
/// phase `e^{i alice_phase}` from her interferometer.
///
/// Built as the bare polarization state followed by the tag `T_V`; each
/// branch holds exactly one V photon, so the arm phase factors out globally.
pub fn encode(alpha: C64, beta: C64, alice_phase: f64) -> Result<PairState, PairError> {
    let norm_sq = alpha.norm_sqr() + beta.norm_sqr();
    if (norm_sq - 1.0).abs() >= TOL_INPUT {
        return Err(PairError::NotNormalized { norm_sq });
    }
    let mut state = PairState::zero();
    state.amp[index(0, 0, 1, 0)] = alpha; // |H,0; V,0>
    state.amp[index(1, 0, 0, 0)] = beta; // |V,0; H,0>
    apply_tag(
        &state,
        TagSpec {
            axis: Polarization::V,
            phase: alice_phase,
        },
    )
}

/// Applies a tag to both photons independently: every ket whose photon is in
/// the tagged polarization has that photon's tau incremented and its
/// amplitude multiplied by `e^{i phase}`.
pub fn apply_tag(state: &PairState, spec: TagSpec) -> Result<PairState, PairError> {
    let axis = spec.axis as usize;
    let phase = C64::from_polar(1.0, spec.phase);
    let mut out = PairState::zero();
    for (i, &amp) in state.amp.iter().enumerate() {
        if amp.norm_sqr() == 0.0 {
            continue;
        }
        let (pol_a, mut tau_a, pol_b, mut tau_b) = unpack(i);
        let mut factor = C64::new(1.0, 0.0);
        if pol_a == axis {
            if tau_a + 1 >= TAU_STATES {
                return Err(PairError::TagOverflow);
            }
            tau_a += 1;
            factor *= phase;
        }
        if pol_b == axis {
            if tau_b + 1 >= TAU_STATES {
                return Err(PairError::TagOverflow);
            }
            tau_b += 1;
            factor *= phase;
        }
        out.amp[index(pol_a, tau_a, pol_b, tau_b)] += factor * amp;
    }
    Ok(out)
}

/// Collective noise `U⊗U`: the same unitary on both photons' polarization,
/// identity on the tag counts.
pub fn apply_collective(state: &PairState, u: &Unitary2) -> Result<PairState, PairError> {
    let state = apply_single(state, PhotonSlot::A, u)?;
    apply_single(&state, PhotonSlot::B, u)
}

/// `U` on one photon only; used for eavesdropper modeling and for breaking
/// the collective-noise assumption in tests.
pub fn apply_single(
    state: &PairState,
    slot: PhotonSlot,
    u: &Unitary2,
) -> Result<PairState, PairError> {
    let residual = u.unitarity_residual();
    if residual >= TOL_INPUT {
        return Err(QcoreError::NotUnitary { residual }.into());
    }
    let mut out = PairState::zero();
    for (i, &amp) in state.amp.iter().enumerate() {
        if amp.norm_sqr() == 0.0 {
            continue;
        }
        let (pol_a, tau_a, pol_b, tau_b) = unpack(i);
        match slot {
            PhotonSlot::A => {
                for new_pol in 0..2 {
                    out.amp[index(new_pol, tau_a, pol_b, tau_b)] +=
                        u.entry(new_pol, pol_a) * amp;
                }
            }
            PhotonSlot::B => {
                for new_pol in 0..2 {
                    out.amp[index(pol_a, tau_a, new_pol, tau_b)] +=
                        u.entry(new_pol, pol_b) * amp;
                }
            }
        }
    }
    Ok(out)
}

/// Arrival-time separation of the pair: `pair_separation + (tau_B - tau_A) *
/// tag_delay`. Positive by the `TimingConfig` invariant.
pub fn arrival_separation(tau_a: usize, tau_b: usize, timing: &TimingConfig) -> f64 {
    timing.pair_separation() + (tau_b as f64 - tau_a as f64) * timing.tag_delay()
}

/// Post-selected polarization state over (HV, VH, VV, HH).
#[derive(Debug, Clone, PartialEq)]
pub struct PolPairState {
    gamma: [C64; 4],
}

/// Index constants into [`PolPairState`] amplitudes.
pub const POL_HV: usize = 0;
pub const POL_VH: usize = 1;
pub const POL_VV: usize = 2;
pub const POL_HH: usize = 3;

impl PolPairState {
    pub fn from_amplitudes(gamma: [C64; 4]) -> Result<Self, PairError> {
        let norm_sq: f64 = gamma.iter().map(|g| g.norm_sqr()).sum();
        if (norm_sq - 1.0).abs() >= TOL_INPUT {
            return Err(PairError::NotNormalized { norm_sq });
        }
        Ok(Self { gamma })
    }

    /// `alpha |HV> + beta |VH>`, the code space the protocol lives in.
    pub fn logical(alpha: C64, beta: C64) -> Result<Self, PairError> {
        Self::from_amplitudes([alpha, beta, C64::new(0.0, 0.0), C64::new(0.0, 0.0)])
    }

    pub fn gamma(&self) -> [C64; 4] {
        self.gamma
    }

    pub fn norm_sq(&self) -> f64 {
        self.gamma.iter().map(|g| g.norm_sqr()).sum()
    }

    /// Weight outside the {HV, VH} code space.
    pub fn contamination(&self) -> f64 {
        self.gamma[POL_VV].norm_sqr() + self.gamma[POL_HH].norm_sqr()
    }

    pub fn fidelity(&self, other: &Self) -> f64 {
        let overlap: C64 = self
            .gamma
            .iter()
            .zip(other.gamma.iter())
            .map(|(a, b)| a.conj() * b)
            .sum();
        overlap.norm_sqr()
    }

    /// Amplitude matrix psi[pol_A][pol_B] over the bare polarization basis.
    pub fn as_matrix(&self) -> [[C64; 2]; 2] {
        [
            [self.gamma[POL_HH], self.gamma[POL_HV]],
            [self.gamma[POL_VH], self.gamma[POL_VV]],
        ]
    }

    pub fn from_matrix(psi: [[C64; 2]; 2]) -> Result<Self, PairError> {
        Self::from_amplitudes([psi[0][1], psi[1][0], psi[1][1], psi[0][0]])
    }
}

/// Threshold under which post-selection is reported empty.
pub const EMPTY_POSTSELECT_THRESHOLD: f64 = 1e-15;

/// Projects onto equal tag counts (arrival separation exactly the pair
/// separation) and returns the renormalized polarization state together with
/// the acceptance probability.
pub fn postselect(state: &PairState) -> Result<(PolPairState, f64), PairError> {
    let mut kept = [[C64::new(0.0, 0.0); 2]; 2];
    let mut probability = 0.0;
    for (i, &amp) in state.amp.iter().enumerate() {
        let (pol_a, tau_a, pol_b, tau_b) = unpack(i);
        if tau_a == tau_b {
            kept[pol_a][pol_b] += amp;
            probability += amp.norm_sqr();
        }
    }
    if probability < EMPTY_POSTSELECT_THRESHOLD {
        return Err(PairError::EmptyPostSelection);
    }
    let scale = probability.sqrt();
    let gamma = [
        kept[0][1] / scale,
        kept[1][0] / scale,
        kept[1][1] / scale,
        kept[0][0] / scale,
    ];
    Ok((PolPairState { gamma }, probability))
}

/// Closed-form acceptance probability `|(1 + delta1)/2|^2`; equals `|U00|^4`
/// on SU(2).
pub fn postselect_probability_closed_form(u: &Unitary2) -> Result<f64, PairError> {
    Ok(crate::qcore::bell_decompose(u)?.acceptance_probability())
}

/// Runs encode -> collective noise -> Bob tag -> postselect, the protocol's
/// quantum pipeline for one pair.
pub fn noise_pipeline(
    alpha: C64,
    beta: C64,
    alice_phase: f64,
    u: &Unitary2,
    bob_phase: f64,
) -> Result<(PolPairState, f64), PairError> {
    let state = encode(alpha, beta, alice_phase)?;
    let state = apply_collective(&state, u)?;
    let state = apply_tag(
        &state,
        TagSpec {
            axis: Polarization::H,
            phase: bob_phase,
        },
    )?;
    postselect(&state)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qcore::{haar_su2, RngStream, TOL_EXACT};
    use num_complex::Complex64 as C;
    use proptest::prelude::*;

    const R: f64 = std::f64::consts::FRAC_1_SQRT_2;

    fn c(re: f64, im: f64) -> C {
        C::new(re, im)
    }

    fn ket(pol_a: Polarization, tau_a: usize, pol_b: Polarization, tau_b: usize) -> PairState {
        let mut state = PairState::zero();
        state.amp[index(pol_a as usize, tau_a, pol_b as usize, tau_b)] = c(1.0, 0.0);
        state
    }

    fn bit_flip_lift() -> Unitary2 {
        Unitary2::from_su2_pair(c(0.0, 0.0), c(0.0, 1.0)).unwrap()
    }

    #[test]
    fn timing_config_enforces_ordering_invariant() {
        assert!(TimingConfig::new(10.0, 4.0).is_some());
        assert!(TimingConfig::new(10.0, 5.0).is_none());
        assert!(TimingConfig::new(10.0, 0.0).is_none());
        assert!(TimingConfig::new(-1.0, 0.1).is_none());
    }

    #[test]
    fn encode_basis_states() {
        let s = encode(c(1.0, 0.0), c(0.0, 0.0), 0.0).unwrap();
        assert_eq!(
            s.amplitude(Polarization::H, 0, Polarization::V, 1),
            c(1.0, 0.0)
        );
        assert!((s.norm_sq() - 1.0).abs() < TOL_EXACT);

        let plus = encode(c(R, 0.0), c(R, 0.0), 0.0).unwrap();
        assert!((plus.amplitude(Polarization::H, 0, Polarization::V, 1) - c(R, 0.0)).norm() < TOL_EXACT);
        assert!((plus.amplitude(Polarization::V, 1, Polarization::H, 0) - c(R, 0.0)).norm() < TOL_EXACT);
    }

    #[test]
    fn encode_rejects_unnormalized_input() {
        assert!(matches!(
            encode(c(1.0, 0.0), c(1.0, 0.0), 0.0),
            Err(PairError::NotNormalized { .. })
        ));
    }

    #[test]
    fn alice_phase_is_global() {
        let phi = 2.1;
        let a = encode(c(0.6, 0.0), c(0.0, 0.8), phi).unwrap();
        let b = encode(c(0.6, 0.0), c(0.0, 0.8), 0.0).unwrap();
        assert!((a.fidelity(&b) - 1.0).abs() < TOL_EXACT);
        // amplitude-level check: a = e^{i phi} b
        let factor = C::from_polar(1.0, phi);
        for (x, y) in a.amp.iter().zip(b.amp.iter()) {
            assert!((x - factor * y).norm() < TOL_EXACT);
        }
    }

    #[test]
    fn tag_delays_matching_axis_only() {
        let phi = 0.7;
        let tagged = apply_tag(
            &ket(Polarization::H, 0, Polarization::V, 0),
            TagSpec {
                axis: Polarization::V,
                phase: phi,
            },
        )
        .unwrap();
        let expected = C::from_polar(1.0, phi);
        assert!(
            (tagged.amplitude(Polarization::H, 0, Polarization::V, 1) - expected).norm()
                < TOL_EXACT
        );

        let unchanged = apply_tag(
            &ket(Polarization::V, 0, Polarization::V, 0),
            TagSpec {
                axis: Polarization::H,
                phase: phi,
            },
        )
        .unwrap();
        assert_eq!(
            unchanged.amplitude(Polarization::V, 0, Polarization::V, 0),
            c(1.0, 0.0)
        );
    }

    #[test]
    fn tag_overflow_is_rejected() {
        let state = ket(Polarization::V, 2, Polarization::H, 0);
        let err = apply_tag(
            &state,
            TagSpec {
                axis: Polarization::V,
                phase: 0.0,
            },
        )
        .unwrap_err();
        assert_eq!(err, PairError::TagOverflow);
    }

    #[test]
    fn bob_tag_coefficients_at_identity_noise() {
        // After encode(alpha, beta) and Bob's T_H with phase phi_B, the
        // equal-tau kets carry (alpha)(1+delta1)/2 -> alpha at U = I, times
        // one factor of e^{i phi_B} each.
        let (alpha, beta) = (c(0.6, 0.0), c(0.0, 0.8));
        let phi_b = 1.3;
        let state = encode(alpha, beta, 0.0).unwrap();
        let state = apply_tag(
            &state,
            TagSpec {
                axis: Polarization::H,
                phase: phi_b,
            },
        )
        .unwrap();
        let f = C::from_polar(1.0, phi_b);
        assert!(
            (state.amplitude(Polarization::H, 1, Polarization::V, 1) - alpha * f).norm()
                < TOL_EXACT
        );
        assert!(
            (state.amplitude(Polarization::V, 1, Polarization::H, 1) - beta * f).norm()
                < TOL_EXACT
        );
    }

    #[test]
    fn collective_identity_is_identity() {
        let state = encode(c(0.6, 0.0), c(0.8, 0.0), 0.3).unwrap();
        let out = apply_collective(&state, &Unitary2::identity()).unwrap();
        assert!(state.max_amplitude_difference(&out) < TOL_EXACT);
    }

    #[test]
    fn collective_bit_flip_on_basis_ket() {
        // [[0,i],[i,0]]⊗2 |H,0; V,1> = i*i |V,0; H,1> = -|V,0; H,1>
        let out =
            apply_collective(&ket(Polarization::H, 0, Polarization::V, 1), &bit_flip_lift())
                .unwrap();
        assert!(
            (out.amplitude(Polarization::V, 0, Polarization::H, 1) - c(-1.0, 0.0)).norm()
                < TOL_EXACT
        );
    }

    #[test]
    fn collective_noise_preserves_singlet_polarization() {
        // singlet polarization content on a fixed tau pattern
        let mut singlet = PairState::zero();
        singlet.amp[index(0, 1, 1, 0)] = c(R, 0.0);
        singlet.amp[index(1, 1, 0, 0)] = c(-R, 0.0);
        let mut rng = RngStream::new(5);
        for _ in 0..50 {
            let u = haar_su2(&mut rng);
            let out = apply_collective(&singlet, &u).unwrap();
            assert!((out.fidelity(&singlet) - 1.0).abs() < TOL_EXACT);
        }
    }

    #[test]
    fn apply_single_composes_to_collective() {
        let mut rng = RngStream::new(8);
        let u = haar_su2(&mut rng);
        let state = encode(c(0.6, 0.0), c(0.0, 0.8), 0.2).unwrap();
        let via_single = apply_single(
            &apply_single(&state, PhotonSlot::A, &u).unwrap(),
            PhotonSlot::B,
            &u,
        )
        .unwrap();
        let via_collective = apply_collective(&state, &u).unwrap();
        assert!(via_single.max_amplitude_difference(&via_collective) < TOL_EXACT);
    }

    #[test]
    fn apply_single_bit_flip_on_slot_a() {
        let out =
            apply_single(&ket(Polarization::H, 0, Polarization::H, 0), PhotonSlot::A, &bit_flip_lift())
                .unwrap();
        assert!(
            (out.amplitude(Polarization::V, 0, Polarization::H, 0) - c(0.0, 1.0)).norm()
                < TOL_EXACT
        );
    }

    #[test]
    fn apply_single_rejects_non_unitary() {
        let bad = Unitary2::from_entries([[c(1.0, 0.0); 2], [c(0.0, 0.0); 2]]);
        assert!(bad.is_err());
    }

    #[test]
    fn arrival_separation_arithmetic() {
        let timing = TimingConfig::new(10.0, 3.0).unwrap();
        assert_eq!(arrival_separation(1, 1, &timing), 10.0);
        assert_eq!(arrival_separation(0, 1, &timing), 13.0);
        assert_eq!(arrival_separation(2, 0, &timing), 4.0);
        assert!(arrival_separation(2, 0, &timing) > 0.0);
    }

    #[test]
    fn postselect_identity_pipeline_is_lossless() {
        let (alpha, beta) = (c(0.6, 0.0), c(0.0, 0.8));
        let (pol, prob) = noise_pipeline(alpha, beta, 0.0, &Unitary2::identity(), 0.0).unwrap();
        assert!((prob - 1.0).abs() < TOL_EXACT);
        let gamma = pol.gamma();
        assert!((gamma[POL_HV] - alpha).norm() < TOL_EXACT);
        assert!((gamma[POL_VH] - beta).norm() < TOL_EXACT);
    }

    #[test]
    fn postselect_bit_flip_pipeline_is_empty() {
        let err = noise_pipeline(c(R, 0.0), c(R, 0.0), 0.0, &bit_flip_lift(), 0.0).unwrap_err();
        assert_eq!(err, PairError::EmptyPostSelection);
    }

    #[test]
    fn postselect_real_rotation_pipeline() {
        let u = Unitary2::from_su2_pair(c(R, 0.0), c(R, 0.0)).unwrap();
        let (alpha, beta) = (c(0.6, 0.0), c(0.8, 0.0));
        let (pol, prob) = noise_pipeline(alpha, beta, 0.0, &u, 0.0).unwrap();
        assert!((prob - 0.25).abs() < TOL_EXACT);
        let input = PolPairState::logical(alpha, beta).unwrap();
        assert!((pol.fidelity(&input) - 1.0).abs() < TOL_EXACT);
    }

    #[test]
    fn closed_form_matches_full_simulation() {
        let mut rng = RngStream::new(17);
        for _ in 0..1000 {
            let u = haar_su2(&mut rng);
            let closed = postselect_probability_closed_form(&u).unwrap();
            let (_, simulated) = noise_pipeline(c(0.6, 0.0), c(0.0, 0.8), 0.4, &u, 1.9).unwrap();
            assert!((closed - simulated).abs() < TOL_EXACT);
            assert!((closed - u.entry(0, 0).norm_sqr().powi(2)).abs() < TOL_EXACT);
        }
    }

    #[test]
    fn haar_average_acceptance_is_one_third() {
        let n = 100_000;
        let mut rng = RngStream::new(23);
        let mut sum = 0.0;
        let mut sum_sq = 0.0;
        for _ in 0..n {
            let p = postselect_probability_closed_form(&haar_su2(&mut rng)).unwrap();
            sum += p;
            sum_sq += p * p;
        }
        let mean = sum / n as f64;
        let var = sum_sq / n as f64 - mean * mean;
        let se = (var / n as f64).sqrt();
        assert!((mean - 1.0 / 3.0).abs() < 3.0 * se, "mean = {mean}");
    }

    #[test]
    fn recovery_under_collective_noise_and_phases() {
        // central claim: post-selected state equals the input logical state
        // regardless of U, both interferometer phases
        let mut rng = RngStream::new(31);
        for _ in 0..200 {
            let u = haar_su2(&mut rng);
            let phi_a = rng.angle();
            let phi_b = rng.angle();
            let w = rng.uniform();
            let alpha = C::from_polar(w.sqrt(), rng.angle());
            let beta = C::from_polar((1.0 - w).sqrt(), rng.angle());
            match noise_pipeline(alpha, beta, phi_a, &u, phi_b) {
                Ok((pol, _prob)) => {
                    let input = PolPairState::logical(alpha, beta).unwrap();
                    assert!((pol.fidelity(&input) - 1.0).abs() < TOL_EXACT);
                }
                Err(PairError::EmptyPostSelection) => {}
                Err(e) => panic!("unexpected error: {e}"),
            }
        }
    }

    #[test]
    fn non_collective_noise_breaks_recovery() {
        // perturb photon A only; fidelity must drop below 1. The axis needs
        // a z component: the accepted amplitudes pick up U_A[0][0] and
        // U_A[1][1], which stay equal under a pure y rotation.
        let perturb = Unitary2::rotation_about([0.0, 0.0, 1.0], 0.5);
        let (alpha, beta) = (c(0.6, 0.0), c(0.8, 0.0));
        let state = encode(alpha, beta, 0.0).unwrap();
        let state = apply_single(&state, PhotonSlot::A, &perturb).unwrap();
        let state = apply_tag(
            &state,
            TagSpec {
                axis: Polarization::H,
                phase: 0.0,
            },
        )
        .unwrap();
        let (pol, _) = postselect(&state).unwrap();
        let input = PolPairState::logical(alpha, beta).unwrap();
        assert!(pol.fidelity(&input) < 1.0 - 1e-6);

        // same rotation on both photons is collective: recovery is exact
        let (pol, _) = noise_pipeline(alpha, beta, 0.0, &perturb, 0.0).unwrap();
        assert!((pol.fidelity(&input) - 1.0).abs() < TOL_EXACT);
    }

    proptest! {
        #[test]
        fn operations_preserve_norm(seed in 0u64..1_000, weight in 0.01f64..0.99) {
            let mut rng = RngStream::new(seed);
            let alpha = C::from_polar(weight.sqrt(), rng.angle());
            let beta = C::from_polar((1.0 - weight).sqrt(), rng.angle());
            let state = encode(alpha, beta, rng.angle()).unwrap();
            prop_assert!((state.norm_sq() - 1.0).abs() < TOL_EXACT);
            let u = haar_su2(&mut rng);
            let state = apply_collective(&state, &u).unwrap();
            prop_assert!((state.norm_sq() - 1.0).abs() < TOL_EXACT);
            let state = apply_tag(&state, TagSpec { axis: Polarization::H, phase: rng.angle() }).unwrap();
            prop_assert!((state.norm_sq() - 1.0).abs() < TOL_EXACT);
            let state = apply_single(&state, PhotonSlot::B, &haar_su2(&mut rng)).unwrap();
            prop_assert!((state.norm_sq() - 1.0).abs() < TOL_EXACT);
        }

        #[test]
        fn recovery_property(seed in 0u64..2_000) {
            let mut rng = RngStream::new(seed);
            let u = haar_su2(&mut rng);
            let w = rng.uniform();
            let alpha = C::from_polar(w.sqrt(), rng.angle());
            let beta = C::from_polar((1.0 - w).sqrt(), rng.angle());
            match noise_pipeline(alpha, beta, rng.angle(), &u, rng.angle()) {
                Ok((pol, prob)) => {
                    let input = PolPairState::logical(alpha, beta).unwrap();
                    prop_assert!((pol.fidelity(&input) - 1.0).abs() < TOL_EXACT);
                    prop_assert!((prob - u.entry(0, 0).norm_sqr().powi(2)).abs() < TOL_EXACT);
                }
                Err(PairError::EmptyPostSelection) => {}
                Err(e) => return Err(TestCaseError::fail(format!("unexpected error: {e}"))),
            }
        }
    }
}
