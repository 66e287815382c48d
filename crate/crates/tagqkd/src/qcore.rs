//! Minimal complex linear algebra for the two-photon simulator: 2x2 unitaries,
//! Haar sampling on SU(2), the triplet Bell-sector decomposition of `U⊗U`, and
//! the seeded RNG stream everything else draws from.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use std::f64::consts::TAU;

pub type C64 = Complex64;

/// Tolerance for exact algebraic identities (norms, closed forms).
pub const TOL_EXACT: f64 = 1e-12;
/// Tolerance used when validating caller-supplied matrices.
pub const TOL_INPUT: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum QcoreError {
    #[error("matrix is not unitary (residual {residual:.3e})")]
    NotUnitary { residual: f64 },
    #[error("matrix determinant is not 1 (|det - 1| = {deviation:.3e})")]
    NotSpecial { deviation: f64 },
}

/// A 2x2 complex unitary on one photon's polarization space.
///
/// Rows and columns are indexed by polarization, `H = 0`, `V = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Unitary2 {
    entries: [[C64; 2]; 2],
}

impl Unitary2 {
    /// Builds a unitary from raw entries, rejecting matrices whose unitarity
    /// residual exceeds [`TOL_INPUT`].
    pub fn from_entries(entries: [[C64; 2]; 2]) -> Result<Self, QcoreError> {
        let candidate = Self { entries };
        let residual = candidate.unitarity_residual();
        if residual >= TOL_INPUT {
            return Err(QcoreError::NotUnitary { residual });
        }
        Ok(candidate)
    }

    /// SU(2) matrix `[[a, b], [-b*, a*]]` from its first row.
    ///
    /// `|a|^2 + |b|^2` must be 1 within [`TOL_INPUT`].
    pub fn from_su2_pair(a: C64, b: C64) -> Result<Self, QcoreError> {
        Self::from_entries([[a, b], [-b.conj(), a.conj()]])
    }

    pub fn identity() -> Self {
        Self {
            entries: [
                [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
                [C64::new(0.0, 0.0), C64::new(1.0, 0.0)],
            ],
        }
    }

    /// `diag(1, e^{i phase})`; determinant `e^{i phase}`, so not in SU(2)
    /// unless `phase = 0`.
    pub fn phase_on_v(phase: f64) -> Self {
        Self {
            entries: [
                [C64::new(1.0, 0.0), C64::new(0.0, 0.0)],
                [C64::new(0.0, 0.0), C64::from_polar(1.0, phase)],
            ],
        }
    }

    /// SU(2) rotation `exp(-i angle/2 n.sigma)` about the Bloch axis `n`
    /// (normalized internally).
    pub fn rotation_about(axis: [f64; 3], angle: f64) -> Self {
        let norm = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
        let (nx, ny, nz) = if norm > 0.0 {
            (axis[0] / norm, axis[1] / norm, axis[2] / norm)
        } else {
            (0.0, 0.0, 1.0)
        };
        let c = (angle / 2.0).cos();
        let s = (angle / 2.0).sin();
        Self {
            entries: [
                [C64::new(c, -nz * s), C64::new(-ny * s, -nx * s)],
                [C64::new(ny * s, -nx * s), C64::new(c, nz * s)],
            ],
        }
    }

    pub fn entry(&self, row: usize, col: usize) -> C64 {
        self.entries[row][col]
    }

    pub fn entries(&self) -> [[C64; 2]; 2] {
        self.entries
    }

    pub fn det(&self) -> C64 {
        self.entries[0][0] * self.entries[1][1] - self.entries[0][1] * self.entries[1][0]
    }

    pub fn adjoint(&self) -> Self {
        Self {
            entries: [
                [self.entries[0][0].conj(), self.entries[1][0].conj()],
                [self.entries[0][1].conj(), self.entries[1][1].conj()],
            ],
        }
    }

    /// Matrix product `self * other`.
    pub fn compose(&self, other: &Self) -> Self {
        let mut entries = [[C64::new(0.0, 0.0); 2]; 2];
        for (i, row) in entries.iter_mut().enumerate() {
            for (j, entry) in row.iter_mut().enumerate() {
                *entry = self.entries[i][0] * other.entries[0][j]
                    + self.entries[i][1] * other.entries[1][j];
            }
        }
        Self { entries }
    }

    pub fn apply(&self, v: [C64; 2]) -> [C64; 2] {
        [
            self.entries[0][0] * v[0] + self.entries[0][1] * v[1],
            self.entries[1][0] * v[0] + self.entries[1][1] * v[1],
        ]
    }

    /// Max absolute entry deviation of `U U† - I`.
    pub fn unitarity_residual(&self) -> f64 {
        let adj = self.adjoint();
        let prod = self.compose(&adj);
        let mut residual: f64 = 0.0;
        for i in 0..2 {
            for j in 0..2 {
                let expected = if i == j {
                    C64::new(1.0, 0.0)
                } else {
                    C64::new(0.0, 0.0)
                };
                residual = residual.max((prod.entries[i][j] - expected).norm());
            }
        }
        residual
    }

    pub fn is_special(&self, tol: f64) -> bool {
        (self.det() - C64::new(1.0, 0.0)).norm() < tol
    }
}

/// Amplitudes of the triplet Bell states in `U⊗U |Psi+>`.
///
/// `delta1`, `delta2`, `delta3` are the `|Psi+>`, `|Phi+>`, `|Phi->`
/// components; their squared magnitudes sum to 1 for unitary `U`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BellWeights {
    pub delta1: C64,
    pub delta2: C64,
    pub delta3: C64,
}

impl BellWeights {
    pub fn norm_sq_sum(&self) -> f64 {
        self.delta1.norm_sqr() + self.delta2.norm_sqr() + self.delta3.norm_sqr()
    }

    /// The post-selection acceptance probability `|(1 + delta1) / 2|^2`.
    pub fn acceptance_probability(&self) -> f64 {
        ((C64::new(1.0, 0.0) + self.delta1) / 2.0).norm_sqr()
    }
}

// Two-photon polarization basis order used for the 4-dim contractions below:
// index = 2 * pol_first + pol_second, i.e. (HH, HV, VH, VV).
fn two_photon_apply(u: &Unitary2, v: [C64; 4]) -> [C64; 4] {
    let mut out = [C64::new(0.0, 0.0); 4];
    for i in 0..2 {
        for j in 0..2 {
            let mut acc = C64::new(0.0, 0.0);
            for k in 0..2 {
                for l in 0..2 {
                    acc += u.entry(i, k) * u.entry(j, l) * v[2 * k + l];
                }
            }
            out[2 * i + j] = acc;
        }
    }
    out
}

fn inner(bra: [C64; 4], ket: [C64; 4]) -> C64 {
    bra.iter()
        .zip(ket.iter())
        .map(|(b, k)| b.conj() * k)
        .sum()
}

fn bell_psi(sign: f64) -> [C64; 4] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    [
        C64::new(0.0, 0.0),
        C64::new(r, 0.0),
        C64::new(sign * r, 0.0),
        C64::new(0.0, 0.0),
    ]
}

fn bell_phi(sign: f64) -> [C64; 4] {
    let r = std::f64::consts::FRAC_1_SQRT_2;
    [
        C64::new(r, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(sign * r, 0.0),
    ]
}

/// Decomposes `U⊗U |Psi+>` over the triplet Bell states.
///
/// `U` should be in SU(2); non-unitary input is rejected as a caller bug.
pub fn bell_decompose(u: &Unitary2) -> Result<BellWeights, QcoreError> {
    let residual = u.unitarity_residual();
    if residual >= TOL_INPUT {
        return Err(QcoreError::NotUnitary { residual });
    }
    let image = two_photon_apply(u, bell_psi(1.0));
    Ok(BellWeights {
        delta1: inner(bell_psi(1.0), image),
        delta2: inner(bell_phi(1.0), image),
        delta3: inner(bell_phi(-1.0), image),
    })
}

/// `<Psi-| U⊗U |Psi->`, computed by explicit contraction.
///
/// Equals `det(U)` for any unitary `U`, hence 1 on SU(2): the singlet is
/// invariant under collective noise.
pub fn singlet_image(u: &Unitary2) -> C64 {
    inner(bell_psi(-1.0), two_photon_apply(u, bell_psi(-1.0)))
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Deterministic random stream; equal seeds give bit-identical sequences.
///
/// Substreams are derived as `mix(root, stream_id, trial_index)` so parallel
/// trials can each own an independent stream from one root seed.
#[derive(Debug, Clone)]
pub struct RngStream {
    inner: ChaCha12Rng,
}

impl RngStream {
    pub fn new(seed: u64) -> Self {
        Self {
            inner: ChaCha12Rng::seed_from_u64(seed),
        }
    }

    pub fn substream(root_seed: u64, stream_id: u64, trial_index: u64) -> Self {
        let mixed = splitmix64(
            splitmix64(root_seed ^ stream_id.wrapping_mul(0xa24baed4963ee407))
                ^ trial_index.wrapping_mul(0x9fb21c651e98df25),
        );
        Self::new(mixed)
    }

    /// Uniform on [0, 1).
    pub fn uniform(&mut self) -> f64 {
        self.inner.random::<f64>()
    }

    /// Uniform angle on [0, 2*pi).
    pub fn angle(&mut self) -> f64 {
        self.uniform() * TAU
    }

    pub fn bernoulli(&mut self, p: f64) -> bool {
        self.uniform() < p
    }

    pub fn bit(&mut self) -> u8 {
        self.inner.random::<bool>() as u8
    }

    pub fn normal(&mut self, std_dev: f64) -> f64 {
        if std_dev == 0.0 {
            return 0.0;
        }
        Normal::new(0.0, std_dev)
            .expect("std_dev is finite and non-negative")
            .sample(&mut self.inner)
    }

    /// Uniform direction on the Bloch sphere.
    pub fn unit_axis(&mut self) -> [f64; 3] {
        let z = 2.0 * self.uniform() - 1.0;
        let phi = self.angle();
        let r = (1.0 - z * z).max(0.0).sqrt();
        [r * phi.cos(), r * phi.sin(), z]
    }
}

/// Haar-random SU(2) sample.
///
/// Hurwitz parametrization: `|U00|^2` is drawn uniform on [0, 1] and the two
/// phases uniform on [0, 2*pi), which is exactly the Haar measure on SU(2).
pub fn haar_su2(rng: &mut RngStream) -> Unitary2 {
    let u = rng.uniform();
    let phi1 = rng.angle();
    let phi2 = rng.angle();
    let a = C64::from_polar(u.sqrt(), phi1);
    let b = C64::from_polar((1.0 - u).sqrt(), phi2);
    Unitary2::from_su2_pair(a, b).expect("construction is unitary by parametrization")
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> C64 {
        C64::new(re, im)
    }

    // SU(2) lift of the bit flip, [[0, i], [i, 0]].
    fn bit_flip_lift() -> Unitary2 {
        Unitary2::from_su2_pair(c(0.0, 0.0), c(0.0, 1.0)).unwrap()
    }

    // (1/sqrt 2) [[1, 1], [-1, 1]].
    fn real_rotation() -> Unitary2 {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Unitary2::from_su2_pair(c(r, 0.0), c(r, 0.0)).unwrap()
    }

    #[test]
    fn rejects_non_unitary_entries() {
        let err = Unitary2::from_entries([[c(1.0, 0.0), c(0.0, 0.0)], [c(0.0, 0.0), c(2.0, 0.0)]])
            .unwrap_err();
        assert!(matches!(err, QcoreError::NotUnitary { .. }));
    }

    #[test]
    fn haar_samples_are_special_unitaries() {
        let mut rng = RngStream::new(7);
        for _ in 0..1000 {
            let u = haar_su2(&mut rng);
            assert!(u.unitarity_residual() < TOL_EXACT);
            assert!((u.det() - c(1.0, 0.0)).norm() < TOL_EXACT);
        }
    }

    #[test]
    fn haar_moments_match_analytic_values() {
        // Oracle: with |U00|^2 = u uniform on [0,1], E[u] = 1/2 and
        // E[u^2] = 1/3 by direct integration.
        let n = 100_000;
        let mut rng = RngStream::new(42);
        let (mut m1, mut m2) = (0.0, 0.0);
        for _ in 0..n {
            let u = haar_su2(&mut rng);
            let p = u.entry(0, 0).norm_sqr();
            m1 += p;
            m2 += p * p;
        }
        m1 /= n as f64;
        m2 /= n as f64;
        // var(u) = 1/12, var(u^2) = 1/5 - 1/9 = 4/45
        let se1 = (1.0f64 / 12.0 / n as f64).sqrt();
        let se2 = (4.0f64 / 45.0 / n as f64).sqrt();
        assert!((m1 - 0.5).abs() < 3.0 * se1, "m1 = {m1}");
        assert!((m2 - 1.0 / 3.0).abs() < 3.0 * se2, "m2 = {m2}");
    }

    #[test]
    fn bell_decompose_identity() {
        let w = bell_decompose(&Unitary2::identity()).unwrap();
        assert!((w.delta1 - c(1.0, 0.0)).norm() < TOL_EXACT);
        assert!(w.delta2.norm() < TOL_EXACT);
        assert!(w.delta3.norm() < TOL_EXACT);
    }

    #[test]
    fn bell_decompose_bit_flip_lift() {
        let w = bell_decompose(&bit_flip_lift()).unwrap();
        assert!((w.delta1 - c(-1.0, 0.0)).norm() < TOL_EXACT);
        assert!(w.delta2.norm() < TOL_EXACT);
        assert!(w.delta3.norm() < TOL_EXACT);
    }

    #[test]
    fn bell_decompose_real_rotation() {
        let w = bell_decompose(&real_rotation()).unwrap();
        assert!(w.delta1.norm() < TOL_EXACT);
        assert!(w.delta2.norm() < TOL_EXACT);
        assert!((w.delta3 - c(1.0, 0.0)).norm() < TOL_EXACT);
    }

    #[test]
    fn bell_decompose_rejects_non_unitary() {
        let bad = Unitary2 {
            entries: [[c(1.0, 0.0), c(0.5, 0.0)], [c(0.0, 0.0), c(1.0, 0.0)]],
        };
        assert!(bell_decompose(&bad).is_err());
    }

    #[test]
    fn bell_weights_match_closed_form() {
        // For U = [[a, b], [-b*, a*]]: delta1 = |a|^2 - |b|^2,
        // delta2 = ab - a*b*, delta3 = ab + a*b*.
        let mut rng = RngStream::new(3);
        for _ in 0..1000 {
            let u = haar_su2(&mut rng);
            let a = u.entry(0, 0);
            let b = u.entry(0, 1);
            let w = bell_decompose(&u).unwrap();
            let d1 = c(a.norm_sqr() - b.norm_sqr(), 0.0);
            let d2 = a * b - (a * b).conj();
            let d3 = a * b + (a * b).conj();
            assert!((w.delta1 - d1).norm() < TOL_EXACT);
            assert!((w.delta2 - d2).norm() < TOL_EXACT);
            assert!((w.delta3 - d3).norm() < TOL_EXACT);
            assert!((w.norm_sq_sum() - 1.0).abs() < TOL_EXACT);
            assert!(w.delta1.im.abs() < TOL_EXACT);
        }
    }

    #[test]
    fn singlet_image_is_determinant() {
        assert!((singlet_image(&Unitary2::identity()) - c(1.0, 0.0)).norm() < TOL_EXACT);

        let theta = 1.234;
        let u = Unitary2::phase_on_v(theta);
        assert!((singlet_image(&u) - C64::from_polar(1.0, theta)).norm() < TOL_EXACT);

        let mut rng = RngStream::new(11);
        for _ in 0..1000 {
            let u = haar_su2(&mut rng);
            assert!((singlet_image(&u) - c(1.0, 0.0)).norm() < TOL_EXACT);
        }
    }

    #[test]
    fn singlet_component_exhausts_norm() {
        // U⊗U |Psi-> has no triplet components for unitary U.
        let mut rng = RngStream::new(13);
        for _ in 0..1000 {
            let u = haar_su2(&mut rng);
            let image = two_photon_apply(&u, bell_psi(-1.0));
            assert!((inner(bell_psi(-1.0), image).norm() - 1.0).abs() < TOL_EXACT);
            assert!(inner(bell_psi(1.0), image).norm() < TOL_EXACT);
            assert!(inner(bell_phi(1.0), image).norm() < TOL_EXACT);
            assert!(inner(bell_phi(-1.0), image).norm() < TOL_EXACT);
        }
    }

    #[test]
    fn rng_streams_with_equal_seeds_agree() {
        let mut a = RngStream::new(99);
        let mut b = RngStream::new(99);
        for _ in 0..100 {
            let ua = haar_su2(&mut a);
            let ub = haar_su2(&mut b);
            assert_eq!(ua.entries(), ub.entries());
        }
    }

    #[test]
    fn substreams_differ_across_trials() {
        let mut a = RngStream::substream(1, 0, 0);
        let mut b = RngStream::substream(1, 0, 1);
        assert_ne!(a.uniform(), b.uniform());
    }

    #[test]
    fn rotation_about_is_special_unitary() {
        let u = Unitary2::rotation_about([0.3, -0.4, 0.5], 1.1);
        assert!(u.unitarity_residual() < TOL_EXACT);
        assert!(u.is_special(TOL_EXACT));
    }
}
