//! Exact simulator for a two-photon polarization QKD protocol that survives
//! collective birefringence noise via time-delay "tag" encoding and
//! arrival-time post-selection.
//!
//! - [`qcore`]: 2x2 unitaries, Haar sampling on SU(2), Bell-sector weights.
//! - [`pairstate`]: the joint polarization/time-bin pair state, tags, noise
//!   and post-selection.
//! - [`measurement`]: the beamsplitter measurement circuit and Bob's QKD
//!   basis measurements.
//! - [`protocol`]: end-to-end BB84-variant sessions with channel noise,
//!   loss and an intercept-resend eavesdropper.
//! - [`experiment`]: configuration parsing and the experiment drivers the
//!   CLI exposes.

pub mod experiment;
pub mod measurement;
pub mod pairstate;
pub mod protocol;
pub mod qcore;
