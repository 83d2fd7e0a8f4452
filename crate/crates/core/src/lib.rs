//! Modeling, simulation, and estimation for superimposed two-state signals.
//!
//! A system of `ell` coupled binary emitters (e.g. ion channels, each either
//! closed or open) evolves as a Markov chain on `{0,1}^ell`. Only the noisy
//! sum of the emitter states is recorded. This crate provides:
//!
//! - [`markov_core`]: dense transition matrices on `{0,1}^ell` for the
//!   norm-dependent, uncoupled, fully coupled, and linearly coupled models,
//!   structural checks (lumpability, permutation invariance, conditional
//!   independence), and aggregation of the vector chain into the
//!   `(ell+1)`-state sum chain.
//! - [`sum_chain`]: closed-form construction of the sum-chain transition
//!   matrix without touching the exponential state space, and recovery of
//!   the per-emitter parameters from a sum-chain matrix.
//! - [`hmm`]: a Gaussian-emission hidden Markov model on the sum chain with
//!   scaled forward-backward filtering, simulation, and Viterbi decoding.
//! - [`estimation`]: a Baum-Welch estimator customized for the parametrized
//!   hidden chains, model comparison, dwell-time diagnostics, and the
//!   channel-count and robustness experiments.
//!
//! All numeric code is generic over the scalar type ([`Scalar`], implemented
//! by `f32` and `f64`); the aliases below fix the common `f64` instantiation.

pub mod estimation;
pub mod hmm;
pub mod markov_core;
pub mod optim;
pub mod rng;
pub mod scalar;
pub mod sum_chain;

pub use scalar::Scalar;

/// Per-emitter stay probabilities at `f64` precision.
pub type VndParams64 = markov_core::VndParams<f64>;
/// Dense `2^ell x 2^ell` transition matrix at `f64` precision.
pub type FullTransitionMatrix64 = markov_core::FullTransitionMatrix<f64>;
/// `(ell+1) x (ell+1)` sum-chain transition matrix at `f64` precision.
pub type SumTransitionMatrix64 = markov_core::SumTransitionMatrix<f64>;
/// Gaussian emission parameters at `f64` precision.
pub type GaussianEmission64 = hmm::GaussianEmission<f64>;
/// Hidden Markov model on the sum chain at `f64` precision.
pub type HmmModel64 = hmm::HmmModel<f64>;
/// Observed series of sum currents at `f64` precision.
pub type ObservationSeries64 = hmm::ObservationSeries<f64>;
/// Baum-Welch fit configuration at `f64` precision.
pub type FitConfig64 = estimation::FitConfig<f64>;
/// Baum-Welch fit result at `f64` precision.
pub type FitResult64 = estimation::FitResult<f64>;
