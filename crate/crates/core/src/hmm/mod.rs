//! Gaussian-emission hidden Markov model on the sum chain.
//!
//! The hidden chain is the number of open emitters; the observation at each
//! step is the baseline current plus one increment per open emitter plus
//! state-dependent Gaussian noise. Filtering runs with per-step scaling so
//! million-sample recordings stay in range.

mod forward;
mod series_io;
mod simulate;
mod viterbi;

pub use forward::{
    complete_log_likelihood, forward_backward, forward_backward_stats, FilteringResult,
    HmmSufficientStats,
};
pub use series_io::{read_series, write_series, SeriesIoError};
pub use simulate::{simulate, simulate_with_rng};
pub use viterbi::viterbi;

use thiserror::Error;

use crate::markov_core::SumTransitionMatrix;
use crate::scalar::Scalar;
use crate::sum_chain::stationary_distribution;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HmmError {
    #[error("sigma[{state}] = {value} must be positive and finite")]
    InvalidSigma { state: usize, value: f64 },
    #[error("emission has {emission} states but the hidden chain has {hidden}")]
    DimensionMismatch { hidden: usize, emission: usize },
    #[error("initial distribution must have {expected} entries, got {len}")]
    InitialLength { expected: usize, len: usize },
    #[error("initial distribution sums to {sum}, expected 1")]
    InitialNotNormalized { sum: f64 },
    #[error("initial distribution has a negative entry at state {state}")]
    InitialNegative { state: usize },
    #[error("observation series must contain at least one value")]
    EmptySeries,
    #[error("observation {index} is not finite")]
    NonFiniteObservation { index: usize },
    #[error("hidden path length {path} does not match series length {obs}")]
    PathLengthMismatch { path: usize, obs: usize },
    #[error("hidden state {state} is outside 0..={max}")]
    StateOutOfRange { state: usize, max: usize },
    #[error("forward scaling factor vanished at step {step}")]
    NumericalUnderflow { step: usize },
}

/// Emission parameters: `y = mu + s * nu + sigma_s * noise` in state `s`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaussianEmission<T> {
    mu: T,
    nu: T,
    sigmas: Vec<T>,
}

impl<T: Scalar> GaussianEmission<T> {
    /// `sigmas` holds one positive noise scale per sum state (`ell + 1` of them).
    pub fn new(mu: T, nu: T, sigmas: Vec<T>) -> Result<Self, HmmError> {
        if sigmas.is_empty() {
            return Err(HmmError::InvalidSigma {
                state: 0,
                value: f64::NAN,
            });
        }
        for (state, &s) in sigmas.iter().enumerate() {
            if !(s > T::zero()) || !s.is_finite() {
                return Err(HmmError::InvalidSigma {
                    state,
                    value: s.as_f64(),
                });
            }
        }
        Ok(GaussianEmission { mu, nu, sigmas })
    }

    /// Equal noise scale in every state.
    pub fn uniform(ell: usize, mu: T, nu: T, sigma: T) -> Result<Self, HmmError> {
        Self::new(mu, nu, vec![sigma; ell + 1])
    }

    pub fn ell(&self) -> usize {
        self.sigmas.len() - 1
    }

    pub fn n_states(&self) -> usize {
        self.sigmas.len()
    }

    pub fn mu(&self) -> T {
        self.mu
    }

    pub fn nu(&self) -> T {
        self.nu
    }

    pub fn sigmas(&self) -> &[T] {
        &self.sigmas
    }

    /// Mean level in state `s`.
    pub fn mean(&self, s: usize) -> T {
        self.mu + T::from_usize(s).unwrap() * self.nu
    }

    /// Log density of observing `y` in state `s`.
    pub fn log_density(&self, y: T, s: usize) -> T {
        let sigma = self.sigmas[s];
        let z = (y - self.mean(s)) / sigma;
        let half = T::of(0.5);
        let ln_2pi = T::of(1.8378770664093453);
        -half * z * z - sigma.ln() - half * ln_2pi
    }
}

/// Hidden Markov model: sum-chain transition matrix, Gaussian emission, and
/// initial distribution of the first hidden state.
#[derive(Debug, Clone, PartialEq)]
pub struct HmmModel<T> {
    hidden: SumTransitionMatrix<T>,
    emission: GaussianEmission<T>,
    initial: Vec<T>,
}

impl<T: Scalar> HmmModel<T> {
    pub fn new(
        hidden: SumTransitionMatrix<T>,
        emission: GaussianEmission<T>,
        initial: Vec<T>,
    ) -> Result<Self, HmmError> {
        if hidden.ell() != emission.ell() {
            return Err(HmmError::DimensionMismatch {
                hidden: hidden.n_states(),
                emission: emission.n_states(),
            });
        }
        if initial.len() != hidden.n_states() {
            return Err(HmmError::InitialLength {
                expected: hidden.n_states(),
                len: initial.len(),
            });
        }
        for (state, &p) in initial.iter().enumerate() {
            if p < T::zero() {
                return Err(HmmError::InitialNegative { state });
            }
        }
        let sum: T = initial.iter().copied().sum();
        if (sum - T::one()).abs() > T::of(1e-9) {
            return Err(HmmError::InitialNotNormalized { sum: sum.as_f64() });
        }
        // renormalize so downstream arithmetic sees an exact distribution
        let initial = initial.into_iter().map(|p| p / sum).collect();
        Ok(HmmModel {
            hidden,
            emission,
            initial,
        })
    }

    /// Model started from the stationary distribution of its hidden chain
    /// (uniform when the chain is reducible).
    pub fn with_stationary_initial(
        hidden: SumTransitionMatrix<T>,
        emission: GaussianEmission<T>,
    ) -> Result<Self, HmmError> {
        let initial = stationary_distribution(&hidden).probabilities;
        Self::new(hidden, emission, initial)
    }

    pub fn hidden(&self) -> &SumTransitionMatrix<T> {
        &self.hidden
    }

    pub fn emission(&self) -> &GaussianEmission<T> {
        &self.emission
    }

    pub fn initial(&self) -> &[T] {
        &self.initial
    }

    pub fn ell(&self) -> usize {
        self.hidden.ell()
    }

    pub fn n_states(&self) -> usize {
        self.hidden.n_states()
    }
}

/// A recorded series of sum currents.
#[derive(Debug, Clone, PartialEq)]
pub struct ObservationSeries<T> {
    values: Vec<T>,
    sample_interval: Option<T>,
}

impl<T: Scalar> ObservationSeries<T> {
    pub fn new(values: Vec<T>) -> Result<Self, HmmError> {
        if values.is_empty() {
            return Err(HmmError::EmptySeries);
        }
        for (index, &v) in values.iter().enumerate() {
            if !v.is_finite() {
                return Err(HmmError::NonFiniteObservation { index });
            }
        }
        Ok(ObservationSeries {
            values,
            sample_interval: None,
        })
    }

    /// Attach the sampling interval in seconds (metadata only).
    pub fn with_sample_interval(mut self, dt: T) -> Self {
        self.sample_interval = Some(dt);
        self
    }

    pub fn values(&self) -> &[T] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn sample_interval(&self) -> Option<T> {
        self.sample_interval
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn log_density_at_the_mode() {
        let e = GaussianEmission::new(1.5, 2.0, vec![0.3, 0.3]).unwrap();
        let y = e.mean(1);
        assert_abs_diff_eq!(
            e.log_density(y, 1),
            -(0.3f64.ln()) - 0.5 * (2.0 * std::f64::consts::PI).ln(),
            epsilon = 1e-14
        );
    }

    #[test]
    fn log_density_hand_value() {
        let e = GaussianEmission::new(0.0, 1.0, vec![1.0, 1.0]).unwrap();
        assert_abs_diff_eq!(e.log_density(2.0, 1), -1.4189385332046727, epsilon = 1e-12);
    }

    #[test]
    fn log_density_integrates_to_one() {
        // Simpson quadrature over +-12 sigma
        let e = GaussianEmission::new(0.4, 1.3, vec![0.5, 0.9]).unwrap();
        for s in 0..2 {
            let m = e.mean(s);
            let sd = e.sigmas()[s];
            let (a, b) = (m - 12.0 * sd, m + 12.0 * sd);
            let n = 20_001usize;
            let h = (b - a) / (n - 1) as f64;
            let mut acc = 0.0;
            for i in 0..n {
                let y = a + h * i as f64;
                let w = if i == 0 || i == n - 1 {
                    1.0
                } else if i % 2 == 1 {
                    4.0
                } else {
                    2.0
                };
                acc += w * e.log_density(y, s).exp();
            }
            acc *= h / 3.0;
            assert_abs_diff_eq!(acc, 1.0, epsilon = 1e-8);
        }
    }

    #[test]
    fn emission_rejects_bad_sigma() {
        assert!(GaussianEmission::new(0.0, 1.0, vec![0.5, 0.0]).is_err());
        assert!(GaussianEmission::new(0.0, 1.0, vec![0.5, -1.0]).is_err());
        assert!(GaussianEmission::<f64>::new(0.0, 1.0, vec![]).is_err());
    }

    #[test]
    fn model_validates_dimensions_and_initial() {
        let q = SumTransitionMatrix::new(1, vec![0.7, 0.3, 0.1, 0.9]).unwrap();
        let e = GaussianEmission::uniform(1, 0.0, 1.0, 0.2).unwrap();
        assert!(HmmModel::new(q.clone(), e.clone(), vec![0.5, 0.5]).is_ok());
        assert!(HmmModel::new(q.clone(), e.clone(), vec![0.5, 0.6]).is_err());
        assert!(HmmModel::new(q.clone(), e.clone(), vec![1.5, -0.5]).is_err());
        let e3 = GaussianEmission::uniform(2, 0.0, 1.0, 0.2).unwrap();
        assert!(HmmModel::new(q, e3, vec![0.5, 0.5]).is_err());
    }

    #[test]
    fn series_rejects_bad_values() {
        assert!(ObservationSeries::<f64>::new(vec![]).is_err());
        assert!(matches!(
            ObservationSeries::new(vec![0.0, f64::NAN]),
            Err(HmmError::NonFiniteObservation { index: 1 })
        ));
    }
}
