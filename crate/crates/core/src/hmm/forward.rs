//! Scaled forward-backward filtering and likelihood evaluation.

use super::{HmmError, HmmModel, ObservationSeries};
use crate::scalar::Scalar;

/// Filtering output of one forward-backward pass.
///
/// `univariate` holds the posterior state probabilities per step (row `k` is
/// `P(S_k = s | y_{1:K})`), `bivariate` the posterior transition
/// probabilities per step pair. Both are dense; for a series of `K` samples
/// over `n` states this stores `K*n + (K-1)*n^2` scalars, so prefer
/// [`forward_backward_stats`] inside estimation loops.
#[derive(Debug, Clone)]
pub struct FilteringResult<T> {
    log_likelihood: T,
    n_states: usize,
    univariate: Vec<T>,
    bivariate: Vec<T>,
    scaling_factors: Vec<T>,
}

impl<T: Scalar> FilteringResult<T> {
    pub fn log_likelihood(&self) -> T {
        self.log_likelihood
    }

    pub fn len(&self) -> usize {
        self.scaling_factors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.scaling_factors.is_empty()
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    /// `P(S_k = . | y_{1:K})` for step `k` (0-based).
    pub fn univariate(&self, k: usize) -> &[T] {
        &self.univariate[k * self.n_states..(k + 1) * self.n_states]
    }

    /// `P(S_k = r, S_{k+1} = s | y_{1:K})` as a row-major `n x n` slice for
    /// step `k` in `0..K-1`.
    pub fn bivariate(&self, k: usize) -> &[T] {
        let nn = self.n_states * self.n_states;
        &self.bivariate[k * nn..(k + 1) * nn]
    }

    /// Per-step normalizers of the scaled forward recursion.
    pub fn scaling_factors(&self) -> &[T] {
        &self.scaling_factors
    }
}

/// Aggregates of the filtering distributions that the estimator consumes:
/// expected transition counts, per-state weights, and weighted data moments.
#[derive(Debug, Clone)]
pub struct HmmSufficientStats<T> {
    pub log_likelihood: T,
    pub n_states: usize,
    /// `sum_k P(S_k = r, S_{k+1} = s | y)`, row-major `n x n`.
    pub transition_weight: Vec<T>,
    /// `sum_k P(S_k = s | y)` per state.
    pub state_weight: Vec<T>,
    /// `sum_k P(S_k = s | y) y_k` per state.
    pub weighted_y: Vec<T>,
    /// `sum_k P(S_k = s | y) y_k^2` per state.
    pub weighted_y2: Vec<T>,
}

struct ForwardPass<T> {
    /// Scaled forward variables, `K x n`.
    alphas: Vec<T>,
    /// Per-step normalizers (sum of the shifted unnormalized forward row).
    scalings: Vec<T>,
    /// Shifted emission densities `exp(log g - rowmax)`, `K x n`.
    densities: Vec<T>,
    log_likelihood: T,
}

/// Forward recursion with per-step scaling.
///
/// Emission densities are computed in log space and shifted by their
/// row maximum before exponentiation, so the pass cannot underflow even for
/// extreme observations; the shifts are absorbed into the log-likelihood.
fn forward_pass<T: Scalar>(
    model: &HmmModel<T>,
    obs: &ObservationSeries<T>,
) -> Result<ForwardPass<T>, HmmError> {
    let n = model.n_states();
    let k_len = obs.len();
    let y = obs.values();
    let q = model.hidden();

    let mut alphas = vec![T::zero(); k_len * n];
    let mut scalings = vec![T::zero(); k_len];
    let mut densities = vec![T::zero(); k_len * n];

    // compensated accumulation keeps the trace monotonicity checks meaningful
    // on million-sample series
    let mut loglik = T::zero();
    let mut comp = T::zero();
    let add = |acc: &mut T, comp: &mut T, v: T| {
        let t = v - *comp;
        let s = *acc + t;
        *comp = (s - *acc) - t;
        *acc = s;
    };

    for k in 0..k_len {
        let dens = &mut densities[k * n..(k + 1) * n];
        let mut max_log = T::neg_infinity();
        for s in 0..n {
            let lg = model.emission().log_density(y[k], s);
            dens[s] = lg;
            max_log = max_log.max(lg);
        }
        for d in dens.iter_mut() {
            *d = (*d - max_log).exp();
        }

        let (prev, cur) = alphas.split_at_mut(k * n);
        let cur = &mut cur[..n];
        if k == 0 {
            for s in 0..n {
                cur[s] = model.initial()[s] * dens[s];
            }
        } else {
            let prev = &prev[(k - 1) * n..];
            for (s, c) in cur.iter_mut().enumerate() {
                let mut pred = T::zero();
                for r in 0..n {
                    pred += prev[r] * q.get(r, s);
                }
                *c = pred * dens[s];
            }
        }
        let scale: T = cur.iter().copied().sum();
        if !(scale > T::zero()) || !scale.is_finite() {
            return Err(HmmError::NumericalUnderflow { step: k });
        }
        for c in cur.iter_mut() {
            *c = *c / scale;
        }
        scalings[k] = scale;
        add(&mut loglik, &mut comp, scale.ln() + max_log);
    }

    Ok(ForwardPass {
        alphas,
        scalings,
        densities,
        log_likelihood: loglik,
    })
}

/// Forward-backward filtering: log-likelihood, univariate and bivariate
/// posterior distributions, and the per-step scaling factors.
pub fn forward_backward<T: Scalar>(
    model: &HmmModel<T>,
    obs: &ObservationSeries<T>,
) -> Result<FilteringResult<T>, HmmError> {
    let n = model.n_states();
    let k_len = obs.len();
    let q = model.hidden();
    let fwd = forward_pass(model, obs)?;

    let mut univariate = vec![T::zero(); k_len * n];
    let mut bivariate = vec![T::zero(); k_len.saturating_sub(1) * n * n];
    let mut beta = vec![T::one(); n];
    let mut beta_next = vec![T::zero(); n];

    for s in 0..n {
        univariate[(k_len - 1) * n + s] = fwd.alphas[(k_len - 1) * n + s];
    }
    for k in (0..k_len.saturating_sub(1)).rev() {
        let scale = fwd.scalings[k + 1];
        let dens = &fwd.densities[(k + 1) * n..(k + 2) * n];
        let alpha = &fwd.alphas[k * n..(k + 1) * n];
        let bi = &mut bivariate[k * n * n..(k + 1) * n * n];
        for r in 0..n {
            let mut acc = T::zero();
            for s in 0..n {
                let step = q.get(r, s) * dens[s] * beta[s] / scale;
                bi[r * n + s] = alpha[r] * step;
                acc += step;
            }
            beta_next[r] = acc;
            univariate[k * n + r] = alpha[r] * acc;
        }
        std::mem::swap(&mut beta, &mut beta_next);
    }

    Ok(FilteringResult {
        log_likelihood: fwd.log_likelihood,
        n_states: n,
        univariate,
        bivariate,
        scaling_factors: fwd.scalings,
    })
}

/// Forward-backward pass that accumulates only the estimator's sufficient
/// statistics, streaming the backward recursion instead of materializing the
/// bivariate distributions.
pub fn forward_backward_stats<T: Scalar>(
    model: &HmmModel<T>,
    obs: &ObservationSeries<T>,
) -> Result<HmmSufficientStats<T>, HmmError> {
    let n = model.n_states();
    let k_len = obs.len();
    let y = obs.values();
    let q = model.hidden();
    let fwd = forward_pass(model, obs)?;

    let mut transition_weight = vec![T::zero(); n * n];
    let mut state_weight = vec![T::zero(); n];
    let mut weighted_y = vec![T::zero(); n];
    let mut weighted_y2 = vec![T::zero(); n];
    let mut beta = vec![T::one(); n];
    let mut beta_next = vec![T::zero(); n];

    {
        let last = k_len - 1;
        for s in 0..n {
            let g = fwd.alphas[last * n + s];
            state_weight[s] += g;
            weighted_y[s] += g * y[last];
            weighted_y2[s] += g * y[last] * y[last];
        }
    }
    for k in (0..k_len.saturating_sub(1)).rev() {
        let scale = fwd.scalings[k + 1];
        let dens = &fwd.densities[(k + 1) * n..(k + 2) * n];
        let alpha = &fwd.alphas[k * n..(k + 1) * n];
        for r in 0..n {
            let mut acc = T::zero();
            for s in 0..n {
                let step = q.get(r, s) * dens[s] * beta[s] / scale;
                transition_weight[r * n + s] += alpha[r] * step;
                acc += step;
            }
            beta_next[r] = acc;
            let g = alpha[r] * acc;
            state_weight[r] += g;
            weighted_y[r] += g * y[k];
            weighted_y2[r] += g * y[k] * y[k];
        }
        std::mem::swap(&mut beta, &mut beta_next);
    }

    Ok(HmmSufficientStats {
        log_likelihood: fwd.log_likelihood,
        n_states: n,
        transition_weight,
        state_weight,
        weighted_y,
        weighted_y2,
    })
}

/// Joint log probability of a concrete hidden path and the observations.
///
/// Zero transition or start probabilities yield negative infinity.
pub fn complete_log_likelihood<T: Scalar>(
    model: &HmmModel<T>,
    path: &[usize],
    obs: &ObservationSeries<T>,
) -> Result<T, HmmError> {
    if path.len() != obs.len() {
        return Err(HmmError::PathLengthMismatch {
            path: path.len(),
            obs: obs.len(),
        });
    }
    let n = model.n_states();
    if let Some(&bad) = path.iter().find(|&&s| s >= n) {
        return Err(HmmError::StateOutOfRange {
            state: bad,
            max: n - 1,
        });
    }
    let y = obs.values();
    let mut acc = model.initial()[path[0]].ln() + model.emission().log_density(y[0], path[0]);
    for k in 1..path.len() {
        acc += model.hidden().get(path[k - 1], path[k]).ln();
        acc += model.emission().log_density(y[k], path[k]);
    }
    Ok(acc)
}
