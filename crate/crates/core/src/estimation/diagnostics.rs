//! Model comparison, dwell-time analysis, and gating diagnostics.

use std::collections::BTreeMap;

use super::{FitError, FitResult, ModelKind};
use crate::markov_core::{SumTransitionMatrix, VndParams};
use crate::scalar::{powi0, Scalar};

/// Bayesian information criterion of a fit: `-2 log L + p ln K`.
pub fn bic<T: Scalar>(fit: &FitResult<T>) -> T {
    let p = T::from_usize(fit.param_count()).unwrap();
    let k = T::from_usize(fit.n_obs).unwrap();
    -T::of(2.0) * fit.log_likelihood + p * k.ln()
}

/// Information-criterion improvement of fit `a` over fit `b`:
/// `2 (log L_a - log L_b) - (p_a - p_b) ln K`. Positive favors `a`.
pub fn bic_improvement<T: Scalar>(a: &FitResult<T>, b: &FitResult<T>) -> Result<T, FitError> {
    if a.n_obs != b.n_obs {
        return Err(FitError::MismatchedObservations {
            a: a.n_obs,
            b: b.n_obs,
        });
    }
    let k = T::from_usize(a.n_obs).unwrap();
    let dp = T::from_usize(a.param_count()).unwrap() - T::from_usize(b.param_count()).unwrap();
    Ok(T::of(2.0) * (a.log_likelihood - b.log_likelihood) - dp * k.ln())
}

#[derive(Debug, Clone)]
pub struct BicRow<T> {
    pub model: ModelKind,
    pub baseline: ModelKind,
    pub log_likelihood: T,
    pub param_count: usize,
    /// `2 (log L - log L_baseline) - (p - p_baseline) ln K`; positive favors
    /// the row's model over the baseline.
    pub improvement: T,
}

#[derive(Debug, Clone)]
pub struct BicComparison<T> {
    pub baseline: ModelKind,
    pub n_obs: usize,
    pub rows: Vec<BicRow<T>>,
}

/// Compare fits of the same series against the first one as baseline.
pub fn bic_compare<T: Scalar>(fits: &[FitResult<T>]) -> Result<BicComparison<T>, FitError> {
    let baseline = fits.first().ok_or_else(|| {
        FitError::Config("bic_compare needs at least one fit".into())
    })?;
    let mut rows = Vec::new();
    for fit in &fits[1..] {
        rows.push(BicRow {
            model: fit.model_kind,
            baseline: baseline.model_kind,
            log_likelihood: fit.log_likelihood,
            param_count: fit.param_count(),
            improvement: bic_improvement(fit, baseline)?,
        });
    }
    Ok(BicComparison {
        baseline: baseline.model_kind,
        n_obs: baseline.n_obs,
        rows,
    })
}

/// Dwell-length tallies for one state: maximal runs of consecutive steps in
/// the state. Runs touching the start or end of the path have unknown true
/// length and are tallied separately as censored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DwellHistogram {
    pub state: usize,
    pub counts: BTreeMap<usize, usize>,
    pub censored: BTreeMap<usize, usize>,
}

impl DwellHistogram {
    pub fn uncensored_total(&self) -> usize {
        self.counts.values().sum()
    }

    pub fn mean_uncensored(&self) -> Option<f64> {
        let total = self.uncensored_total();
        if total == 0 {
            return None;
        }
        let sum: usize = self.counts.iter().map(|(&len, &c)| len * c).sum();
        Some(sum as f64 / total as f64)
    }
}

/// Extract per-state dwell histograms from a decoded path.
pub fn dwell_times(path: &[usize], n_states: usize) -> Vec<DwellHistogram> {
    let mut hists: Vec<DwellHistogram> = (0..n_states)
        .map(|state| DwellHistogram {
            state,
            counts: BTreeMap::new(),
            censored: BTreeMap::new(),
        })
        .collect();
    if path.is_empty() {
        return hists;
    }
    let mut run_state = path[0];
    let mut run_len = 1usize;
    let mut run_start = 0usize;
    let flush = |hists: &mut Vec<DwellHistogram>, state: usize, len: usize, censored: bool| {
        let hist = &mut hists[state];
        let map = if censored {
            &mut hist.censored
        } else {
            &mut hist.counts
        };
        *map.entry(len).or_insert(0) += 1;
    };
    for (k, &s) in path.iter().enumerate().skip(1) {
        if s == run_state {
            run_len += 1;
        } else {
            flush(&mut hists, run_state, run_len, run_start == 0);
            run_state = s;
            run_len = 1;
            run_start = k;
        }
    }
    // the final run always touches the end of the path
    flush(&mut hists, run_state, run_len, true);
    hists
}

/// Dwell-length law of a homogeneous chain: staying exactly `t` steps in
/// state `s` has probability `q_ss^(t-1) (1 - q_ss)`.
pub fn dwell_prediction<T: Scalar>(q: &SumTransitionMatrix<T>, state: usize, t: usize) -> T {
    assert!(t >= 1, "dwell lengths start at 1");
    let stay = q.get(state, state);
    powi0(stay, t - 1) * (T::one() - stay)
}

/// Qualitative coupling regime read off the fitted stay probabilities.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GatingLabel {
    /// Both opening and closing favor the single-open state.
    Competitive,
    /// Both ratios below one: emitters prefer moving together.
    Cooperative,
    Indeterminate,
}

impl std::fmt::Display for GatingLabel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            GatingLabel::Competitive => "competitive",
            GatingLabel::Cooperative => "cooperative",
            GatingLabel::Indeterminate => "indeterminate",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GatingRatios<T> {
    /// `(1 - lambda_0) / (1 - lambda_1)`: opening into one-open versus
    /// opening beyond it.
    pub lambda_ratio: T,
    /// `(1 - eta_2) / (1 - eta_1)`: closing down to one-open versus closing
    /// it too.
    pub eta_ratio: T,
    pub label: GatingLabel,
    /// Set when the corresponding denominator vanished and the ratio was
    /// reported as infinite.
    pub lambda_ratio_unbounded: bool,
    pub eta_ratio_unbounded: bool,
}

/// Coupling diagnostics of a fitted norm-dependent parametrization.
pub fn gating_ratios<T: Scalar>(params: &VndParams<T>) -> Result<GatingRatios<T>, FitError> {
    if params.ell() < 2 {
        return Err(FitError::GatingNeedsTwoEmitters { ell: params.ell() });
    }
    let ratio = |num: T, den: T| -> (T, bool) {
        if den == T::zero() {
            if num == T::zero() {
                (T::nan(), true)
            } else {
                (T::infinity(), true)
            }
        } else {
            (num / den, false)
        }
    };
    let (lambda_ratio, lambda_unbounded) =
        ratio(T::one() - params.lambda(0), T::one() - params.lambda(1));
    let (eta_ratio, eta_unbounded) = ratio(T::one() - params.eta(2), T::one() - params.eta(1));
    let label = if lambda_ratio > T::one() && eta_ratio > T::one() {
        GatingLabel::Competitive
    } else if lambda_ratio < T::one() && eta_ratio < T::one() {
        GatingLabel::Cooperative
    } else {
        GatingLabel::Indeterminate
    };
    Ok(GatingRatios {
        lambda_ratio,
        eta_ratio,
        label,
        lambda_ratio_unbounded: lambda_unbounded,
        eta_ratio_unbounded: eta_unbounded,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn dwell_runs_with_censoring() {
        let hists = dwell_times(&[0, 0, 1, 1, 1, 0], 2);
        // state 0: leading run of 2 (censored) and trailing run of 1 (censored)
        assert!(hists[0].counts.is_empty());
        assert_eq!(hists[0].censored.get(&2), Some(&1));
        assert_eq!(hists[0].censored.get(&1), Some(&1));
        // state 1: one interior run of 3
        assert_eq!(hists[1].counts.get(&3), Some(&1));
        assert!(hists[1].censored.is_empty());
    }

    #[test]
    fn constant_path_is_one_censored_run() {
        let hists = dwell_times(&[1; 17], 2);
        assert!(hists[1].counts.is_empty());
        assert_eq!(hists[1].censored.get(&17), Some(&1));
        assert_eq!(hists[0].counts.len() + hists[0].censored.len(), 0);
    }

    #[test]
    fn dwell_prediction_is_geometric() {
        let q = SumTransitionMatrix::new(1, vec![0.9, 0.1, 0.2, 0.8]).unwrap();
        assert_abs_diff_eq!(dwell_prediction(&q, 0, 1), 0.1, epsilon = 1e-15);
        assert_abs_diff_eq!(dwell_prediction(&q, 0, 2), 0.09, epsilon = 1e-15);
        // sums to one
        let total: f64 = (1..2000).map(|t| dwell_prediction(&q, 0, t)).sum();
        assert_abs_diff_eq!(total, 1.0, epsilon = 1e-12);
        // instant-leave state
        let q = SumTransitionMatrix::new(1, vec![0.0, 1.0, 0.5, 0.5]).unwrap();
        assert_eq!(dwell_prediction(&q, 0, 1), 1.0);
        assert_eq!(dwell_prediction(&q, 0, 2), 0.0);
    }

    #[test]
    fn gating_labels() {
        // Competitive magnitudes from the two fitted data sets
        let p1 = VndParams::new(vec![1.0 - 0.0123, 1.0 - 0.0021], vec![1.0 - 0.0078, 1.0 - 0.0629])
            .unwrap();
        let g1 = gating_ratios(&p1).unwrap();
        assert_abs_diff_eq!(g1.lambda_ratio, 5.834, epsilon = 5e-3);
        assert_abs_diff_eq!(g1.eta_ratio, 8.074, epsilon = 5e-3);
        assert_eq!(g1.label, GatingLabel::Competitive);

        let p2 = VndParams::new(vec![1.0 - 0.0162, 1.0 - 0.0027], vec![1.0 - 0.0047, 1.0 - 0.0457])
            .unwrap();
        let g2 = gating_ratios(&p2).unwrap();
        assert_abs_diff_eq!(g2.lambda_ratio, 6.002, epsilon = 5e-3);
        assert_abs_diff_eq!(g2.eta_ratio, 9.637, epsilon = 5e-3);
        assert_eq!(g2.label, GatingLabel::Competitive);

        // constant parameters: both ratios one, no direction
        let uc = VndParams::constant(2, 0.9, 0.8).unwrap();
        let g = gating_ratios(&uc).unwrap();
        assert_eq!(g.lambda_ratio, 1.0);
        assert_eq!(g.eta_ratio, 1.0);
        assert_eq!(g.label, GatingLabel::Indeterminate);

        // vanishing denominator
        let p = VndParams::new(vec![0.9f64, 1.0], vec![0.9, 0.8]).unwrap();
        let g = gating_ratios(&p).unwrap();
        assert!(g.lambda_ratio_unbounded);
        assert!(g.lambda_ratio.is_infinite());
    }
}
