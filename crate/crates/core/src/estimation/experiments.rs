//! Channel-count scan and the underestimated-count robustness experiment.

use rayon::prelude::*;

use super::{
    baum_welch, gating_ratios, FitConfig, FitError, FitInit, FitResult, GatingRatios, ModelKind,
};
use crate::hmm::{simulate_with_rng, viterbi, GaussianEmission, HmmModel, ObservationSeries};
use crate::markov_core::VndParams;
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::sum_chain::q_vnd_closed_form;

/// Fit outcome for one candidate emitter count.
#[derive(Debug)]
pub struct ScanOutcome<T> {
    pub ell: usize,
    pub result: Result<FitResult<T>, FitError>,
}

impl<T: Scalar> ScanOutcome<T> {
    pub fn log_likelihood(&self) -> Option<T> {
        self.result.as_ref().ok().map(|f| f.log_likelihood)
    }
}

/// Fit a norm-dependent model for every candidate emitter count.
///
/// The largest candidate is fitted first and Viterbi-decoded to bound the
/// number of levels actually visited; candidates below that bound fail with
/// [`FitError::InfeasibleChannelCount`] instead of producing a meaningless
/// fit. Remaining candidates are fitted in ascending order, warm-starting
/// each emission from the previous fit. Per-candidate failures are recorded,
/// not propagated.
pub fn channel_count_scan<T: Scalar>(
    obs: &ObservationSeries<T>,
    ells: &[usize],
    config: &FitConfig<T>,
) -> Vec<ScanOutcome<T>> {
    let mut sorted: Vec<usize> = ells.to_vec();
    sorted.sort_unstable();
    sorted.dedup();

    let mut results: std::collections::BTreeMap<usize, Result<FitResult<T>, FitError>> =
        std::collections::BTreeMap::new();

    // Reference fit at the largest candidate bounds the occupied levels.
    let mut observed_max = 0usize;
    let mut reference: Option<(usize, Result<FitResult<T>, FitError>)> = None;
    if let Some(&largest) = sorted.last() {
        let fit = baum_welch(obs, &config_for(config, largest), None);
        if let Ok(f) = &fit {
            if let Ok(model) = f.model() {
                if let Ok(path) = viterbi(&model, obs) {
                    observed_max = path.into_iter().max().unwrap_or(0);
                }
            }
        }
        reference = Some((largest, fit));
    }

    let mut warm_emission: Option<GaussianEmission<T>> = None;
    for &ell in &sorted {
        if ell < observed_max {
            results.insert(
                ell,
                Err(FitError::InfeasibleChannelCount {
                    ell,
                    observed: observed_max,
                }),
            );
            continue;
        }
        if let Some((largest, _)) = &reference {
            if *largest == ell {
                let fit = reference.take().expect("reference checked above").1;
                results.insert(ell, fit);
                break; // the largest candidate is always processed last
            }
        }
        let init = warm_emission.as_ref().map(|e| FitInit {
            emission: Some(extend_emission(e, ell)),
            ..FitInit::default()
        });
        let fit = baum_welch(obs, &config_for(config, ell), init.as_ref());
        if let Ok(f) = &fit {
            warm_emission = Some(f.theta_e.clone());
        }
        results.insert(ell, fit);
    }

    // answer in the caller's order
    ells.iter()
        .map(|&ell| ScanOutcome {
            ell,
            result: results
                .remove(&ell)
                .unwrap_or(Err(FitError::Config(format!(
                    "duplicate candidate {ell} already reported"
                )))),
        })
        .collect()
}

fn config_for<T: Scalar>(config: &FitConfig<T>, ell: usize) -> FitConfig<T> {
    let mut c = config.clone();
    c.ell = ell;
    c.model_kind = ModelKind::Vnd;
    c
}

/// Stretch an emission to more states, repeating the last noise scale.
fn extend_emission<T: Scalar>(e: &GaussianEmission<T>, ell: usize) -> GaussianEmission<T> {
    let mut sigmas = e.sigmas().to_vec();
    let last = *sigmas.last().expect("emission has at least one state");
    sigmas.resize(ell + 1, last);
    sigmas.truncate(ell + 1);
    GaussianEmission::new(e.mu(), e.nu(), sigmas).expect("positive scales stay positive")
}

/// Stay probabilities for a large system where at most a few emitters open
/// at once: `lambda_0`, `lambda_1`, `eta_1`, `eta_2` are free, no opening
/// happens from two or more open (`lambda_k = 1` for `k > 1`), and higher
/// open states drain quickly (`eta_k = fill_eta` for `k > 2`).
pub fn scenario_params<T: Scalar>(
    true_ell: usize,
    lambda0: T,
    lambda1: T,
    eta1: T,
    eta2: T,
    fill_eta: T,
) -> Result<VndParams<T>, crate::markov_core::MarkovError> {
    let mut lambdas = vec![T::one(); true_ell];
    lambdas[0] = lambda0;
    if true_ell > 1 {
        lambdas[1] = lambda1;
    }
    let mut etas = vec![fill_eta; true_ell];
    etas[0] = eta1;
    if true_ell > 1 {
        etas[1] = eta2;
    }
    VndParams::new(lambdas, etas)
}

/// Configuration of the repeated simulate-underfit experiment.
#[derive(Debug, Clone)]
pub struct RobustnessConfig<T> {
    /// Parameters of the generating system (its emitter count is implied).
    pub true_params: VndParams<T>,
    /// Emission of the generating system.
    pub emission: GaussianEmission<T>,
    /// Emitter count used for the fits.
    pub fit_ell: usize,
    pub samples: usize,
    pub repetitions: usize,
    pub seed: u64,
    /// Settings for the per-repetition fits (its `ell`/`model_kind` are
    /// overridden to a norm-dependent fit at `fit_ell`).
    pub fit: FitConfig<T>,
}

/// Gating ratios fitted in one repetition.
#[derive(Debug)]
pub struct RatioSample<T> {
    pub repetition: usize,
    pub outcome: Result<GatingRatios<T>, FitError>,
}

/// Simulate from a large system, fit with fewer emitters, and record the
/// gating ratios of every repetition. Per-repetition failures are recorded,
/// not fatal. Repetitions use independent seed streams, so results are
/// reproducible regardless of scheduling.
pub fn robustness_experiment<T: Scalar>(config: &RobustnessConfig<T>) -> Vec<RatioSample<T>> {
    let q_true = q_vnd_closed_form(&config.true_params);
    let truth = HmmModel::with_stationary_initial(q_true, config.emission.clone());

    (0..config.repetitions)
        .into_par_iter()
        .map(|rep| {
            let outcome = (|| -> Result<GatingRatios<T>, FitError> {
                let truth = truth.as_ref().map_err(|e| FitError::Hmm(e.clone()))?;
                let mut rng = stream_rng(config.seed, rep as u64);
                let (_, obs) = simulate_with_rng(truth, config.samples, &mut rng)?;
                let mut fit_config = config.fit.clone();
                fit_config.model_kind = ModelKind::Vnd;
                fit_config.ell = config.fit_ell;
                fit_config.seed = config
                    .seed
                    .wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(rep as u64 + 1));
                let fit = baum_welch(&obs, &fit_config, None)?;
                let params = fit
                    .theta_h
                    .as_vnd()
                    .expect("norm-dependent fit returns norm-dependent parameters");
                gating_ratios(params)
            })();
            RatioSample {
                repetition: rep,
                outcome,
            }
        })
        .collect()
}
