//! Customized Baum-Welch estimation for the parametrized hidden chains.
//!
//! The expectation step is the scaled forward-backward pass; the
//! maximization step updates the hidden-chain stay probabilities by numeric
//! ascent (the sum-chain parametrization has no closed form) and the
//! Gaussian emission by weighted regression. The hidden update never falls
//! below its warm start and the emission update is exact coordinate ascent,
//! so every accepted iteration is monotone in the log-likelihood.

mod diagnostics;
mod experiments;
mod init;
mod m_step;

pub use diagnostics::{
    bic, bic_compare, bic_improvement, dwell_prediction, dwell_times, gating_ratios,
    BicComparison, BicRow, DwellHistogram, GatingLabel, GatingRatios,
};
pub use experiments::{
    channel_count_scan, robustness_experiment, scenario_params, RatioSample, RobustnessConfig,
    ScanOutcome,
};
pub use init::emission_init;
pub use m_step::{m_step_emission, m_step_hidden};

use std::fmt;
use std::str::FromStr;

use rand::Rng as _;
use rayon::prelude::*;
use thiserror::Error;

use crate::hmm::{
    forward_backward_stats, GaussianEmission, HmmError, HmmModel, ObservationSeries,
};
use crate::markov_core::{
    build_m_vnd, FullTransitionMatrix, MarkovError, SumTransitionMatrix, VndParams,
    DEFAULT_ELL_CAP,
};
use crate::rng::stream_rng;
use crate::scalar::Scalar;
use crate::sum_chain::{q_ck, q_uc, q_vnd_closed_form, stationary_distribution};

#[derive(Debug, Error)]
pub enum FitError {
    #[error(transparent)]
    Hmm(#[from] HmmError),
    #[error(transparent)]
    Markov(#[from] MarkovError),
    #[error("invalid fit configuration: {0}")]
    Config(String),
    #[error("candidate channel count {ell} is below the observed maximum level {observed}")]
    InfeasibleChannelCount { ell: usize, observed: usize },
    #[error("fits compare different series ({a} vs {b} samples)")]
    MismatchedObservations { a: usize, b: usize },
    #[error("gating ratios need at least two emitters, got {ell}")]
    GatingNeedsTwoEmitters { ell: usize },
}

/// Hidden-chain parametrization being fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelKind {
    /// Norm-dependent stay probabilities, `2*ell` parameters.
    Vnd,
    /// Uncoupled emitters, 2 parameters.
    Uc,
    /// Linear coupling between the fully coupled and uncoupled chains,
    /// 3 parameters.
    Ck,
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Vnd => "vnd",
            ModelKind::Uc => "uc",
            ModelKind::Ck => "ck",
        })
    }
}

impl FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "vnd" => Ok(ModelKind::Vnd),
            "uc" => Ok(ModelKind::Uc),
            "ck" => Ok(ModelKind::Ck),
            other => Err(format!("unknown model kind {other:?} (expected vnd, uc, or ck)")),
        }
    }
}

/// Hidden-chain parameters of one of the three model kinds.
#[derive(Debug, Clone, PartialEq)]
pub enum HiddenParams<T> {
    Vnd(VndParams<T>),
    Uc { lambda: T, eta: T },
    Ck { lambda: T, eta: T, kappa: T },
}

impl<T: Scalar> HiddenParams<T> {
    pub fn kind(&self) -> ModelKind {
        match self {
            HiddenParams::Vnd(_) => ModelKind::Vnd,
            HiddenParams::Uc { .. } => ModelKind::Uc,
            HiddenParams::Ck { .. } => ModelKind::Ck,
        }
    }

    /// Sum-chain transition matrix for `ell` emitters.
    pub fn q(&self, ell: usize) -> Result<SumTransitionMatrix<T>, MarkovError> {
        match self {
            HiddenParams::Vnd(p) => {
                debug_assert_eq!(p.ell(), ell);
                Ok(q_vnd_closed_form(p))
            }
            HiddenParams::Uc { lambda, eta } => q_uc(ell, *lambda, *eta),
            HiddenParams::Ck { lambda, eta, kappa } => q_ck(ell, *lambda, *eta, *kappa),
        }
    }

    /// Number of fitted hidden parameters.
    pub fn n_free(&self, ell: usize) -> usize {
        match self {
            HiddenParams::Vnd(_) => 2 * ell,
            HiddenParams::Uc { .. } => 2,
            HiddenParams::Ck { .. } => 3,
        }
    }

    pub fn as_vnd(&self) -> Option<&VndParams<T>> {
        match self {
            HiddenParams::Vnd(p) => Some(p),
            _ => None,
        }
    }
}

/// Configuration of one estimation run.
#[derive(Debug, Clone)]
pub struct FitConfig<T> {
    pub model_kind: ModelKind,
    pub ell: usize,
    pub max_iterations: usize,
    /// Stop when the relative log-likelihood improvement falls below this.
    pub loglik_rel_tol: T,
    /// Restrict the even middle row to the identifiable branch
    /// `lambda >= 1 - eta` (norm-dependent fits only).
    pub enforce_half_constraint: bool,
    pub restarts: usize,
    pub seed: u64,
    /// Per-state variance floor as a fraction of the sample variance.
    pub sigma_floor_factor: T,
    /// Initial distribution of the hidden chain; defaults to the stationary
    /// distribution of the starting hidden matrix, then stays fixed.
    pub initial_dist: Option<Vec<T>>,
}

impl<T: Scalar> FitConfig<T> {
    pub fn new(model_kind: ModelKind, ell: usize) -> Self {
        FitConfig {
            model_kind,
            ell,
            max_iterations: 500,
            loglik_rel_tol: T::of(1e-8),
            enforce_half_constraint: true,
            restarts: 5,
            seed: 0,
            sigma_floor_factor: T::of(1e-6),
            initial_dist: None,
        }
    }

    fn validate(&self) -> Result<(), FitError> {
        if self.ell == 0 {
            return Err(FitError::Config("ell must be at least 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(FitError::Config("max_iterations must be at least 1".into()));
        }
        if self.restarts == 0 {
            return Err(FitError::Config("restarts must be at least 1".into()));
        }
        if !(self.loglik_rel_tol > T::zero()) {
            return Err(FitError::Config("loglik_rel_tol must be positive".into()));
        }
        if !(self.sigma_floor_factor > T::zero()) {
            return Err(FitError::Config("sigma_floor_factor must be positive".into()));
        }
        Ok(())
    }
}

/// Optional warm starts for [`baum_welch`].
#[derive(Debug, Clone)]
pub struct FitInit<T> {
    pub hidden: Option<HiddenParams<T>>,
    pub emission: Option<GaussianEmission<T>>,
    pub initial: Option<Vec<T>>,
}

impl<T> Default for FitInit<T> {
    fn default() -> Self {
        FitInit {
            hidden: None,
            emission: None,
            initial: None,
        }
    }
}

/// Estimate returned by [`baum_welch`], with its iteration diagnostics.
#[derive(Debug, Clone)]
pub struct FitResult<T> {
    pub model_kind: ModelKind,
    pub ell: usize,
    pub theta_h: HiddenParams<T>,
    pub theta_e: GaussianEmission<T>,
    /// Initial distribution used (held fixed during the fit).
    pub initial: Vec<T>,
    pub log_likelihood: T,
    pub iterations: usize,
    pub loglik_trace: Vec<T>,
    pub converged: bool,
    pub degenerate_emission: bool,
    pub n_obs: usize,
    /// Dense vector-chain matrix rebuilt from the fitted parameters
    /// (norm-dependent fits with `ell` under the dense cap).
    pub recovered_m: Option<FullTransitionMatrix<T>>,
}

impl<T: Scalar> FitResult<T> {
    pub fn q(&self) -> Result<SumTransitionMatrix<T>, MarkovError> {
        self.theta_h.q(self.ell)
    }

    pub fn model(&self) -> Result<HmmModel<T>, FitError> {
        let q = self.q()?;
        Ok(HmmModel::new(q, self.theta_e.clone(), self.initial.clone())?)
    }

    /// Fitted parameters counted for model comparison: hidden parameters
    /// plus `(mu, nu, sigma_0..sigma_ell)`; the fixed initial distribution
    /// is excluded.
    pub fn param_count(&self) -> usize {
        self.theta_h.n_free(self.ell) + 2 + (self.ell + 1)
    }
}

struct RestartOutcome<T> {
    theta_h: HiddenParams<T>,
    theta_e: GaussianEmission<T>,
    initial: Vec<T>,
    trace: Vec<T>,
    converged: bool,
    degenerate: bool,
}

/// Maximum-likelihood estimation by expectation-maximization.
///
/// Runs `config.restarts` independently seeded starts and returns the one
/// with the best final log-likelihood. A result is returned even without
/// convergence; check [`FitResult::converged`].
pub fn baum_welch<T: Scalar>(
    obs: &ObservationSeries<T>,
    config: &FitConfig<T>,
    init: Option<&FitInit<T>>,
) -> Result<FitResult<T>, FitError> {
    config.validate()?;
    let ell = config.ell;

    let emission0 = match init.and_then(|i| i.emission.clone()) {
        Some(e) => {
            if e.ell() != ell {
                return Err(FitError::Config(format!(
                    "warm-start emission has {} states, fit needs {}",
                    e.n_states(),
                    ell + 1
                )));
            }
            e
        }
        None => emission_init(obs, ell),
    };
    let hidden0 = match init.and_then(|i| i.hidden.clone()) {
        Some(h) => {
            if h.kind() != config.model_kind {
                return Err(FitError::Config(format!(
                    "warm-start hidden parameters are {}, fit wants {}",
                    h.kind(),
                    config.model_kind
                )));
            }
            h
        }
        None => default_hidden(config.model_kind, ell),
    };
    let fixed_initial = init.and_then(|i| i.initial.clone()).or_else(|| config.initial_dist.clone());

    let sigma_floor = sample_sd(obs) * config.sigma_floor_factor.sqrt();
    let sigma_floor = sigma_floor.max(T::of(1e-12));

    let outcomes: Vec<Result<RestartOutcome<T>, FitError>> = (0..config.restarts)
        .into_par_iter()
        .map(|restart| {
            run_restart(
                obs,
                config,
                &hidden0,
                &emission0,
                fixed_initial.as_deref(),
                sigma_floor,
                restart,
            )
        })
        .collect();

    let mut best: Option<RestartOutcome<T>> = None;
    for outcome in outcomes {
        let outcome = outcome?;
        let better = match &best {
            None => true,
            Some(b) => {
                outcome.trace.last().copied().unwrap_or(T::neg_infinity())
                    > b.trace.last().copied().unwrap_or(T::neg_infinity())
            }
        };
        if better {
            best = Some(outcome);
        }
    }
    let best = best.expect("at least one restart");

    let recovered_m = match (&best.theta_h, config.model_kind) {
        (HiddenParams::Vnd(p), ModelKind::Vnd) if ell <= DEFAULT_ELL_CAP => build_m_vnd(p).ok(),
        _ => None,
    };

    Ok(FitResult {
        model_kind: config.model_kind,
        ell,
        log_likelihood: best.trace.last().copied().unwrap_or(T::neg_infinity()),
        iterations: best.trace.len().saturating_sub(1),
        theta_h: best.theta_h,
        theta_e: best.theta_e,
        initial: best.initial,
        loglik_trace: best.trace,
        converged: best.converged,
        degenerate_emission: best.degenerate,
        n_obs: obs.len(),
        recovered_m,
    })
}

fn default_hidden<T: Scalar>(kind: ModelKind, ell: usize) -> HiddenParams<T> {
    let p = T::of(0.95);
    match kind {
        ModelKind::Vnd => HiddenParams::Vnd(
            VndParams::constant(ell, p, p).expect("default stay probabilities are valid"),
        ),
        ModelKind::Uc => HiddenParams::Uc { lambda: p, eta: p },
        ModelKind::Ck => HiddenParams::Ck {
            lambda: p,
            eta: p,
            kappa: T::of(0.2),
        },
    }
}

/// Jitter stay probabilities for restarts by rescaling the leave
/// probabilities, keeping everything strictly inside the unit interval.
fn jitter_hidden<T: Scalar>(base: &HiddenParams<T>, rng: &mut crate::rng::Rng) -> HiddenParams<T> {
    let mut wobble = |p: T| {
        let u: f64 = rng.gen_range(-1.5..1.5);
        let leave = (T::one() - p).max(T::of(1e-4)) * T::of(u.exp());
        (T::one() - leave).max(T::of(1e-4)).min(T::of(1.0 - 1e-4))
    };
    match base {
        HiddenParams::Vnd(p) => {
            let lambdas = p.lambdas().iter().map(|&v| wobble(v)).collect();
            let etas = p.etas().iter().map(|&v| wobble(v)).collect();
            HiddenParams::Vnd(VndParams::new(lambdas, etas).expect("jitter stays in [0,1]"))
        }
        HiddenParams::Uc { lambda, eta } => HiddenParams::Uc {
            lambda: wobble(*lambda),
            eta: wobble(*eta),
        },
        HiddenParams::Ck { lambda, eta, .. } => {
            let lambda = wobble(*lambda);
            let eta = wobble(*eta);
            let k: f64 = rng.gen_range(0.02..0.6);
            HiddenParams::Ck {
                lambda,
                eta,
                kappa: T::of(k),
            }
        }
    }
}

fn run_restart<T: Scalar>(
    obs: &ObservationSeries<T>,
    config: &FitConfig<T>,
    hidden0: &HiddenParams<T>,
    emission0: &GaussianEmission<T>,
    fixed_initial: Option<&[T]>,
    sigma_floor: T,
    restart: usize,
) -> Result<RestartOutcome<T>, FitError> {
    let ell = config.ell;
    let mut theta_h = if restart == 0 {
        hidden0.clone()
    } else {
        let mut rng = stream_rng(config.seed, restart as u64);
        jitter_hidden(hidden0, &mut rng)
    };
    let mut theta_e = emission0.clone();

    // The initial distribution is fixed for the whole run so the likelihood
    // being ascended does not move underneath the iteration.
    let initial: Vec<T> = match fixed_initial {
        Some(pi) => pi.to_vec(),
        None => stationary_distribution(&theta_h.q(ell)?).probabilities,
    };

    let mut trace: Vec<T> = Vec::new();
    let mut converged = false;
    let mut degenerate = false;

    for _ in 0..config.max_iterations {
        let model = HmmModel::new(theta_h.q(ell)?, theta_e.clone(), initial.clone())?;
        let stats = forward_backward_stats(&model, obs)?;
        let ll = stats.log_likelihood;
        if let Some(&prev) = trace.last() {
            trace.push(ll);
            if ll - prev < config.loglik_rel_tol * T::one().max(ll.abs()) {
                converged = true;
                break;
            }
        } else {
            trace.push(ll);
        }
        theta_h = m_step_hidden(
            &stats.transition_weight,
            ell,
            &theta_h,
            config.enforce_half_constraint && config.model_kind == ModelKind::Vnd,
        );
        let (e, deg) = m_step::emission_from_stats(&stats, &theta_e, sigma_floor);
        theta_e = e;
        degenerate |= deg;
    }

    Ok(RestartOutcome {
        theta_h,
        theta_e,
        initial,
        trace,
        converged,
        degenerate,
    })
}

fn sample_sd<T: Scalar>(obs: &ObservationSeries<T>) -> T {
    let n = T::from_usize(obs.len()).unwrap();
    let mean: T = obs.values().iter().copied().sum::<T>() / n;
    let var: T = obs
        .values()
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<T>()
        / n;
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::simulate;
    use approx::assert_abs_diff_eq;

    fn simulated_vnd2(k: usize, seed: u64) -> (ObservationSeries<f64>, VndParams<f64>) {
        let params = VndParams::new(vec![0.97, 0.93], vec![0.95, 0.9]).unwrap();
        let q = q_vnd_closed_form(&params);
        let e = GaussianEmission::uniform(2, 0.0, 1.0, 0.2).unwrap();
        let model = HmmModel::with_stationary_initial(q, e).unwrap();
        let (_, obs) = simulate(&model, k, seed).unwrap();
        (obs, params)
    }

    #[test]
    fn trace_is_monotone_and_parameters_are_close() {
        let (obs, params) = simulated_vnd2(20_000, 5);
        let mut config = FitConfig::new(ModelKind::Vnd, 2);
        config.restarts = 2;
        config.seed = 1;
        let fit = baum_welch(&obs, &config, None).unwrap();
        for w in fit.loglik_trace.windows(2) {
            assert!(w[1] >= w[0] - 1e-9, "trace decreased: {} -> {}", w[0], w[1]);
        }
        assert!(fit.converged);
        let fitted = fit.theta_h.as_vnd().unwrap();
        for j in 0..2 {
            assert_abs_diff_eq!(fitted.lambda(j), params.lambda(j), epsilon = 0.02);
            assert_abs_diff_eq!(fitted.eta(j + 1), params.eta(j + 1), epsilon = 0.02);
        }
        assert_abs_diff_eq!(fit.theta_e.nu(), 1.0, epsilon = 0.05);
        assert!(fit.recovered_m.is_some());
    }

    #[test]
    fn single_level_data_recovers_moments() {
        // hidden chain never leaves state 0, so the fit reduces to a Gaussian
        let values: Vec<f64> = (0..4000)
            .map(|i| 2.0 + 0.3 * ((i as f64 * 0.7).sin()))
            .collect();
        let mean: f64 = values.iter().sum::<f64>() / values.len() as f64;
        let sd = (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>()
            / values.len() as f64)
            .sqrt();
        let obs = ObservationSeries::new(values).unwrap();
        let mut config = FitConfig::new(ModelKind::Vnd, 1);
        config.restarts = 1;
        let fit = baum_welch(&obs, &config, None).unwrap();
        assert_abs_diff_eq!(fit.theta_e.mu(), mean, epsilon = 0.02);
        assert_abs_diff_eq!(fit.theta_e.sigmas()[0], sd, epsilon = 0.05);
    }

    #[test]
    fn ck_fit_on_uncoupled_data_estimates_no_coupling() {
        let q = q_uc(2, 0.95, 0.9).unwrap();
        let e = GaussianEmission::uniform(2, 0.0, 1.0, 0.2).unwrap();
        let model = HmmModel::with_stationary_initial(q, e).unwrap();
        let (_, obs) = simulate(&model, 30_000, 17).unwrap();
        let mut config = FitConfig::new(ModelKind::Ck, 2);
        config.restarts = 2;
        let fit = baum_welch(&obs, &config, None).unwrap();
        match fit.theta_h {
            HiddenParams::Ck { kappa, .. } => assert!(kappa < 0.05, "kappa = {kappa}"),
            _ => unreachable!(),
        }
    }

    #[test]
    fn fitted_q_round_trips_through_recovery() {
        let (obs, _) = simulated_vnd2(20_000, 23);
        let mut config = FitConfig::new(ModelKind::Vnd, 2);
        config.restarts = 1;
        let fit = baum_welch(&obs, &config, None).unwrap();
        let fitted = fit.theta_h.as_vnd().unwrap();
        let rec =
            crate::sum_chain::recover_vnd_params(&fit.q().unwrap(), true).unwrap();
        for j in 0..2 {
            assert_abs_diff_eq!(rec.lambda(j), fitted.lambda(j), epsilon = 1e-8);
            assert_abs_diff_eq!(rec.eta(j + 1), fitted.eta(j + 1), epsilon = 1e-8);
        }
    }

    #[test]
    fn config_validation() {
        let obs = ObservationSeries::new(vec![0.0, 1.0]).unwrap();
        let mut config = FitConfig::<f64>::new(ModelKind::Vnd, 0);
        assert!(baum_welch(&obs, &config, None).is_err());
        config.ell = 1;
        config.restarts = 0;
        assert!(baum_welch(&obs, &config, None).is_err());
    }
}
