//! Maximization steps over the parametrized hidden chains and the Gaussian
//! emission.

use super::HiddenParams;
use crate::hmm::{FilteringResult, GaussianEmission, HmmSufficientStats, ObservationSeries};
use crate::optim::{maximize_unit_box, OptimOptions};
use crate::scalar::Scalar;
use crate::sum_chain::q_vnd_row_with_grad;

/// Fixed jitter offsets for the extra multi-start points around a warm start.
const JITTER_1D: [f64; 4] = [0.12, -0.12, 0.3, -0.3];
const JITTER_2D: [(f64, f64); 4] = [(0.12, -0.12), (-0.12, 0.12), (0.3, 0.3), (-0.3, -0.3)];

fn clamp01<T: Scalar>(v: T) -> T {
    v.max(T::of(1e-4)).min(T::of(1.0 - 1e-4))
}

/// Maximize `sum_j counts[j] * ln q_row[j]` over the row's own parameters,
/// multi-starting from the warm point plus four jittered points. Terms with
/// zero expected count are skipped; a row with no mass keeps its warm values.
struct RowProblem<'a, T> {
    ell: usize,
    row: usize,
    counts: &'a [T],
}

impl<'a, T: Scalar> RowProblem<'a, T> {
    fn value(&self, lam: T, eta: T) -> T {
        let (q, _, _) = q_vnd_row_with_grad(self.ell, self.row, lam, eta);
        let mut acc = T::zero();
        for (j, &c) in self.counts.iter().enumerate() {
            if c > T::zero() {
                acc += c * q[j].ln();
            }
        }
        acc
    }

    /// Gradient of the objective in `(lambda, eta)`.
    fn grad(&self, lam: T, eta: T) -> (T, T) {
        let (q, dl, de) = q_vnd_row_with_grad(self.ell, self.row, lam, eta);
        let mut gl = T::zero();
        let mut ge = T::zero();
        for (j, &c) in self.counts.iter().enumerate() {
            if c > T::zero() && q[j] > T::zero() {
                gl += c * dl[j] / q[j];
                ge += c * de[j] / q[j];
            }
        }
        (gl, ge)
    }
}

/// One-parameter rows: the closed-emitter parameter on the bottom row, the
/// open-emitter parameter on the top row.
fn solve_row_1d<T: Scalar>(problem: &RowProblem<T>, warm: T, is_lambda: bool) -> T {
    let opts = OptimOptions::default();
    let wrap = |v: T| if is_lambda { (v, T::one()) } else { (T::one(), v) };
    let f = |x: &[T]| {
        let (lam, eta) = wrap(x[0]);
        problem.value(lam, eta)
    };
    let g = |x: &[T]| {
        let (lam, eta) = wrap(x[0]);
        let (gl, ge) = problem.grad(lam, eta);
        vec![if is_lambda { gl } else { ge }]
    };
    let mut best_x = warm;
    let mut best_v = f(&[warm]);
    let mut starts = vec![warm];
    starts.extend(JITTER_1D.iter().map(|&d| clamp01(warm + T::of(d))));
    for s in starts {
        let r = maximize_unit_box(f, Some(g), &[s], &opts);
        if r.value > best_v {
            best_v = r.value;
            best_x = r.x[0];
        }
    }
    best_x
}

/// Two-parameter interior rows, optionally restricted to the identifiable
/// branch `lambda >= 1 - eta` via the slack coordinate `u` in
/// `eta = 1 - lambda * (1 - u)`.
fn solve_row_2d<T: Scalar>(
    problem: &RowProblem<T>,
    warm: (T, T),
    half_constraint: bool,
) -> (T, T) {
    let opts = OptimOptions::default();
    if half_constraint {
        let to_eta = |lam: T, u: T| T::one() - lam * (T::one() - u);
        let f = |x: &[T]| problem.value(x[0], to_eta(x[0], x[1]));
        let g = |x: &[T]| {
            let (lam, u) = (x[0], x[1]);
            let eta = to_eta(lam, u);
            let (gl, ge) = problem.grad(lam, eta);
            vec![gl + ge * (u - T::one()), ge * lam]
        };
        let warm_u = if warm.0 > T::zero() {
            clamp_unit((warm.1 - (T::one() - warm.0)) / warm.0)
        } else {
            T::of(0.5)
        };
        let warm_pt = (warm.0, warm_u);
        let mut best = (warm_pt.0, warm_pt.1, f(&[warm_pt.0, warm_pt.1]));
        let mut starts = vec![warm_pt];
        starts.extend(
            JITTER_2D
                .iter()
                .map(|&(a, b)| (clamp01(warm_pt.0 + T::of(a)), clamp01(warm_pt.1 + T::of(b)))),
        );
        for (a, b) in starts {
            let r = maximize_unit_box(f, Some(g), &[a, b], &opts);
            if r.value > best.2 {
                best = (r.x[0], r.x[1], r.value);
            }
        }
        (best.0, to_eta(best.0, best.1))
    } else {
        let f = |x: &[T]| problem.value(x[0], x[1]);
        let g = |x: &[T]| {
            let (gl, ge) = problem.grad(x[0], x[1]);
            vec![gl, ge]
        };
        let mut best = (warm.0, warm.1, f(&[warm.0, warm.1]));
        let mut starts = vec![warm];
        starts.extend(
            JITTER_2D
                .iter()
                .map(|&(a, b)| (clamp01(warm.0 + T::of(a)), clamp01(warm.1 + T::of(b)))),
        );
        for (a, b) in starts {
            let r = maximize_unit_box(f, Some(g), &[a, b], &opts);
            if r.value > best.2 {
                best = (r.x[0], r.x[1], r.value);
            }
        }
        (best.0, best.1)
    }
}

fn clamp_unit<T: Scalar>(v: T) -> T {
    v.max(T::zero()).min(T::one())
}

/// Expected-count maximization of the hidden-chain parameters.
///
/// `transition_weight` holds the expected transition counts produced by the
/// filtering pass. The norm-dependent objective separates by row into one-
/// and two-parameter problems; the uncoupled and linear-coupling objectives
/// couple the rows and are maximized jointly. The result never scores below
/// the warm start.
pub fn m_step_hidden<T: Scalar>(
    transition_weight: &[T],
    ell: usize,
    warm: &HiddenParams<T>,
    enforce_half_constraint: bool,
) -> HiddenParams<T> {
    let n = ell + 1;
    debug_assert_eq!(transition_weight.len(), n * n);
    match warm {
        HiddenParams::Vnd(params) => {
            let mut lambdas = params.lambdas().to_vec();
            let mut etas = params.etas().to_vec();
            for i in 0..=ell {
                let counts = &transition_weight[i * n..(i + 1) * n];
                if counts.iter().all(|&c| c <= T::zero()) {
                    continue;
                }
                let problem = RowProblem { ell, row: i, counts };
                if i == 0 {
                    lambdas[0] = solve_row_1d(&problem, lambdas[0], true);
                } else if i == ell {
                    etas[ell - 1] = solve_row_1d(&problem, etas[ell - 1], false);
                } else {
                    let constrained = enforce_half_constraint && ell % 2 == 0 && i == ell / 2;
                    let (lam, eta) =
                        solve_row_2d(&problem, (lambdas[i], etas[i - 1]), constrained);
                    lambdas[i] = lam;
                    etas[i - 1] = eta;
                }
            }
            HiddenParams::Vnd(
                crate::markov_core::VndParams::new(lambdas, etas)
                    .expect("optimizer keeps parameters in [0,1]"),
            )
        }
        HiddenParams::Uc { lambda, eta } => {
            let f = |x: &[T]| uc_objective(transition_weight, ell, x[0], x[1]);
            let g = |x: &[T]| {
                let (gl, ge) = uc_gradient(transition_weight, ell, x[0], x[1]);
                vec![gl, ge]
            };
            let warm_pt = (*lambda, *eta);
            let opts = OptimOptions::default();
            let mut best = (warm_pt.0, warm_pt.1, f(&[warm_pt.0, warm_pt.1]));
            let mut starts = vec![warm_pt];
            starts.extend(JITTER_2D.iter().map(|&(a, b)| {
                (clamp01(warm_pt.0 + T::of(a)), clamp01(warm_pt.1 + T::of(b)))
            }));
            for (a, b) in starts {
                let r = maximize_unit_box(f, Some(g), &[a, b], &opts);
                if r.value > best.2 {
                    best = (r.x[0], r.x[1], r.value);
                }
            }
            HiddenParams::Uc {
                lambda: best.0,
                eta: best.1,
            }
        }
        HiddenParams::Ck { lambda, eta, kappa } => {
            let f = |x: &[T]| ck_objective(transition_weight, ell, x[0], x[1], x[2]);
            let g = |x: &[T]| ck_gradient(transition_weight, ell, x[0], x[1], x[2]);
            let warm_pt = [*lambda, *eta, *kappa];
            let opts = OptimOptions::default();
            let mut best = (warm_pt, f(&warm_pt));
            let mut starts = vec![warm_pt];
            for &(a, b) in JITTER_2D.iter() {
                starts.push([
                    clamp01(warm_pt[0] + T::of(a)),
                    clamp01(warm_pt[1] + T::of(b)),
                    clamp01(warm_pt[2] + T::of(a * 0.5)),
                ]);
            }
            for s in starts {
                let r = maximize_unit_box(f, Some(g), &s, &opts);
                if r.value > best.1 {
                    best = ([r.x[0], r.x[1], r.x[2]], r.value);
                }
            }
            HiddenParams::Ck {
                lambda: best.0[0],
                eta: best.0[1],
                kappa: best.0[2],
            }
        }
    }
}

fn uc_rows<T: Scalar>(ell: usize, lambda: T, eta: T, i: usize) -> (Vec<T>, Vec<T>, Vec<T>) {
    let lam_i = if i == ell { T::one() } else { lambda };
    let eta_i = if i == 0 { T::one() } else { eta };
    q_vnd_row_with_grad(ell, i, lam_i, eta_i)
}

fn uc_objective<T: Scalar>(counts: &[T], ell: usize, lambda: T, eta: T) -> T {
    let n = ell + 1;
    let mut acc = T::zero();
    for i in 0..=ell {
        let row_counts = &counts[i * n..(i + 1) * n];
        if row_counts.iter().all(|&c| c <= T::zero()) {
            continue;
        }
        let (q, _, _) = uc_rows(ell, lambda, eta, i);
        for (j, &c) in row_counts.iter().enumerate() {
            if c > T::zero() {
                acc += c * q[j].ln();
            }
        }
    }
    acc
}

fn uc_gradient<T: Scalar>(counts: &[T], ell: usize, lambda: T, eta: T) -> (T, T) {
    let n = ell + 1;
    let mut gl = T::zero();
    let mut ge = T::zero();
    for i in 0..=ell {
        let row_counts = &counts[i * n..(i + 1) * n];
        if row_counts.iter().all(|&c| c <= T::zero()) {
            continue;
        }
        let (q, dl, de) = uc_rows(ell, lambda, eta, i);
        for (j, &c) in row_counts.iter().enumerate() {
            if c > T::zero() && q[j] > T::zero() {
                if i < ell {
                    gl += c * dl[j] / q[j];
                }
                if i > 0 {
                    ge += c * de[j] / q[j];
                }
            }
        }
    }
    (gl, ge)
}

/// Fully coupled sum-chain row and its parameter derivatives.
fn fc_row<T: Scalar>(ell: usize, i: usize, lambda: T, eta: T) -> (Vec<T>, Vec<T>, Vec<T>) {
    let n = ell + 1;
    let mut row = vec![T::zero(); n];
    let mut dl = vec![T::zero(); n];
    let mut de = vec![T::zero(); n];
    if i == 0 {
        row[0] = lambda;
        row[ell] = T::one() - lambda;
        dl[0] = T::one();
        dl[ell] = -T::one();
    } else if i == ell {
        row[0] = T::one() - eta;
        row[ell] = eta;
        de[0] = -T::one();
        de[ell] = T::one();
    } else {
        row[0] = T::of(0.5);
        row[ell] = T::of(0.5);
    }
    (row, dl, de)
}

fn ck_objective<T: Scalar>(counts: &[T], ell: usize, lambda: T, eta: T, kappa: T) -> T {
    let n = ell + 1;
    let mut acc = T::zero();
    for i in 0..=ell {
        let row_counts = &counts[i * n..(i + 1) * n];
        if row_counts.iter().all(|&c| c <= T::zero()) {
            continue;
        }
        let (u, _, _) = uc_rows(ell, lambda, eta, i);
        let (fc, _, _) = fc_row(ell, i, lambda, eta);
        for (j, &c) in row_counts.iter().enumerate() {
            if c > T::zero() {
                let q = (T::one() - kappa) * u[j] + kappa * fc[j];
                acc += c * q.ln();
            }
        }
    }
    acc
}

fn ck_gradient<T: Scalar>(counts: &[T], ell: usize, lambda: T, eta: T, kappa: T) -> Vec<T> {
    let n = ell + 1;
    let mut gl = T::zero();
    let mut ge = T::zero();
    let mut gk = T::zero();
    for i in 0..=ell {
        let row_counts = &counts[i * n..(i + 1) * n];
        if row_counts.iter().all(|&c| c <= T::zero()) {
            continue;
        }
        let (u, ul, ue) = uc_rows(ell, lambda, eta, i);
        let (fc, fl, fe) = fc_row(ell, i, lambda, eta);
        for (j, &c) in row_counts.iter().enumerate() {
            if c <= T::zero() {
                continue;
            }
            let q = (T::one() - kappa) * u[j] + kappa * fc[j];
            if q <= T::zero() {
                continue;
            }
            let w = c / q;
            let dul = if i < ell { ul[j] } else { T::zero() };
            let due = if i > 0 { ue[j] } else { T::zero() };
            gl += w * ((T::one() - kappa) * dul + kappa * fl[j]);
            ge += w * ((T::one() - kappa) * due + kappa * fe[j]);
            gk += w * (fc[j] - u[j]);
        }
    }
    vec![gl, ge, gk]
}

/// Weighted Gaussian maximization: `(mu, nu)` from the noise-weighted linear
/// regression of the observations on the state index (weights are the state
/// posteriors divided by the previous variances, the exact maximizer at the
/// previous noise scales), then per-state variances from the weighted
/// residuals, floored. States with no effective weight keep their previous
/// scale and raise the degenerate flag, as does an engaged floor.
pub(crate) fn emission_from_stats<T: Scalar>(
    stats: &HmmSufficientStats<T>,
    previous: &GaussianEmission<T>,
    sigma_floor: T,
) -> (GaussianEmission<T>, bool) {
    let n = stats.n_states;
    let total: T = stats.state_weight.iter().copied().sum();
    let weight_floor = T::of(1e-12) * total.max(T::one());
    let mut degenerate = false;

    // GLS normal equations for (mu, nu)
    let mut a11 = T::zero();
    let mut a12 = T::zero();
    let mut a22 = T::zero();
    let mut b1 = T::zero();
    let mut b2 = T::zero();
    for s in 0..n {
        let w = stats.state_weight[s];
        if w <= weight_floor {
            continue;
        }
        let sigma = previous.sigmas()[s];
        let tau = T::one() / (sigma * sigma);
        let sf = T::from_usize(s).unwrap();
        a11 += w * tau;
        a12 += sf * w * tau;
        a22 += sf * sf * w * tau;
        b1 += tau * stats.weighted_y[s];
        b2 += sf * tau * stats.weighted_y[s];
    }
    let det = a11 * a22 - a12 * a12;
    let scale = (a11 * a22).abs().max(T::one());
    let (mu, nu) = if det.abs() > T::of(1e-13) * scale {
        ((a22 * b1 - a12 * b2) / det, (a11 * b2 - a12 * b1) / det)
    } else if a11 > T::zero() {
        // all mass on one level: mean identified, gap kept from the warm start
        ((b1 - previous.nu() * a12) / a11, previous.nu())
    } else {
        (previous.mu(), previous.nu())
    };

    let mut sigmas = Vec::with_capacity(n);
    for s in 0..n {
        let w = stats.state_weight[s];
        if w <= weight_floor {
            degenerate = true;
            sigmas.push(previous.sigmas()[s]);
            continue;
        }
        let m = mu + T::from_usize(s).unwrap() * nu;
        let var = (stats.weighted_y2[s] - (m + m) * stats.weighted_y[s] + m * m * w) / w;
        let floor_var = sigma_floor * sigma_floor;
        if var <= floor_var {
            degenerate = true;
            sigmas.push(sigma_floor);
        } else {
            sigmas.push(var.sqrt());
        }
    }
    let emission = GaussianEmission::new(mu, nu, sigmas)
        .expect("flooring keeps every noise scale positive");
    (emission, degenerate)
}

/// [`emission_from_stats`] on a fully materialized filtering result.
pub fn m_step_emission<T: Scalar>(
    filtering: &FilteringResult<T>,
    obs: &ObservationSeries<T>,
    previous: &GaussianEmission<T>,
    sigma_floor: T,
) -> (GaussianEmission<T>, bool) {
    let n = filtering.n_states();
    let mut stats = HmmSufficientStats {
        log_likelihood: filtering.log_likelihood(),
        n_states: n,
        transition_weight: vec![T::zero(); n * n],
        state_weight: vec![T::zero(); n],
        weighted_y: vec![T::zero(); n],
        weighted_y2: vec![T::zero(); n],
    };
    for (k, &y) in obs.values().iter().enumerate() {
        let row = filtering.univariate(k);
        for s in 0..n {
            let w = row[s];
            stats.state_weight[s] += w;
            stats.weighted_y[s] += w * y;
            stats.weighted_y2[s] += w * y * y;
        }
    }
    emission_from_stats(&stats, previous, sigma_floor)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov_core::VndParams;
    use crate::sum_chain::q_vnd_closed_form;
    use approx::assert_abs_diff_eq;

    #[test]
    fn single_emitter_matches_closed_form_mle() {
        // lambda = n00 / (n00 + n01), eta = n11 / (n10 + n11)
        let counts = vec![734.0, 61.0, 12.0, 544.0];
        let warm = HiddenParams::Vnd(VndParams::constant(1, 0.5, 0.5).unwrap());
        let out = m_step_hidden(&counts, 1, &warm, false);
        match out {
            HiddenParams::Vnd(p) => {
                assert_abs_diff_eq!(p.lambda(0), 734.0 / 795.0, epsilon = 1e-8);
                assert_abs_diff_eq!(p.eta(1), 544.0 / 556.0, epsilon = 1e-8);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn exact_counts_recover_generating_parameters() {
        let params = VndParams::new(vec![0.9, 0.8, 0.7], vec![0.6, 0.75, 0.85]).unwrap();
        let q = q_vnd_closed_form(&params);
        let n = 4;
        // expected counts proportional to stationary occupancy x transition law
        let pi = crate::sum_chain::stationary_distribution(&q).probabilities;
        let mut counts = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                counts[i * n + j] = 1e6 * pi[i] * q.get(i, j);
            }
        }
        let warm = HiddenParams::Vnd(VndParams::constant(3, 0.5, 0.5).unwrap());
        let out = m_step_hidden(&counts, 3, &warm, false);
        match out {
            HiddenParams::Vnd(p) => {
                for j in 0..3 {
                    assert_abs_diff_eq!(p.lambda(j), params.lambda(j), epsilon = 1e-4);
                    assert_abs_diff_eq!(p.eta(j + 1), params.eta(j + 1), epsilon = 1e-4);
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn diagonal_counts_drive_stay_probabilities_to_one() {
        let n = 3;
        let mut counts = vec![0.0; n * n];
        for i in 0..n {
            counts[i * n + i] = 100.0;
        }
        let warm = HiddenParams::Vnd(VndParams::constant(2, 0.6, 0.6).unwrap());
        let out = m_step_hidden(&counts, 2, &warm, false);
        match out {
            HiddenParams::Vnd(p) => {
                for j in 0..2 {
                    assert!(p.lambda(j) > 1.0 - 1e-6, "lambda_{j} = {}", p.lambda(j));
                    assert!(p.eta(j + 1) > 1.0 - 1e-6, "eta_{} = {}", j + 1, p.eta(j + 1));
                }
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn half_constraint_is_respected() {
        // counts pulling toward lambda_1 < 1 - eta_1
        let params = VndParams::new(vec![0.9, 0.2], vec![0.3, 0.89]).unwrap();
        let q = q_vnd_closed_form(&params);
        let n = 3;
        let mut counts = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                counts[i * n + j] = 1e5 * q.get(i, j);
            }
        }
        let warm = HiddenParams::Vnd(VndParams::constant(2, 0.6, 0.6).unwrap());
        let out = m_step_hidden(&counts, 2, &warm, true);
        match out {
            HiddenParams::Vnd(p) => {
                assert!(p.lambda(1) >= 1.0 - p.eta(1) - 1e-9);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn uc_step_recovers_shared_parameters() {
        let q = crate::sum_chain::q_uc(3, 0.88, 0.64).unwrap();
        let pi = crate::sum_chain::stationary_distribution(&q).probabilities;
        let n = 4;
        let mut counts = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                counts[i * n + j] = 1e6 * pi[i] * q.get(i, j);
            }
        }
        let warm = HiddenParams::Uc {
            lambda: 0.5,
            eta: 0.5,
        };
        match m_step_hidden(&counts, 3, &warm, false) {
            HiddenParams::Uc { lambda, eta } => {
                assert_abs_diff_eq!(lambda, 0.88, epsilon = 1e-5);
                assert_abs_diff_eq!(eta, 0.64, epsilon = 1e-5);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn ck_step_finds_zero_coupling_on_uncoupled_counts() {
        let q = crate::sum_chain::q_uc(2, 0.9, 0.8).unwrap();
        let pi = crate::sum_chain::stationary_distribution(&q).probabilities;
        let n = 3;
        let mut counts = vec![0.0; n * n];
        for i in 0..n {
            for j in 0..n {
                counts[i * n + j] = 1e6 * pi[i] * q.get(i, j);
            }
        }
        let warm = HiddenParams::Ck {
            lambda: 0.5,
            eta: 0.5,
            kappa: 0.3,
        };
        match m_step_hidden(&counts, 2, &warm, false) {
            HiddenParams::Ck { lambda, eta, kappa } => {
                assert_abs_diff_eq!(lambda, 0.9, epsilon = 1e-4);
                assert_abs_diff_eq!(eta, 0.8, epsilon = 1e-4);
                assert!(kappa < 1e-3, "kappa = {kappa}");
            }
            _ => unreachable!(),
        }
    }

    fn stats_from_weights(
        weights: &[Vec<f64>],
        ys: &[f64],
    ) -> HmmSufficientStats<f64> {
        let n = weights[0].len();
        let mut s = HmmSufficientStats {
            log_likelihood: 0.0,
            n_states: n,
            transition_weight: vec![0.0; n * n],
            state_weight: vec![0.0; n],
            weighted_y: vec![0.0; n],
            weighted_y2: vec![0.0; n],
        };
        for (w, &y) in weights.iter().zip(ys) {
            for st in 0..n {
                s.state_weight[st] += w[st];
                s.weighted_y[st] += w[st] * y;
                s.weighted_y2[st] += w[st] * y * y;
            }
        }
        s
    }

    #[test]
    fn emission_step_on_cleanly_assigned_levels() {
        // weights concentrated on the true states; mu and nu are exact, the
        // variances hit the floor
        let ys = vec![0.0, 0.0, 1.0, 1.0, 2.0, 2.0];
        let weights: Vec<Vec<f64>> = vec![
            vec![1.0, 0.0, 0.0],
            vec![1.0, 0.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 1.0, 0.0],
            vec![0.0, 0.0, 1.0],
            vec![0.0, 0.0, 1.0],
        ];
        let stats = stats_from_weights(&weights, &ys);
        let prev = GaussianEmission::uniform(2, 0.3, 0.8, 0.5).unwrap();
        let (e, degenerate) = emission_from_stats(&stats, &prev, 1e-4);
        assert_abs_diff_eq!(e.mu(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.nu(), 1.0, epsilon = 1e-12);
        assert!(degenerate);
        assert!(e.sigmas().iter().all(|&s| s == 1e-4));
    }

    #[test]
    fn emission_step_two_levels_equal_weights() {
        // equal noise scales in the warm start make the weighted regression
        // the plain one: mu is the lower level mean, nu the gap
        let ys = vec![-1.0, 1.0, 3.0, 5.0];
        let weights = vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![0.0, 1.0],
            vec![0.0, 1.0],
        ];
        let stats = stats_from_weights(&weights, &ys);
        let prev = GaussianEmission::uniform(1, 0.0, 1.0, 0.7).unwrap();
        let (e, _) = emission_from_stats(&stats, &prev, 1e-6);
        assert_abs_diff_eq!(e.mu(), 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.nu(), 4.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.sigmas()[0], 1.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.sigmas()[1], 1.0, epsilon = 1e-12);
    }

    #[test]
    fn emission_step_single_occupied_state() {
        let ys = vec![2.0, 2.5, 1.5, 2.0];
        let weights = vec![
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 0.0],
            vec![1.0, 0.0],
        ];
        let stats = stats_from_weights(&weights, &ys);
        let prev = GaussianEmission::uniform(1, 0.0, 3.0, 0.7).unwrap();
        let (e, degenerate) = emission_from_stats(&stats, &prev, 1e-6);
        assert!(degenerate); // state 1 never used
        assert_abs_diff_eq!(e.mu(), 2.0, epsilon = 1e-12);
        assert_abs_diff_eq!(e.nu(), 3.0, epsilon = 1e-12); // kept from warm start
        assert_abs_diff_eq!(e.sigmas()[0], (0.125f64).sqrt(), epsilon = 1e-12);
        assert_abs_diff_eq!(e.sigmas()[1], 0.7, epsilon = 1e-12);
    }
}
