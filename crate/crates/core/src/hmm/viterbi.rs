//! Most probable hidden path.

use super::{HmmError, HmmModel, ObservationSeries};
use crate::scalar::Scalar;

/// Log-domain Viterbi decoding.
///
/// Returns a path attaining the maximum joint log probability; ties break
/// toward the lower state index at every step, so the output is
/// deterministic.
pub fn viterbi<T: Scalar>(
    model: &HmmModel<T>,
    obs: &ObservationSeries<T>,
) -> Result<Vec<usize>, HmmError> {
    let n = model.n_states();
    let k_len = obs.len();
    let y = obs.values();

    let log_q: Vec<T> = (0..n * n)
        .map(|idx| model.hidden().get(idx / n, idx % n).ln())
        .collect();

    let mut score: Vec<T> = (0..n)
        .map(|s| model.initial()[s].ln() + model.emission().log_density(y[0], s))
        .collect();
    let mut back = vec![0usize; k_len * n];
    let mut next = vec![T::zero(); n];

    for k in 1..k_len {
        for s in 0..n {
            let mut best = T::neg_infinity();
            let mut arg = 0usize;
            for r in 0..n {
                let cand = score[r] + log_q[r * n + s];
                if cand > best {
                    best = cand;
                    arg = r;
                }
            }
            next[s] = best + model.emission().log_density(y[k], s);
            back[k * n + s] = arg;
        }
        std::mem::swap(&mut score, &mut next);
    }

    let mut state = 0usize;
    let mut best = T::neg_infinity();
    for (s, &v) in score.iter().enumerate() {
        if v > best {
            best = v;
            state = s;
        }
    }
    let mut path = vec![0usize; k_len];
    path[k_len - 1] = state;
    for k in (1..k_len).rev() {
        state = back[k * n + state];
        path[k - 1] = state;
    }
    Ok(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hmm::{complete_log_likelihood, GaussianEmission};
    use crate::markov_core::SumTransitionMatrix;

    fn toy_model() -> HmmModel<f64> {
        let q = SumTransitionMatrix::new(2, vec![0.8, 0.15, 0.05, 0.1, 0.8, 0.1, 0.05, 0.25, 0.7])
            .unwrap();
        let e = GaussianEmission::new(0.0, 1.0, vec![0.4, 0.5, 0.3]).unwrap();
        HmmModel::new(q, e, vec![0.5, 0.3, 0.2]).unwrap()
    }

    fn brute_force_best(model: &HmmModel<f64>, obs: &ObservationSeries<f64>) -> (Vec<usize>, f64) {
        let n = model.n_states();
        let k = obs.len();
        let mut best_path = Vec::new();
        let mut best = f64::NEG_INFINITY;
        for code in 0..n.pow(k as u32) {
            let mut path = Vec::with_capacity(k);
            let mut c = code;
            for _ in 0..k {
                path.push(c % n);
                c /= n;
            }
            let lp = complete_log_likelihood(model, &path, obs).unwrap();
            if lp > best {
                best = lp;
                best_path = path;
            }
        }
        (best_path, best)
    }

    #[test]
    fn attains_the_enumerated_maximum() {
        let model = toy_model();
        let obs = ObservationSeries::new(vec![0.1, 1.2, 2.1, 1.0, 0.2, 1.6, 0.9]).unwrap();
        let path = viterbi(&model, &obs).unwrap();
        let (best_path, best) = brute_force_best(&model, &obs);
        let lp = complete_log_likelihood(&model, &path, &obs).unwrap();
        assert!((lp - best).abs() < 1e-10);
        assert_eq!(path, best_path);
    }

    #[test]
    fn well_separated_levels_quantize() {
        let model = toy_model(); // sigmas ~0.3-0.5 against unit level gaps
        let obs = ObservationSeries::new(vec![0.0, 0.0, 1.0, 2.0, 2.0, 1.0, 0.0]).unwrap();
        let path = viterbi(&model, &obs).unwrap();
        assert_eq!(path, vec![0, 0, 1, 2, 2, 1, 0]);
    }

    #[test]
    fn constant_observations_stay_in_the_sticky_state() {
        let q = SumTransitionMatrix::new(1, vec![0.99, 0.01, 0.2, 0.8]).unwrap();
        let e = GaussianEmission::uniform(1, 0.5, 1.0, 0.3).unwrap();
        let model = HmmModel::new(q, e, vec![0.9, 0.1]).unwrap();
        let obs = ObservationSeries::new(vec![0.5; 40]).unwrap();
        let path = viterbi(&model, &obs).unwrap();
        assert!(path.iter().all(|&s| s == 0));
    }
}
