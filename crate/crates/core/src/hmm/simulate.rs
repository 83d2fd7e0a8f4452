//! Seeded simulation of hidden paths and observations.

use rand::Rng as _;
use rand_distr::StandardNormal;

use super::{HmmError, HmmModel, ObservationSeries};
use crate::rng::{rng, Rng};
use crate::scalar::Scalar;

/// Draw an index from a probability vector given a uniform variate.
///
/// Sampling walks the cumulative sums in f64 regardless of the scalar type,
/// so a seed produces the same path at every precision.
fn sample_index<T: Scalar>(probs: &[T], u: f64) -> usize {
    let mut acc = 0.0;
    for (i, &p) in probs.iter().enumerate() {
        acc += p.as_f64();
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Simulate `k` steps of the hidden chain and their noisy observations.
///
/// The first state is drawn from the model's initial distribution, each
/// following state from the corresponding transition row, and each
/// observation from the emission law of the current state. Reproducible
/// given the seed.
pub fn simulate<T: Scalar>(
    model: &HmmModel<T>,
    k: usize,
    seed: u64,
) -> Result<(Vec<usize>, ObservationSeries<T>), HmmError> {
    simulate_with_rng(model, k, &mut rng(seed))
}

/// [`simulate`] drawing from a caller-managed stream (used by experiments to
/// split one seed into independent repetition streams).
pub fn simulate_with_rng<T: Scalar>(
    model: &HmmModel<T>,
    k: usize,
    rng: &mut Rng,
) -> Result<(Vec<usize>, ObservationSeries<T>), HmmError> {
    if k == 0 {
        return Err(HmmError::EmptySeries);
    }
    let mut path = Vec::with_capacity(k);
    let mut values = Vec::with_capacity(k);
    let mut state = sample_index(model.initial(), rng.gen::<f64>());
    for _ in 0..k {
        path.push(state);
        let noise: f64 = rng.sample(StandardNormal);
        let y = model.emission().mean(state) + model.emission().sigmas()[state] * T::of(noise);
        values.push(y);
        state = sample_index(model.hidden().row(state), rng.gen::<f64>());
    }
    Ok((path, ObservationSeries::new(values)?))
}
