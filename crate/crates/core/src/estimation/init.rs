//! Data-driven starting values for the emission parameters.

use crate::hmm::{GaussianEmission, ObservationSeries};
use crate::scalar::Scalar;

/// At most this many values enter the clustering; longer series are strided.
const CLUSTER_SAMPLE_CAP: usize = 100_000;

/// Initialize the emission from the level structure of the data: 1-D k-means
/// into `ell + 1` clusters seeded at quantiles, baseline at the lowest
/// center, increment from the mean inter-center gap, and per-cluster
/// standard deviations as noise scales. Deterministic.
pub fn emission_init<T: Scalar>(obs: &ObservationSeries<T>, ell: usize) -> GaussianEmission<T> {
    let values = obs.values();
    let stride = (values.len() / CLUSTER_SAMPLE_CAP).max(1);
    let mut sample: Vec<T> = values.iter().step_by(stride).copied().collect();
    sample.sort_by(|a, b| a.partial_cmp(b).expect("series values are finite"));
    let n = sample.len();
    let k = ell + 1;

    let quantile = |f: f64| sample[((f * (n - 1) as f64).round() as usize).min(n - 1)];
    let mut centers: Vec<T> = (0..k)
        .map(|i| quantile((i as f64 + 0.5) / k as f64))
        .collect();

    let spread = (sample[n - 1] - sample[0]).max(T::of(1e-12));
    for _ in 0..40 {
        // segment boundaries at midpoints between consecutive centers
        let boundaries: Vec<T> = centers
            .windows(2)
            .map(|w| (w[0] + w[1]) * T::of(0.5))
            .collect();
        let mut shift = T::zero();
        let mut start = 0usize;
        for (c, center) in centers.iter_mut().enumerate() {
            let end = if c < boundaries.len() {
                sample.partition_point(|&v| v < boundaries[c]).max(start)
            } else {
                n
            };
            if end > start {
                let seg = &sample[start..end];
                let mean: T = seg.iter().copied().sum::<T>() / T::from_usize(seg.len()).unwrap();
                shift = shift.max((mean - *center).abs());
                *center = mean;
            }
            start = end;
        }
        if shift < T::of(1e-10) * spread {
            break;
        }
    }
    centers.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mu = centers[0];
    let nu = if k > 1 {
        (centers[k - 1] - centers[0]) / T::from_usize(k - 1).unwrap()
    } else {
        T::zero()
    };

    let overall_sd = sd(&sample).max(T::of(1e-9));
    let mut sigmas = Vec::with_capacity(k);
    let boundaries: Vec<T> = centers
        .windows(2)
        .map(|w| (w[0] + w[1]) * T::of(0.5))
        .collect();
    let mut start = 0usize;
    for c in 0..k {
        let end = if c < boundaries.len() {
            sample.partition_point(|&v| v < boundaries[c]).max(start)
        } else {
            n
        };
        if end > start + 1 {
            sigmas.push(sd(&sample[start..end]).max(T::of(1e-3) * overall_sd));
        } else {
            sigmas.push(overall_sd);
        }
        start = end;
    }

    GaussianEmission::new(mu, nu, sigmas).expect("cluster noise scales are positive")
}

fn sd<T: Scalar>(values: &[T]) -> T {
    let n = T::from_usize(values.len()).unwrap();
    let mean: T = values.iter().copied().sum::<T>() / n;
    let var: T = values
        .iter()
        .map(|&v| (v - mean) * (v - mean))
        .sum::<T>()
        / n;
    var.sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;

    #[test]
    fn recovers_well_separated_levels() {
        // three levels at 0, 2, 4 with small jitter
        let mut values = Vec::new();
        for i in 0..300 {
            let level = (i % 3) as f64 * 2.0;
            let jitter = ((i * 37 % 100) as f64 / 100.0 - 0.5) * 0.2;
            values.push(level + jitter);
        }
        let obs = ObservationSeries::new(values).unwrap();
        let e = emission_init(&obs, 2);
        assert_abs_diff_eq!(e.mu(), 0.0, epsilon = 0.1);
        assert_abs_diff_eq!(e.nu(), 2.0, epsilon = 0.1);
        assert!(e.sigmas().iter().all(|&s| s > 0.0 && s < 0.2));
    }

    #[test]
    fn constant_data_is_not_fatal() {
        let obs = ObservationSeries::new(vec![1.5; 50]).unwrap();
        let e = emission_init(&obs, 1);
        assert_abs_diff_eq!(e.mu(), 1.5, epsilon = 1e-12);
        assert!(e.sigmas().iter().all(|&s| s > 0.0));
    }
}
