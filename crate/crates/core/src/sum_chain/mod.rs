//! Closed-form sum-chain transition matrices and parameter recovery.
//!
//! The sum chain counts open emitters. For the norm-dependent model its
//! `(ell+1) x (ell+1)` transition matrix has a closed form: the move from
//! `i` open emitters to `j` decomposes over the number `r` of emitters that
//! close, with binomial coefficients counting the arrangements. Building the
//! matrix this way costs `O(ell^3)` and never touches the `2^ell` state
//! space.

mod recover;

pub use recover::{recover_vnd_params, recover_vnd_params_with, RecoverError, RecoverOptions, RecoveredVnd};

use crate::markov_core::{check_probability, MarkovError, SumTransitionMatrix, VndParams};
use crate::scalar::{powi0_d, Scalar};

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
    }
    acc
}

/// One row of the norm-dependent sum chain together with its partial
/// derivatives in the row's stay probabilities.
///
/// Row `i` depends only on `(lambda_i, eta_i)`; this is what makes the
/// numeric maximization step of the estimator decompose row by row.
pub(crate) fn q_vnd_row_with_grad<T: Scalar>(
    ell: usize,
    i: usize,
    lam: T,
    eta: T,
) -> (Vec<T>, Vec<T>, Vec<T>) {
    let one_m_lam = T::one() - lam;
    let one_m_eta = T::one() - eta;
    let mut row = Vec::with_capacity(ell + 1);
    let mut d_lam = Vec::with_capacity(ell + 1);
    let mut d_eta = Vec::with_capacity(ell + 1);
    for j in 0..=ell {
        let r_lo = i.saturating_sub(j);
        let r_hi = i.min(ell - j);
        let mut q = T::zero();
        let mut ql = T::zero();
        let mut qe = T::zero();
        for r in r_lo..=r_hi {
            let opened = j + r - i; // r >= i - j keeps this nonnegative
            let coeff = T::from_u128(binomial(i, r) * binomial(ell - i, opened)).unwrap();
            let (ep, ed) = powi0_d(eta, i - r);
            let (tp, td) = powi0_d(one_m_eta, r);
            let (lp, ld) = powi0_d(lam, ell - j - r);
            let (mp, md) = powi0_d(one_m_lam, opened);
            q += coeff * ep * tp * lp * mp;
            qe += coeff * (ed * tp - ep * td) * lp * mp;
            ql += coeff * ep * tp * (ld * mp - lp * md);
        }
        row.push(q);
        d_lam.push(ql);
        d_eta.push(qe);
    }
    (row, d_lam, d_eta)
}

pub(crate) fn q_vnd_row<T: Scalar>(ell: usize, i: usize, lam: T, eta: T) -> Vec<T> {
    q_vnd_row_with_grad(ell, i, lam, eta).0
}

/// Sum-chain transition matrix of the norm-dependent model, built from the
/// binomial closed form.
pub fn q_vnd_closed_form<T: Scalar>(params: &VndParams<T>) -> SumTransitionMatrix<T> {
    let ell = params.ell();
    let n = ell + 1;
    let mut entries = Vec::with_capacity(n * n);
    for i in 0..n {
        entries.extend(q_vnd_row(ell, i, params.lambda_at(i), params.eta_at(i)));
    }
    SumTransitionMatrix::from_vec_unchecked(ell, entries)
}

/// Sum chain of the uncoupled model: the closed form with all stay
/// probabilities equal.
pub fn q_uc<T: Scalar>(ell: usize, lambda: T, eta: T) -> Result<SumTransitionMatrix<T>, MarkovError> {
    let params = VndParams::constant(ell, lambda, eta)?;
    Ok(q_vnd_closed_form(&params))
}

/// Sum chain of the fully coupled model.
///
/// From all-closed the system stays with probability `lambda`, otherwise
/// jumps to all-open; symmetrically from all-open with `eta`. Intermediate
/// levels are never produced by coupled dynamics; their rows use the
/// symmetric completion (half mass to each extreme) adopted by the
/// linear-coupling sum model.
pub fn q_fc<T: Scalar>(ell: usize, lambda: T, eta: T) -> Result<SumTransitionMatrix<T>, MarkovError> {
    if ell == 0 {
        return Err(MarkovError::ZeroEmitters);
    }
    check_probability("lambda", lambda)?;
    check_probability("eta", eta)?;
    let n = ell + 1;
    let mut entries = vec![T::zero(); n * n];
    let half = T::of(0.5);
    for i in 0..n {
        let (to_zero, to_full) = if i == 0 {
            (lambda, T::one() - lambda)
        } else if i == ell {
            (T::one() - eta, eta)
        } else {
            (half, half)
        };
        entries[i * n] = to_zero;
        entries[i * n + ell] = to_full;
    }
    Ok(SumTransitionMatrix::from_vec_unchecked(ell, entries))
}

/// Sum chain of the linear-coupling model: convex combination of the
/// uncoupled and fully coupled sum chains with weight `kappa` on the coupled
/// part. For `ell = 2` this is exactly the three-state matrix used for model
/// comparison against the norm-dependent fit.
pub fn q_ck<T: Scalar>(
    ell: usize,
    lambda: T,
    eta: T,
    kappa: T,
) -> Result<SumTransitionMatrix<T>, MarkovError> {
    check_probability("kappa", kappa)?;
    let uc = q_uc(ell, lambda, eta)?;
    let fc = q_fc(ell, lambda, eta)?;
    let one_m_kappa = T::one() - kappa;
    let entries = uc
        .entries()
        .iter()
        .zip(fc.entries())
        .map(|(&u, &f)| one_m_kappa * u + kappa * f)
        .collect();
    Ok(SumTransitionMatrix::from_vec_unchecked(ell, entries))
}

/// Stationary distribution of a sum-chain matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct StationaryDistribution<T> {
    /// Probability vector over the sum states.
    pub probabilities: Vec<T>,
    /// False when the chain is not irreducible; the distribution is then the
    /// uniform fallback rather than a unique stationary law.
    pub irreducible: bool,
}

/// Left fixed point of `q`, by damped power iteration.
///
/// Reducible chains have no unique stationary law; the uniform distribution
/// is returned with `irreducible = false` instead of failing.
pub fn stationary_distribution<T: Scalar>(q: &SumTransitionMatrix<T>) -> StationaryDistribution<T> {
    let n = q.n_states();
    let uniform = T::one() / T::from_usize(n).unwrap();
    if !is_irreducible(q) {
        return StationaryDistribution {
            probabilities: vec![uniform; n],
            irreducible: false,
        };
    }
    // Damping with the lazy chain (Q + I)/2 keeps the iteration convergent
    // for periodic chains and leaves the fixed point unchanged.
    let half = T::of(0.5);
    let tol = T::of(1e-15);
    let mut v = vec![uniform; n];
    let mut next = vec![T::zero(); n];
    for _ in 0..200_000 {
        for x in next.iter_mut() {
            *x = T::zero();
        }
        for i in 0..n {
            let vi = v[i];
            for (j, &qij) in q.row(i).iter().enumerate() {
                next[j] += vi * qij;
            }
        }
        let mut diff = T::zero();
        let mut total = T::zero();
        for j in 0..n {
            next[j] = half * (next[j] + v[j]);
            total += next[j];
        }
        for j in 0..n {
            next[j] = next[j] / total;
            diff = diff.max((next[j] - v[j]).abs());
        }
        std::mem::swap(&mut v, &mut next);
        if diff < tol {
            break;
        }
    }
    StationaryDistribution {
        probabilities: v,
        irreducible: true,
    }
}

fn is_irreducible<T: Scalar>(q: &SumTransitionMatrix<T>) -> bool {
    let n = q.n_states();
    let forward = |from: usize, transpose: bool| -> usize {
        let mut seen = vec![false; n];
        let mut stack = vec![from];
        seen[from] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for j in 0..n {
                let edge = if transpose { q.get(j, i) } else { q.get(i, j) };
                if edge > T::zero() && !seen[j] {
                    seen[j] = true;
                    count += 1;
                    stack.push(j);
                }
            }
        }
        count
    };
    forward(0, false) == n && forward(0, true) == n
}
