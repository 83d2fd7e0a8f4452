//! Construction of the dense vector-chain transition matrices.

use super::{
    check_probability, FullTransitionMatrix, MarkovError, VndParams, DEFAULT_ELL_CAP,
};
use crate::scalar::{powi0, Scalar};

fn check_cap(ell: usize, cap: usize) -> Result<(), MarkovError> {
    if ell == 0 {
        Err(MarkovError::ZeroEmitters)
    } else if ell > cap {
        Err(MarkovError::EllTooLarge { ell, cap })
    } else {
        Ok(())
    }
}

/// Norm-dependent transition matrix.
///
/// In a row with `r` open emitters, every closed emitter independently stays
/// closed with probability `lambda_r` and every open emitter stays open with
/// probability `eta_r`; the entry for a transition is the product over
/// emitters of these conditional probabilities.
pub fn build_m_vnd<T: Scalar>(params: &VndParams<T>) -> Result<FullTransitionMatrix<T>, MarkovError> {
    build_m_vnd_with_cap(params, DEFAULT_ELL_CAP)
}

/// [`build_m_vnd`] with an explicit cap on `ell` (memory guard).
pub fn build_m_vnd_with_cap<T: Scalar>(
    params: &VndParams<T>,
    cap: usize,
) -> Result<FullTransitionMatrix<T>, MarkovError> {
    let ell = params.ell();
    check_cap(ell, cap)?;
    let dim = 1usize << ell;
    let mut entries = Vec::with_capacity(dim * dim);
    for x in 0..dim {
        let r = x.count_ones() as usize;
        let lam = params.lambda_at(r);
        let eta = params.eta_at(r);
        let one_m_lam = T::one() - lam;
        let one_m_eta = T::one() - eta;
        for y in 0..dim {
            let (stay_closed, open, stay_open, close) =
                FullTransitionMatrix::<T>::pattern_counts(ell, x, y);
            entries.push(
                powi0(lam, stay_closed)
                    * powi0(one_m_lam, open)
                    * powi0(eta, stay_open)
                    * powi0(one_m_eta, close),
            );
        }
    }
    Ok(FullTransitionMatrix::from_vec_unchecked(ell, entries))
}

/// Uncoupled chain: all emitters move independently with the same two stay
/// probabilities, regardless of how many are open.
pub fn build_m_uc<T: Scalar>(
    ell: usize,
    lambda: T,
    eta: T,
) -> Result<FullTransitionMatrix<T>, MarkovError> {
    check_cap(ell, DEFAULT_ELL_CAP)?;
    check_probability("lambda", lambda)?;
    check_probability("eta", eta)?;
    let dim = 1usize << ell;
    let one_m_lam = T::one() - lambda;
    let one_m_eta = T::one() - eta;
    let mut entries = Vec::with_capacity(dim * dim);
    for x in 0..dim {
        for y in 0..dim {
            let (stay_closed, open, stay_open, close) =
                FullTransitionMatrix::<T>::pattern_counts(ell, x, y);
            entries.push(
                powi0(lambda, stay_closed)
                    * powi0(one_m_lam, open)
                    * powi0(eta, stay_open)
                    * powi0(one_m_eta, close),
            );
        }
    }
    Ok(FullTransitionMatrix::from_vec_unchecked(ell, entries))
}

/// Fully coupled chain: all emitters copy emitter 1, so only the all-closed
/// and all-open columns carry mass. Rows are keyed by the state of emitter 1;
/// `p00` is the stay probability of the all-closed state, `p11` of the
/// all-open state.
pub fn build_m_fc<T: Scalar>(
    ell: usize,
    p00: T,
    p11: T,
) -> Result<FullTransitionMatrix<T>, MarkovError> {
    check_cap(ell, DEFAULT_ELL_CAP)?;
    check_probability("p00", p00)?;
    check_probability("p11", p11)?;
    let dim = 1usize << ell;
    let mut entries = vec![T::zero(); dim * dim];
    for x in 0..dim {
        let (to_zeros, to_ones) = if x & 1 == 0 {
            (p00, T::one() - p00)
        } else {
            (T::one() - p11, p11)
        };
        entries[x * dim] = to_zeros;
        entries[x * dim + dim - 1] = to_ones;
    }
    Ok(FullTransitionMatrix::from_vec_unchecked(ell, entries))
}

/// Linear coupling between the fully coupled and uncoupled chains with
/// mixing weight `kappa` on the coupled part.
pub fn build_m_ck<T: Scalar>(
    ell: usize,
    lambda: T,
    eta: T,
    kappa: T,
) -> Result<FullTransitionMatrix<T>, MarkovError> {
    check_probability("kappa", kappa)?;
    let fc = build_m_fc(ell, lambda, eta)?;
    let uc = build_m_uc(ell, lambda, eta)?;
    let one_m_kappa = T::one() - kappa;
    let entries = fc
        .entries()
        .iter()
        .zip(uc.entries())
        .map(|(&f, &u)| kappa * f + one_m_kappa * u)
        .collect();
    Ok(FullTransitionMatrix::from_vec_unchecked(ell, entries))
}
