//! Vector Markov chains on `{0,1}^ell` and their aggregation to the sum chain.
//!
//! States are binary vectors over `ell` emitters, indexed canonically:
//! bit `i` of the little-endian state index is the state of emitter `i`.
//! The norm of a state is its number of open emitters, which partitions the
//! state space into level sets. Aggregating by level ("lumping") yields the
//! `(ell+1)`-state sum chain whenever the chain satisfies the lumping
//! property.

mod build;
mod structure;

pub use build::{build_m_ck, build_m_fc, build_m_uc, build_m_vnd, build_m_vnd_with_cap};
pub use structure::{
    extract_vnd_params, is_conditionally_independent, is_lumpable, is_permutation_invariant,
    lump, lump_with_disagreement, signature_class_count, StructureReport,
};

use thiserror::Error;

use crate::scalar::Scalar;

/// Hard cap on `ell` for dense `2^ell x 2^ell` construction (16.7M entries).
/// Sum-chain operations have no such cap.
pub const DEFAULT_ELL_CAP: usize = 12;

/// Default tolerance for the structural checks.
pub const DEFAULT_STRUCTURE_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MarkovError {
    #[error("number of emitters must be at least 1")]
    ZeroEmitters,
    #[error("number of emitters {ell} exceeds the dense-construction cap {cap}")]
    EllTooLarge { ell: usize, cap: usize },
    #[error("{name} = {value} is outside [0, 1]")]
    ProbabilityOutOfRange { name: &'static str, value: f64 },
    #[error("lambda and eta must have equal nonzero length, got {lambdas} and {etas}")]
    ParamLength { lambdas: usize, etas: usize },
    #[error("matrix must have {expected} entries ({side} x {side}), got {len}")]
    MatrixShape { expected: usize, side: usize, len: usize },
    #[error("row {row} sums to {sum}, expected 1 within {tol}")]
    RowNotStochastic { row: usize, sum: f64, tol: f64 },
    #[error("entry ({row}, {col}) = {value} is outside [0, 1]")]
    EntryOutOfRange { row: usize, col: usize, value: f64 },
}

/// A state of the vector chain: the joint on/off configuration of all emitters.
///
/// Stored as the canonical little-endian index; bit `i` is emitter `i`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct StateVector {
    ell: usize,
    index: usize,
}

impl StateVector {
    pub fn from_index(ell: usize, index: usize) -> Result<Self, MarkovError> {
        if ell == 0 {
            return Err(MarkovError::ZeroEmitters);
        }
        if index >= (1usize << ell) {
            return Err(MarkovError::MatrixShape {
                expected: 1 << ell,
                side: 1 << ell,
                len: index,
            });
        }
        Ok(Self { ell, index })
    }

    pub fn from_bits(bits: &[u8]) -> Result<Self, MarkovError> {
        if bits.is_empty() {
            return Err(MarkovError::ZeroEmitters);
        }
        let mut index = 0usize;
        for (i, &b) in bits.iter().enumerate() {
            if b > 1 {
                return Err(MarkovError::ProbabilityOutOfRange {
                    name: "state bit",
                    value: b as f64,
                });
            }
            index |= (b as usize) << i;
        }
        Ok(Self {
            ell: bits.len(),
            index,
        })
    }

    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn index(&self) -> usize {
        self.index
    }

    /// State of emitter `i` (0-based).
    pub fn bit(&self, i: usize) -> bool {
        debug_assert!(i < self.ell);
        (self.index >> i) & 1 == 1
    }

    pub fn bits(&self) -> Vec<u8> {
        (0..self.ell).map(|i| self.bit(i) as u8).collect()
    }

    /// Number of open emitters.
    pub fn one_norm(&self) -> usize {
        self.index.count_ones() as usize
    }
}

/// The `2*ell` stay probabilities of the norm-dependent chain.
///
/// `lambda[j]` is the probability that a closed emitter stays closed when
/// `j` emitters are open; `eta[m-1]` is the probability that an open emitter
/// stays open when `m` emitters are open. Indices run `j = 0..ell-1` and
/// `m = 1..ell`: a closed emitter never sees all `ell` open including
/// itself, and an open emitter always counts itself.
#[derive(Debug, Clone, PartialEq)]
pub struct VndParams<T> {
    lambdas: Vec<T>,
    etas: Vec<T>,
}

impl<T: Scalar> VndParams<T> {
    pub fn new(lambdas: Vec<T>, etas: Vec<T>) -> Result<Self, MarkovError> {
        if lambdas.is_empty() || lambdas.len() != etas.len() {
            return Err(MarkovError::ParamLength {
                lambdas: lambdas.len(),
                etas: etas.len(),
            });
        }
        for &v in &lambdas {
            check_probability("lambda", v)?;
        }
        for &v in &etas {
            check_probability("eta", v)?;
        }
        Ok(Self { lambdas, etas })
    }

    /// All-equal parameters: the uncoupled chain as a special case.
    pub fn constant(ell: usize, lambda: T, eta: T) -> Result<Self, MarkovError> {
        if ell == 0 {
            return Err(MarkovError::ZeroEmitters);
        }
        Self::new(vec![lambda; ell], vec![eta; ell])
    }

    pub fn ell(&self) -> usize {
        self.lambdas.len()
    }

    /// `lambda_j` for `j` in `0..ell`.
    pub fn lambda(&self, j: usize) -> T {
        self.lambdas[j]
    }

    /// `eta_m` for `m` in `1..=ell`.
    pub fn eta(&self, m: usize) -> T {
        self.etas[m - 1]
    }

    /// Stay-closed probability in a row with `r` open emitters, with the
    /// boundary convention `lambda_ell := 1` (a row with all emitters open
    /// has no closed emitter).
    pub fn lambda_at(&self, r: usize) -> T {
        if r == self.ell() {
            T::one()
        } else {
            self.lambdas[r]
        }
    }

    /// Stay-open probability in a row with `r` open emitters, with the
    /// boundary convention `eta_0 := 1`.
    pub fn eta_at(&self, r: usize) -> T {
        if r == 0 {
            T::one()
        } else {
            self.etas[r - 1]
        }
    }

    pub fn lambdas(&self) -> &[T] {
        &self.lambdas
    }

    pub fn etas(&self) -> &[T] {
        &self.etas
    }
}

pub(crate) fn check_probability<T: Scalar>(name: &'static str, v: T) -> Result<(), MarkovError> {
    if v < T::zero() || v > T::one() || !v.is_finite() {
        Err(MarkovError::ProbabilityOutOfRange {
            name,
            value: v.as_f64(),
        })
    } else {
        Ok(())
    }
}

/// Row-stochastic transition matrix of the vector chain, `2^ell x 2^ell`,
/// rows and columns in canonical state-index order.
#[derive(Debug, Clone, PartialEq)]
pub struct FullTransitionMatrix<T> {
    ell: usize,
    entries: Vec<T>,
}

/// Row-stochastic transition matrix of the sum chain, `(ell+1) x (ell+1)`,
/// rows and columns indexed by the number of open emitters.
#[derive(Debug, Clone, PartialEq)]
pub struct SumTransitionMatrix<T> {
    ell: usize,
    entries: Vec<T>,
}

/// Validation tolerance for externally supplied matrices. The builders in
/// this crate produce rows summing to 1 within 1e-12; hand-entered input is
/// held to this looser bound.
pub const INPUT_ROW_SUM_TOL: f64 = 1e-9;

macro_rules! impl_matrix {
    ($name:ident, $side:expr) => {
        impl<T: Scalar> $name<T> {
            /// Validates shape, entry range, and row stochasticity
            /// (within [`INPUT_ROW_SUM_TOL`]).
            pub fn new(ell: usize, entries: Vec<T>) -> Result<Self, MarkovError> {
                if ell == 0 {
                    return Err(MarkovError::ZeroEmitters);
                }
                let side = $side(ell);
                if entries.len() != side * side {
                    return Err(MarkovError::MatrixShape {
                        expected: side * side,
                        side,
                        len: entries.len(),
                    });
                }
                let slack = T::of(1e-12);
                for (pos, &v) in entries.iter().enumerate() {
                    if !(v >= -slack && v <= T::one() + slack) {
                        return Err(MarkovError::EntryOutOfRange {
                            row: pos / side,
                            col: pos % side,
                            value: v.as_f64(),
                        });
                    }
                }
                let tol = T::of(INPUT_ROW_SUM_TOL);
                for row in 0..side {
                    let sum: T = entries[row * side..(row + 1) * side].iter().copied().sum();
                    if (sum - T::one()).abs() > tol {
                        return Err(MarkovError::RowNotStochastic {
                            row,
                            sum: sum.as_f64(),
                            tol: INPUT_ROW_SUM_TOL,
                        });
                    }
                }
                Ok(Self { ell, entries })
            }

            pub(crate) fn from_vec_unchecked(ell: usize, entries: Vec<T>) -> Self {
                debug_assert_eq!(entries.len(), $side(ell) * $side(ell));
                Self { ell, entries }
            }

            pub fn ell(&self) -> usize {
                self.ell
            }

            /// Number of states (matrix side length).
            pub fn n_states(&self) -> usize {
                $side(self.ell)
            }

            pub fn get(&self, row: usize, col: usize) -> T {
                self.entries[row * self.n_states() + col]
            }

            pub fn row(&self, row: usize) -> &[T] {
                let n = self.n_states();
                &self.entries[row * n..(row + 1) * n]
            }

            pub fn entries(&self) -> &[T] {
                &self.entries
            }

            /// Largest deviation of any row sum from 1.
            pub fn max_row_sum_error(&self) -> T {
                let n = self.n_states();
                (0..n)
                    .map(|r| {
                        let s: T = self.row(r).iter().copied().sum();
                        (s - T::one()).abs()
                    })
                    .fold(T::zero(), T::max)
            }
        }
    };
}

impl_matrix!(FullTransitionMatrix, |ell: usize| 1usize << ell);
impl_matrix!(SumTransitionMatrix, |ell: usize| ell + 1);

impl<T: Scalar> FullTransitionMatrix<T> {
    /// Transition-pattern counts between state indices `x` and `y`:
    /// `(stay_closed, open, stay_open, close)`.
    pub(crate) fn pattern_counts(ell: usize, x: usize, y: usize) -> (usize, usize, usize, usize) {
        let mask = (1usize << ell) - 1;
        let stay_closed = (!x & !y & mask).count_ones() as usize;
        let open = (!x & y & mask).count_ones() as usize;
        let stay_open = (x & y).count_ones() as usize;
        let close = (x & !y & mask).count_ones() as usize;
        (stay_closed, open, stay_open, close)
    }
}

/// Structure classes used for free-parameter counts.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructureClass {
    General,
    Lumpable,
    PermutationInvariant,
    Vnd,
}

/// Number of free parameters of a `2^ell x 2^ell` transition matrix under
/// the given structural assumption.
pub fn count_free_params(ell: usize, class: StructureClass) -> u64 {
    assert!(ell >= 1, "ell must be positive");
    let ell_u = ell as u64;
    let d = 1u64 << ell;
    match class {
        StructureClass::General => d * (d - 1),
        StructureClass::Lumpable => d * (d - 1) - ell_u * (d - 1 - ell_u),
        StructureClass::PermutationInvariant => ell_u * (ell_u + 1) * (ell_u + 5) / 6,
        StructureClass::Vnd => 2 * ell_u,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn state_vector_round_trip() {
        let s = StateVector::from_bits(&[1, 0, 1]).unwrap();
        assert_eq!(s.index(), 0b101);
        assert_eq!(s.one_norm(), 2);
        assert!(s.bit(0) && !s.bit(1) && s.bit(2));
        assert_eq!(s.bits(), vec![1, 0, 1]);
        let t = StateVector::from_index(3, 5).unwrap();
        assert_eq!(s, t);
    }

    #[test]
    fn params_validate_domain() {
        assert!(VndParams::new(vec![0.5, 1.1], vec![0.5, 0.5]).is_err());
        assert!(VndParams::new(vec![0.5], vec![0.5, 0.5]).is_err());
        assert!(VndParams::<f64>::new(vec![], vec![]).is_err());
        let p = VndParams::new(vec![0.9, 0.8], vec![0.98, 0.89]).unwrap();
        assert_eq!(p.ell(), 2);
        assert_eq!(p.lambda(1), 0.8);
        assert_eq!(p.eta(2), 0.89);
        assert_eq!(p.lambda_at(2), 1.0);
        assert_eq!(p.eta_at(0), 1.0);
    }

    #[test]
    fn matrix_new_rejects_bad_rows() {
        // 2x2 sum matrix with a row summing to 0.9
        let err = SumTransitionMatrix::new(1, vec![0.5, 0.4, 0.3, 0.7]).unwrap_err();
        assert!(matches!(err, MarkovError::RowNotStochastic { row: 0, .. }));
        let err = SumTransitionMatrix::new(1, vec![1.2, -0.2, 0.3, 0.7]).unwrap_err();
        assert!(matches!(err, MarkovError::EntryOutOfRange { .. }));
        assert!(SumTransitionMatrix::new(1, vec![0.5, 0.5, 0.3, 0.7]).is_ok());
    }

    #[test]
    fn free_param_counts_match_worked_examples() {
        // ell = 2: 12 general entries reduce to 10 under lumping and 7 under
        // permutation invariance.
        assert_eq!(count_free_params(2, StructureClass::General), 12);
        assert_eq!(count_free_params(2, StructureClass::Lumpable), 10);
        assert_eq!(count_free_params(2, StructureClass::PermutationInvariant), 7);
        assert_eq!(count_free_params(2, StructureClass::Vnd), 4);
    }

    #[test]
    fn pattern_counts_cover_all_coordinates() {
        // x = (1,0,1), y = (0,0,1): one stays open, one closes, one stays closed
        let (s0, op, s1, cl) = FullTransitionMatrix::<f64>::pattern_counts(3, 0b101, 0b100);
        assert_eq!((s0, op, s1, cl), (1, 0, 1, 1));
        assert_eq!(s0 + op + s1 + cl, 3);
    }
}
