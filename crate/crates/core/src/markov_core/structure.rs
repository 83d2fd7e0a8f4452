//! Aggregation to the sum chain and structural property checks.

use super::{FullTransitionMatrix, MarkovError, SumTransitionMatrix, VndParams};
use crate::scalar::Scalar;

/// State indices grouped by number of open emitters.
fn level_sets(ell: usize) -> Vec<Vec<usize>> {
    let mut sets = vec![Vec::new(); ell + 1];
    for x in 0..1usize << ell {
        sets[x.count_ones() as usize].push(x);
    }
    sets
}

/// Aggregate the vector chain by level: entry `(i, j)` of the result is the
/// probability of moving from `i` open emitters to `j`.
///
/// For a chain with the lumping property all states on a level give the same
/// aggregated row; this function averages over the level so it is total, and
/// coincides with the defining row sums on exactly lumpable input. Use
/// [`lump_with_disagreement`] or [`is_lumpable`] to quantify how far an input
/// is from lumpable.
pub fn lump<T: Scalar>(m: &FullTransitionMatrix<T>) -> SumTransitionMatrix<T> {
    lump_with_disagreement(m).0
}

/// [`lump`] together with the largest within-level disagreement of the
/// aggregated row sums (0 for exactly lumpable input).
pub fn lump_with_disagreement<T: Scalar>(
    m: &FullTransitionMatrix<T>,
) -> (SumTransitionMatrix<T>, T) {
    let ell = m.ell();
    let sets = level_sets(ell);
    let n = ell + 1;
    let mut entries = vec![T::zero(); n * n];
    let mut disagreement = T::zero();
    let mut sums = vec![T::zero(); n];
    for (i, set) in sets.iter().enumerate() {
        let mut lo = vec![T::infinity(); n];
        let mut hi = vec![T::neg_infinity(); n];
        let mut acc = vec![T::zero(); n];
        for &x in set {
            sums.iter_mut().for_each(|s| *s = T::zero());
            for (y, &v) in m.row(x).iter().enumerate() {
                sums[y.count_ones() as usize] += v;
            }
            for j in 0..n {
                acc[j] += sums[j];
                lo[j] = lo[j].min(sums[j]);
                hi[j] = hi[j].max(sums[j]);
            }
        }
        let size = T::from_usize(set.len()).unwrap();
        for j in 0..n {
            entries[i * n + j] = acc[j] / size;
            disagreement = disagreement.max(hi[j] - lo[j]);
        }
    }
    (
        SumTransitionMatrix::from_vec_unchecked(ell, entries),
        disagreement,
    )
}

/// Outcome of the structural checks on a vector-chain transition matrix.
///
/// Each flag holds iff the corresponding violation is within the tolerance
/// passed to the check; a violation of exactly 0 means the structure holds
/// exactly.
#[derive(Debug, Clone, PartialEq)]
pub struct StructureReport<T> {
    pub lumpable: bool,
    pub permutation_invariant: bool,
    pub conditionally_independent: bool,
    pub lumpability_violation: T,
    pub permutation_violation: T,
    pub conditional_independence_violation: T,
}

impl<T: Scalar> StructureReport<T> {
    /// Run all three checks with one tolerance.
    pub fn analyze(m: &FullTransitionMatrix<T>, tol: T) -> Self {
        let (_, lumpability_violation) = lump_with_disagreement(m);
        let permutation_violation = permutation_violation(m);
        let conditional_independence_violation = conditional_independence_violation(m);
        StructureReport {
            lumpable: lumpability_violation <= tol,
            permutation_invariant: permutation_violation <= tol,
            conditionally_independent: conditional_independence_violation <= tol,
            lumpability_violation,
            permutation_violation,
            conditional_independence_violation,
        }
    }

    /// Largest violation across the three checks.
    pub fn max_violation(&self) -> T {
        self.lumpability_violation
            .max(self.permutation_violation)
            .max(self.conditional_independence_violation)
    }
}

/// Checks whether aggregated row sums agree within each level set.
pub fn is_lumpable<T: Scalar>(m: &FullTransitionMatrix<T>, tol: T) -> StructureReport<T> {
    StructureReport::analyze(m, tol)
}

/// Checks invariance under emitter relabeling.
///
/// Two transitions are images of each other under a relabeling exactly when
/// their source norms, target norms, and flip counts agree, so the check
/// compares entries within these signature classes and never enumerates
/// permutations.
pub fn is_permutation_invariant<T: Scalar>(
    m: &FullTransitionMatrix<T>,
    tol: T,
) -> StructureReport<T> {
    StructureReport::analyze(m, tol)
}

/// Checks whether every entry factors into its per-emitter marginals.
pub fn is_conditionally_independent<T: Scalar>(
    m: &FullTransitionMatrix<T>,
    tol: T,
) -> StructureReport<T> {
    StructureReport::analyze(m, tol)
}

fn signature_index(ell: usize, x: usize, y: usize) -> usize {
    let rx = x.count_ones() as usize;
    let ry = y.count_ones() as usize;
    let flips = (x ^ y).count_ones() as usize;
    (rx * (ell + 1) + ry) * (ell + 1) + flips
}

fn permutation_violation<T: Scalar>(m: &FullTransitionMatrix<T>) -> T {
    let ell = m.ell();
    let dim = m.n_states();
    let classes = (ell + 1) * (ell + 1) * (ell + 1);
    let mut lo = vec![T::infinity(); classes];
    let mut hi = vec![T::neg_infinity(); classes];
    for x in 0..dim {
        for (y, &v) in m.row(x).iter().enumerate() {
            let k = signature_index(ell, x, y);
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    (0..classes)
        .filter(|&k| hi[k] > T::neg_infinity())
        .map(|k| hi[k] - lo[k])
        .fold(T::zero(), T::max)
}

fn conditional_independence_violation<T: Scalar>(m: &FullTransitionMatrix<T>) -> T {
    let ell = m.ell();
    let dim = m.n_states();
    let mut worst = T::zero();
    let mut marginals = vec![T::zero(); ell];
    for x in 0..dim {
        let row = m.row(x);
        for (i, marginal) in marginals.iter_mut().enumerate() {
            let mut p = T::zero();
            for (y, &v) in row.iter().enumerate() {
                if (y >> i) & 1 == 1 {
                    p += v;
                }
            }
            *marginal = p;
        }
        for (y, &v) in row.iter().enumerate() {
            let mut prod = T::one();
            for (i, &p) in marginals.iter().enumerate() {
                prod = prod * if (y >> i) & 1 == 1 { p } else { T::one() - p };
            }
            worst = worst.max((v - prod).abs());
        }
    }
    worst
}

/// Number of distinct `(source norm, target norm, flip count)` signature
/// classes realized on `{0,1}^ell`.
pub fn signature_class_count(ell: usize) -> u64 {
    let l = ell as u64;
    (l + 1) * (l + 2) * (l + 3) / 6
}

/// Read the norm-dependent stay probabilities off a transition matrix.
///
/// Uses the representative state with the lowest-index emitters open on each
/// level: the stay-closed probability on level `r` is the mass the highest
/// emitter (closed there) keeps on staying closed; the stay-open probability
/// is the mass emitter 0 (open for `r >= 1`) keeps on staying open. For a
/// matrix built from norm-dependent parameters this inverts the construction
/// exactly; for other matrices it is a projection whose rebuild will differ
/// from the input.
pub fn extract_vnd_params<T: Scalar>(
    m: &FullTransitionMatrix<T>,
) -> Result<VndParams<T>, MarkovError> {
    let ell = m.ell();
    let dim = m.n_states();
    let mut lambdas = Vec::with_capacity(ell);
    let mut etas = Vec::with_capacity(ell);
    for r in 0..ell {
        // x = (1,...,1,0,...,0) with r ones; emitter ell-1 is closed.
        let x = (1usize << r) - 1;
        let mut stay_closed = T::zero();
        for (y, &v) in m.row(x).iter().enumerate() {
            if (y >> (ell - 1)) & 1 == 0 {
                stay_closed += v;
            }
        }
        lambdas.push(clamp_unit(stay_closed));
    }
    for r in 1..=ell {
        let x = (1usize << r) - 1;
        let mut stay_open = T::zero();
        for y in 0..dim {
            if y & 1 == 1 {
                stay_open += m.get(x, y);
            }
        }
        etas.push(clamp_unit(stay_open));
    }
    VndParams::new(lambdas, etas)
}

fn clamp_unit<T: Scalar>(v: T) -> T {
    v.max(T::zero()).min(T::one())
}

#[cfg(test)]
mod tests {
    use super::super::build::{build_m_ck, build_m_fc, build_m_uc, build_m_vnd};
    use super::*;
    use approx::assert_abs_diff_eq;

    const TOL: f64 = 1e-10;

    fn vnd2() -> VndParams<f64> {
        VndParams::new(vec![0.9, 0.8], vec![0.98, 0.89]).unwrap()
    }

    #[test]
    fn lump_identity_is_identity() {
        let p = VndParams::new(vec![1.0, 1.0], vec![1.0, 1.0]).unwrap();
        let m = build_m_vnd(&p).unwrap();
        let q = lump(&m);
        for i in 0..=2 {
            for j in 0..=2 {
                assert_eq!(q.get(i, j), if i == j { 1.0 } else { 0.0 });
            }
        }
    }

    #[test]
    fn lump_uncoupled_two_emitters() {
        let m = build_m_uc(2, 0.9, 0.8).unwrap();
        let q = lump(&m);
        assert_abs_diff_eq!(q.get(0, 0), 0.81, epsilon = 1e-15);
        assert_abs_diff_eq!(q.get(0, 1), 0.18, epsilon = 1e-15);
        assert_abs_diff_eq!(q.get(0, 2), 0.01, epsilon = 1e-15);
    }

    #[test]
    fn fc_lump_mass_only_on_extreme_levels() {
        for ell in 1..=4 {
            let m = build_m_fc(ell, 0.7, 0.4).unwrap();
            let q = lump(&m);
            for i in 0..=ell {
                for j in 1..ell {
                    assert_eq!(q.get(i, j), 0.0);
                }
            }
        }
    }

    #[test]
    fn vnd_matrices_pass_all_checks() {
        let m = build_m_vnd(&vnd2()).unwrap();
        let report = StructureReport::analyze(&m, TOL);
        assert!(report.lumpable);
        assert!(report.permutation_invariant);
        assert!(report.conditionally_independent);
        assert!(report.max_violation() <= 1e-13);
    }

    #[test]
    fn uncoupled_matrices_pass_all_checks() {
        let m = build_m_uc(3, 0.85, 0.6).unwrap();
        let report = StructureReport::analyze(&m, TOL);
        assert!(report.permutation_invariant);
        assert!(report.conditionally_independent);
    }

    #[test]
    fn fully_coupled_is_not_conditionally_independent() {
        // Mass concentrated on the two extreme columns cannot factor into
        // per-emitter marginals.
        let m = build_m_fc(2, 0.7, 0.7).unwrap();
        let report = StructureReport::analyze(&m, TOL);
        assert!(!report.conditionally_independent);
    }

    #[test]
    fn fully_coupled_aggregates_when_mixed_rows_agree() {
        // The mixed rows are keyed on emitter 1 and agree exactly when
        // p00 = 1 - p11; then the matrix is lumpable (the coupled chain
        // itself never visits mixed states, so they are free completion).
        let report = |p00: f64, p11: f64| StructureReport::analyze(&build_m_fc(3, p00, p11).unwrap(), TOL);
        assert!(report(0.7, 0.3).lumpable);
        assert!(!report(0.7, 0.7).lumpable);
    }

    #[test]
    fn lumping_violation_is_the_within_level_spread() {
        // Break q_{1,0} agreement between the two single-open states by 0.1.
        let mut m = build_m_uc(2, 0.9, 0.8).unwrap();
        let dim = m.n_states();
        let mut entries = m.entries().to_vec();
        entries[1 * dim] += 0.1; // (1,0) -> (0,0)
        entries[1 * dim + 3] -= 0.1; // keep the row stochastic
        m = FullTransitionMatrix::new(2, entries).unwrap();
        let report = is_lumpable(&m, TOL);
        assert!(!report.lumpable);
        assert_abs_diff_eq!(report.lumpability_violation, 0.1, epsilon = 1e-12);
    }

    #[test]
    fn lumpable_but_not_permutation_invariant() {
        // Shift mass between the two middle columns of one middle row: the
        // aggregated level sums are unchanged, the signature classes are not.
        let m = build_m_uc(2, 0.9, 0.8).unwrap();
        let dim = m.n_states();
        let mut entries = m.entries().to_vec();
        entries[1 * dim + 1] += 0.05; // (1,0) -> (1,0)
        entries[1 * dim + 2] -= 0.05; // (1,0) -> (0,1)
        let m = FullTransitionMatrix::new(2, entries).unwrap();
        let report = StructureReport::analyze(&m, TOL);
        assert!(report.lumpable);
        assert!(!report.permutation_invariant);
    }

    #[test]
    fn ck_lumpable_when_stay_probabilities_are_complementary()
    {
        // The coupled part keys its mixed rows on emitter 1, which aggregates
        // consistently only when lambda + eta = 1 (or kappa = 0).
        let report = |l: f64, e: f64, k: f64| {
            StructureReport::analyze(&build_m_ck(2, l, e, k).unwrap(), TOL)
        };
        assert!(report(0.9, 0.8, 0.0).lumpable);
        assert!(report(0.7, 0.3, 0.6).lumpable);
        let broken = report(0.9, 0.8, 0.5);
        assert!(!broken.lumpable);
        // Spread = kappa * |lambda - (1 - eta)| between the two mixed rows.
        assert_abs_diff_eq!(broken.lumpability_violation, 0.5 * 0.7, epsilon = 1e-12);
    }

    #[test]
    fn signature_class_count_matches_enumeration() {
        for ell in 1..=8 {
            let dim = 1usize << ell;
            let mut seen = std::collections::HashSet::new();
            for x in 0..dim {
                for y in 0..dim {
                    seen.insert(signature_index(ell, x, y));
                }
            }
            assert_eq!(seen.len() as u64, signature_class_count(ell));
        }
    }

    #[test]
    fn extract_inverts_build() {
        let p = VndParams::new(vec![0.3, 0.65, 0.9], vec![0.2, 0.55, 0.8]).unwrap();
        let m = build_m_vnd(&p).unwrap();
        let q = extract_vnd_params(&m).unwrap();
        for j in 0..3 {
            assert_abs_diff_eq!(q.lambda(j), p.lambda(j), epsilon = 1e-14);
            assert_abs_diff_eq!(q.eta(j + 1), p.eta(j + 1), epsilon = 1e-14);
        }
    }
}
