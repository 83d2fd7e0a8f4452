//! Recovery of per-emitter stay probabilities from a sum-chain matrix.
//!
//! The corner entries determine the extreme parameters directly:
//! `q_{0,0} = lambda_0^ell` and `q_{ell,ell} = eta_ell^ell`. Every interior
//! row `s` depends only on its own pair `(lambda_s, eta_s)`, which is fitted
//! by constrained least squares on that row. For even `ell` the middle row
//! `s = ell/2` admits exactly two exchangeable solutions, `(lambda, eta)`
//! and `(1-eta, 1-lambda)`; callers either assert the branch with
//! `lambda >= 1-eta` or receive both candidates.

use thiserror::Error;

use super::{q_vnd_row, q_vnd_row_with_grad};
use crate::markov_core::{SumTransitionMatrix, VndParams};
use crate::optim::{interior_grid, maximize_unit_box, OptimOptions, OptimResult};
use crate::scalar::Scalar;

#[derive(Debug, Clone)]
pub struct RecoverOptions<T> {
    /// Resolve the even-`ell` middle row by requiring `lambda >= 1 - eta`.
    pub even_constraint: bool,
    /// Largest acceptable per-row sum of squared entry mismatches before the
    /// input is rejected as inconsistent with the model.
    pub residual_tol: T,
    /// Curvature threshold below which a row's parameters are flagged as
    /// unidentified.
    pub curvature_tol: T,
}

impl<T: Scalar> RecoverOptions<T> {
    pub fn new(even_constraint: bool) -> Self {
        RecoverOptions {
            even_constraint,
            residual_tol: T::of(1e-6),
            curvature_tol: T::of(1e-10),
        }
    }
}

impl<T: Scalar> Default for RecoverOptions<T> {
    fn default() -> Self {
        Self::new(false)
    }
}

/// Recovered parameters with per-row fit diagnostics.
#[derive(Debug, Clone)]
pub struct RecoveredVnd<T> {
    pub params: VndParams<T>,
    /// Sum of squared mismatches between the rebuilt and given rows.
    pub row_residuals: Vec<T>,
    /// Interior rows whose least-squares curvature is singular; their
    /// parameter pair is reported but not determined by the data.
    pub unidentified_rows: Vec<usize>,
}

impl<T: Scalar> RecoveredVnd<T> {
    pub fn max_row_residual(&self) -> T {
        self.row_residuals
            .iter()
            .copied()
            .fold(T::zero(), T::max)
    }
}

#[derive(Debug, Error, Clone)]
pub enum RecoverError<T: Scalar> {
    #[error("matrix is not consistent with a norm-dependent chain: row residual {residual} exceeds {tol}")]
    NonVndInput { residual: T, tol: T },
    #[error(
        "even emitter count admits two parameter branches on the middle row; \
         pass the half constraint to select the branch with lambda >= 1 - eta"
    )]
    AmbiguousEvenCase {
        /// Branch satisfying `lambda >= 1 - eta` on the middle row.
        constrained: Box<RecoveredVnd<T>>,
        /// The exchanged branch `(1-eta, 1-lambda)`.
        alternate: Box<RecoveredVnd<T>>,
    },
}

/// Recover the stay probabilities from a sum-chain matrix.
///
/// See [`recover_vnd_params_with`] for diagnostics and options.
pub fn recover_vnd_params<T: Scalar>(
    q: &SumTransitionMatrix<T>,
    even_ell_constraint: bool,
) -> Result<VndParams<T>, RecoverError<T>> {
    recover_vnd_params_with(q, &RecoverOptions::new(even_ell_constraint)).map(|r| r.params)
}

pub fn recover_vnd_params_with<T: Scalar>(
    q: &SumTransitionMatrix<T>,
    opts: &RecoverOptions<T>,
) -> Result<RecoveredVnd<T>, RecoverError<T>> {
    let ell = q.ell();
    let root = T::one() / T::from_usize(ell).unwrap();
    let lambda_0 = q.get(0, 0).max(T::zero()).powf(root);
    let eta_ell = q.get(ell, ell).max(T::zero()).powf(root);

    let mut lambdas = vec![T::zero(); ell];
    let mut etas = vec![T::zero(); ell];
    lambdas[0] = lambda_0;
    etas[ell - 1] = eta_ell;

    let mut unidentified_rows = Vec::new();
    let mut middle_alt: Option<(T, T)> = None;

    for s in 1..ell {
        let sol = solve_row(ell, s, q.row(s));
        let (mut lam, mut eta) = (sol.lam, sol.eta);
        if sol.min_curvature < opts.curvature_tol {
            unidentified_rows.push(s);
        }
        if ell % 2 == 0 && s == ell / 2 {
            let swapped = (T::one() - eta, T::one() - lam);
            let distinct = (lam - swapped.0).abs() > T::of(1e-9);
            if distinct {
                if opts.even_constraint {
                    // keep the branch with lambda >= 1 - eta
                    if lam < T::one() - eta {
                        lam = swapped.0;
                        eta = swapped.1;
                    }
                } else {
                    middle_alt = Some(swapped);
                }
            }
        }
        lambdas[s] = lam;
        etas[s - 1] = eta;
    }

    let assemble = |lambdas: Vec<T>, etas: Vec<T>, unidentified: Vec<usize>| {
        let params = VndParams::new(lambdas, etas).expect("recovered parameters are clamped to [0,1]");
        let row_residuals = (0..=ell)
            .map(|i| {
                let row = q_vnd_row(ell, i, params.lambda_at(i), params.eta_at(i));
                row.iter()
                    .zip(q.row(i))
                    .map(|(&a, &b)| (a - b) * (a - b))
                    .sum()
            })
            .collect();
        RecoveredVnd {
            params,
            row_residuals,
            unidentified_rows: unidentified,
        }
    };

    let primary = assemble(lambdas, etas, unidentified_rows.clone());
    let worst = primary.max_row_residual();
    if worst > opts.residual_tol {
        return Err(RecoverError::NonVndInput {
            residual: worst,
            tol: opts.residual_tol,
        });
    }

    if let Some((alt_lam, alt_eta)) = middle_alt {
        let s = ell / 2;
        let mut lambdas = primary.params.lambdas().to_vec();
        let mut etas = primary.params.etas().to_vec();
        lambdas[s] = alt_lam;
        etas[s - 1] = alt_eta;
        let alternate = assemble(lambdas, etas, unidentified_rows);
        if alternate.max_row_residual() <= opts.residual_tol {
            // Both branches reproduce the matrix; order them by the constraint.
            let primary_constrained =
                primary.params.lambda(s) >= T::one() - primary.params.eta(s);
            let (constrained, alternate) = if primary_constrained {
                (primary, alternate)
            } else {
                (alternate, primary)
            };
            return Err(RecoverError::AmbiguousEvenCase {
                constrained: Box::new(constrained),
                alternate: Box::new(alternate),
            });
        }
    }

    Ok(primary)
}

struct RowSolution<T> {
    lam: T,
    eta: T,
    min_curvature: T,
}

/// Least-squares fit of one interior row over `(lambda_s, eta_s)`:
/// multi-start quasi-Newton on a 5x5 interior grid, then Gauss-Newton
/// polish. Ties in the residual break toward the smaller lambda.
fn solve_row<T: Scalar>(ell: usize, s: usize, target: &[T]) -> RowSolution<T> {
    let objective = |x: &[T]| -> T { -row_ss(ell, s, x[0], x[1], target) };
    let gradient = |x: &[T]| -> Vec<T> {
        let (row, dl, de) = q_vnd_row_with_grad(ell, s, x[0], x[1]);
        let mut gl = T::zero();
        let mut ge = T::zero();
        for j in 0..row.len() {
            let r = row[j] - target[j];
            gl += r * dl[j];
            ge += r * de[j];
        }
        let two = T::of(2.0);
        vec![-two * gl, -two * ge]
    };

    let opts = OptimOptions::default();
    let tie = T::of(1e-18);
    let perfect = T::of(1e-22);
    let mut best: Option<(T, T, T)> = None; // (residual, lam, eta)
    for start in interior_grid::<T>(2, 5) {
        let OptimResult { x, .. } = maximize_unit_box(objective, Some(gradient), &start, &opts);
        let (lam, eta, res) = polish(ell, s, x[0], x[1], target);
        let better = match best {
            None => true,
            Some((bres, blam, _)) => {
                res < bres - tie || ((res - bres).abs() <= tie && lam < blam)
            }
        };
        if better {
            best = Some((res, lam, eta));
        }
        if let Some((bres, _, _)) = best {
            if bres < perfect {
                break;
            }
        }
    }
    let (_, lam, eta) = best.unwrap();
    let min_curvature = row_curvature(ell, s, lam, eta);
    RowSolution {
        lam,
        eta,
        min_curvature,
    }
}

fn row_ss<T: Scalar>(ell: usize, s: usize, lam: T, eta: T, target: &[T]) -> T {
    q_vnd_row(ell, s, lam, eta)
        .iter()
        .zip(target)
        .map(|(&a, &b)| (a - b) * (a - b))
        .sum()
}

/// A few clamped Gauss-Newton steps; quadratic convergence drives consistent
/// rows to machine-precision residuals.
fn polish<T: Scalar>(ell: usize, s: usize, mut lam: T, mut eta: T, target: &[T]) -> (T, T, T) {
    let mut res = row_ss(ell, s, lam, eta, target);
    for _ in 0..12 {
        let (row, dl, de) = q_vnd_row_with_grad(ell, s, lam, eta);
        let mut a11 = T::zero();
        let mut a12 = T::zero();
        let mut a22 = T::zero();
        let mut b1 = T::zero();
        let mut b2 = T::zero();
        for j in 0..row.len() {
            let r = row[j] - target[j];
            a11 += dl[j] * dl[j];
            a12 += dl[j] * de[j];
            a22 += de[j] * de[j];
            b1 += dl[j] * r;
            b2 += de[j] * r;
        }
        let ridge = T::of(1e-13) * (a11 + a22 + T::one());
        let det = (a11 + ridge) * (a22 + ridge) - a12 * a12;
        if det <= T::zero() || !det.is_finite() {
            break;
        }
        let step_l = ((a22 + ridge) * b1 - a12 * b2) / det;
        let step_e = ((a11 + ridge) * b2 - a12 * b1) / det;
        let new_lam = (lam - step_l).max(T::zero()).min(T::one());
        let new_eta = (eta - step_e).max(T::zero()).min(T::one());
        let new_res = row_ss(ell, s, new_lam, new_eta, target);
        if new_res < res {
            lam = new_lam;
            eta = new_eta;
            res = new_res;
        } else {
            break;
        }
    }
    (lam, eta, res)
}

fn row_curvature<T: Scalar>(ell: usize, s: usize, lam: T, eta: T) -> T {
    let (_, dl, de) = q_vnd_row_with_grad(ell, s, lam, eta);
    let mut a11 = T::zero();
    let mut a12 = T::zero();
    let mut a22 = T::zero();
    for j in 0..dl.len() {
        a11 += dl[j] * dl[j];
        a12 += dl[j] * de[j];
        a22 += de[j] * de[j];
    }
    // smaller eigenvalue of the 2x2 normal matrix
    let half = T::of(0.5);
    let mean = half * (a11 + a22);
    let delta = half * (a11 - a22);
    mean - (delta * delta + a12 * a12).sqrt()
}
