//! Small-dimension bounded maximization on the unit box.
//!
//! The estimation and recovery objectives are smooth functions of a handful
//! of probabilities. They are maximized by BFGS in logit coordinates, which
//! turns the box `[0,1]^d` into an unconstrained problem; multi-start at the
//! call sites handles multimodal geometry.

use crate::scalar::Scalar;

/// Saturation bound for logit coordinates. `sigmoid(36)` is within one ulp
/// of 1 in f64, so the bound does not restrict attainable probabilities.
const Z_MAX: f64 = 36.0;

#[derive(Debug, Clone)]
pub struct OptimOptions<T> {
    pub max_iters: usize,
    /// Convergence threshold on the logit-space gradient norm.
    pub grad_tol: T,
    /// Convergence threshold on the logit-space step norm.
    pub step_tol: T,
}

impl<T: Scalar> Default for OptimOptions<T> {
    fn default() -> Self {
        OptimOptions {
            max_iters: 300,
            grad_tol: T::of(1e-12),
            step_tol: T::of(1e-13),
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimResult<T> {
    pub x: Vec<T>,
    pub value: T,
    pub iterations: usize,
    pub converged: bool,
}

fn sigmoid<T: Scalar>(z: T) -> T {
    if z >= T::zero() {
        T::one() / (T::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (T::one() + e)
    }
}

fn logit<T: Scalar>(x: T) -> T {
    let zmax = T::of(Z_MAX);
    let eps = T::of(1e-15);
    let x = x.max(eps).min(T::one() - eps);
    (x / (T::one() - x)).ln().max(-zmax).min(zmax)
}

/// Maximize `f` over `[0,1]^d` starting from `start`.
///
/// `grad` is the gradient of `f` in the original coordinates; when absent a
/// central difference in logit space is used. The result never has a lower
/// value than the start point.
pub fn maximize_unit_box<T, F, G>(
    f: F,
    grad: Option<G>,
    start: &[T],
    opts: &OptimOptions<T>,
) -> OptimResult<T>
where
    T: Scalar,
    F: Fn(&[T]) -> T,
    G: Fn(&[T]) -> Vec<T>,
{
    let d = start.len();
    let zmax = T::of(Z_MAX);
    let clamp_z = |z: T| z.max(-zmax).min(zmax);
    let to_x = |z: &[T]| z.iter().map(|&zi| sigmoid(zi)).collect::<Vec<T>>();

    let eval = |z: &[T]| f(&to_x(z));
    let eval_grad = |z: &[T]| -> Vec<T> {
        match &grad {
            Some(g) => {
                let x = to_x(z);
                let gx = g(&x);
                // chain rule: dx/dz = x (1 - x)
                gx.iter()
                    .zip(&x)
                    .map(|(&gi, &xi)| gi * xi * (T::one() - xi))
                    .collect()
            }
            None => {
                let mut out = vec![T::zero(); d];
                let mut zp = z.to_vec();
                for i in 0..d {
                    let h = T::of(1e-6) * (T::one() + z[i].abs());
                    let orig = z[i];
                    zp[i] = clamp_z(orig + h);
                    let up = eval(&zp);
                    let hi = zp[i];
                    zp[i] = clamp_z(orig - h);
                    let dn = eval(&zp);
                    let width = hi - zp[i];
                    zp[i] = orig;
                    out[i] = if width > T::zero() {
                        (up - dn) / width
                    } else {
                        T::zero()
                    };
                }
                out
            }
        }
    };

    let mut z: Vec<T> = start.iter().map(|&x| logit(x)).collect();
    let start_value = f(start);
    let mut fz = eval(&z);
    if !fz.is_finite() {
        return OptimResult {
            x: start.to_vec(),
            value: start_value,
            iterations: 0,
            converged: false,
        };
    }
    let mut g = eval_grad(&z);

    // Inverse Hessian estimate for ascent; identity restart on bad curvature.
    let mut h_inv = identity::<T>(d);
    let mut iterations = 0;
    let mut converged = false;

    while iterations < opts.max_iters {
        iterations += 1;
        let gnorm = g.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        if gnorm < opts.grad_tol {
            converged = true;
            break;
        }
        let mut p = mat_vec(&h_inv, &g);
        let pg: T = dot(&p, &g);
        if !pg.is_finite() || pg <= T::zero() {
            h_inv = identity(d);
            p = g.clone();
        }
        // backtracking line search on the ascent direction
        let c1 = T::of(1e-4);
        let slope = dot(&p, &g);
        let mut alpha = T::one();
        let mut z_new = z.clone();
        let mut f_new;
        let mut ok = false;
        for _ in 0..60 {
            for i in 0..d {
                z_new[i] = clamp_z(z[i] + alpha * p[i]);
            }
            f_new = eval(&z_new);
            if f_new.is_finite() && f_new >= fz + c1 * alpha * slope {
                ok = true;
                break;
            }
            alpha = alpha * T::of(0.5);
        }
        if !ok {
            converged = true; // no ascent possible along the quasi-Newton direction
            break;
        }
        let f_next = eval(&z_new);
        let g_new = eval_grad(&z_new);
        let s: Vec<T> = z_new.iter().zip(&z).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = g.iter().zip(&g_new).map(|(&a, &b)| a - b).collect();
        // For ascent, y = g_old - g_new keeps the standard BFGS curvature
        // condition s.y > 0 on concave stretches.
        let sy = dot(&s, &y);
        if sy > T::of(1e-14) {
            bfgs_update(&mut h_inv, &s, &y, sy);
        } else {
            h_inv = identity(d);
        }
        let step = s.iter().fold(T::zero(), |m, &v| m.max(v.abs()));
        z = z_new.clone();
        fz = f_next;
        g = g_new;
        if step < opts.step_tol {
            converged = true;
            break;
        }
    }

    let x = to_x(&z);
    let value = f(&x);
    if value.is_finite() && value >= start_value {
        OptimResult {
            x,
            value,
            iterations,
            converged,
        }
    } else {
        OptimResult {
            x: start.to_vec(),
            value: start_value,
            iterations,
            converged: false,
        }
    }
}

fn identity<T: Scalar>(d: usize) -> Vec<T> {
    let mut m = vec![T::zero(); d * d];
    for i in 0..d {
        m[i * d + i] = T::one();
    }
    m
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

fn mat_vec<T: Scalar>(m: &[T], v: &[T]) -> Vec<T> {
    let d = v.len();
    (0..d)
        .map(|i| (0..d).map(|j| m[i * d + j] * v[j]).sum())
        .collect()
}

fn bfgs_update<T: Scalar>(h: &mut [T], s: &[T], y: &[T], sy: T) {
    let d = s.len();
    let hy = mat_vec(h, y);
    let yhy = dot(y, &hy);
    let c1 = (sy + yhy) / (sy * sy);
    for i in 0..d {
        for j in 0..d {
            let mut v = h[i * d + j];
            v += c1 * s[i] * s[j];
            v -= (hy[i] * s[j] + s[i] * hy[j]) / sy;
            h[i * d + j] = v;
        }
    }
}

/// Interior grid of multi-start points for `d`-dimensional problems:
/// the tensor product of `per_axis` equispaced interior values.
pub fn interior_grid<T: Scalar>(d: usize, per_axis: usize) -> Vec<Vec<T>> {
    let vals: Vec<T> = (0..per_axis)
        .map(|k| T::from_usize(2 * k + 1).unwrap() / T::from_usize(2 * per_axis).unwrap())
        .collect();
    let mut grid: Vec<Vec<T>> = vec![vec![]];
    for _ in 0..d {
        let mut next = Vec::with_capacity(grid.len() * per_axis);
        for point in &grid {
            for &v in &vals {
                let mut p = point.clone();
                p.push(v);
                next.push(p);
            }
        }
        grid = next;
    }
    grid
}
