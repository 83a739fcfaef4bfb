//! BFGS with a backtracking line search, for smooth objectives with an
//! analytic gradient.

use crate::error::Result;
use crate::scalar::Scalar;

pub(crate) struct BfgsOutcome<T> {
    pub x: Vec<T>,
    pub f: T,
    pub grad: Vec<T>,
    pub iterations: usize,
    pub converged: bool,
}

pub(crate) fn inf_norm<T: Scalar>(v: &[T]) -> T {
    v.iter().fold(T::zero(), |m, x| m.max(x.abs()))
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).fold(T::zero(), |acc, (&x, &y)| acc + x * y)
}

/// Minimizes `objective` (returning value and gradient) from `x0`.
///
/// Converged means the gradient infinity norm fell below `grad_tol`. Near the
/// optimum, decreases can drop under the rounding noise of `f`; a step is then
/// also accepted when `f` does not rise beyond that noise and the gradient
/// norm shrinks.
pub(crate) fn minimize<T, F>(objective: F, x0: Vec<T>, grad_tol: T, max_iter: usize) -> Result<BfgsOutcome<T>>
where
    T: Scalar,
    F: Fn(&[T]) -> Result<(T, Vec<T>)>,
{
    let n = x0.len();
    let c1 = T::lit(1e-4);
    let max_step = T::lit(10.0);
    let noise = T::epsilon() * T::lit(16.0);

    let mut x = x0;
    let (mut f, mut g) = objective(&x)?;
    let mut h_inv = identity::<T>(n);
    let mut fresh = true;
    let mut iterations = 0;

    while iterations < max_iter {
        if inf_norm(&g) < grad_tol {
            return Ok(BfgsOutcome { x, f, grad: g, iterations, converged: true });
        }
        iterations += 1;

        let mut dir = mat_vec(&h_inv, &g, n);
        dir.iter_mut().for_each(|v| *v = -*v);
        let mut slope = dot(&g, &dir);
        if !(slope < T::zero()) {
            h_inv = identity(n);
            fresh = true;
            dir = g.iter().map(|&v| -v).collect();
            slope = dot(&g, &dir);
        }
        let longest = inf_norm(&dir);
        let mut alpha = if longest > max_step { max_step / longest } else { T::one() };

        let mut accepted = None;
        for _ in 0..60 {
            let trial: Vec<T> = x.iter().zip(&dir).map(|(&a, &d)| a + alpha * d).collect();
            let (ft, gt) = objective(&trial)?;
            if ft.is_finite() {
                let armijo = ft <= f + c1 * alpha * slope;
                let flat = ft - f <= noise * f.abs().max(T::one()) && inf_norm(&gt) < inf_norm(&g);
                if armijo || flat {
                    accepted = Some((trial, ft, gt));
                    break;
                }
            }
            alpha = alpha * T::lit(0.5);
        }

        let Some((x_new, f_new, g_new)) = accepted else {
            if fresh {
                break;
            }
            // retry along steepest descent before giving up
            h_inv = identity(n);
            fresh = true;
            continue;
        };

        let s: Vec<T> = x_new.iter().zip(&x).map(|(&a, &b)| a - b).collect();
        let y: Vec<T> = g_new.iter().zip(&g).map(|(&a, &b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > T::lit(1e-12) * dot(&s, &s).sqrt() * dot(&y, &y).sqrt() {
            if fresh {
                let scale = sy / dot(&y, &y);
                h_inv = identity(n);
                h_inv.iter_mut().for_each(|v| *v = *v * scale);
                fresh = false;
            }
            bfgs_update(&mut h_inv, &s, &y, sy, n);
        }
        x = x_new;
        f = f_new;
        g = g_new;
    }
    let converged = inf_norm(&g) < grad_tol;
    Ok(BfgsOutcome { x, f, grad: g, iterations, converged })
}

fn identity<T: Scalar>(n: usize) -> Vec<T> {
    let mut m = vec![T::zero(); n * n];
    for i in 0..n {
        m[i * n + i] = T::one();
    }
    m
}

fn mat_vec<T: Scalar>(m: &[T], v: &[T], n: usize) -> Vec<T> {
    (0..n).map(|i| dot(&m[i * n..(i + 1) * n], v)).collect()
}

/// `H <- (I - rho s y') H (I - rho y s') + rho s s'`
fn bfgs_update<T: Scalar>(h: &mut [T], s: &[T], y: &[T], sy: T, n: usize) {
    let rho = T::one() / sy;
    let hy = mat_vec(h, y, n);
    let yhy = dot(y, &hy);
    let coef = rho * (T::one() + rho * yhy);
    for i in 0..n {
        for j in 0..n {
            h[i * n + j] = h[i * n + j] + coef * s[i] * s[j] - rho * (s[i] * hy[j] + hy[i] * s[j]);
        }
    }
}
