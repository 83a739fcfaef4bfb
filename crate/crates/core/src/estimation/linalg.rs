use crate::scalar::Scalar;

/// Inverse of a symmetric positive-definite row-major `n x n` matrix by
/// Cholesky factorization. `None` when a pivot is not clearly positive.
pub(crate) fn spd_inverse<T: Scalar>(a: &[T], n: usize) -> Option<Vec<T>> {
    assert_eq!(a.len(), n * n);
    let max_diag = (0..n).map(|i| a[i * n + i].abs()).fold(T::zero(), T::max);
    let floor = max_diag * T::epsilon() * T::lit(n as f64 * 16.0);

    // lower factor L with A = L L'
    let mut l = vec![T::zero(); n * n];
    for j in 0..n {
        let mut d = a[j * n + j];
        for k in 0..j {
            d = d - l[j * n + k] * l[j * n + k];
        }
        if !(d > floor) {
            return None;
        }
        let d = d.sqrt();
        l[j * n + j] = d;
        for i in j + 1..n {
            let mut v = a[i * n + j];
            for k in 0..j {
                v = v - l[i * n + k] * l[j * n + k];
            }
            l[i * n + j] = v / d;
        }
    }

    // columns of L^{-1} by forward substitution, then A^{-1} = L^{-T} L^{-1}
    let mut linv = vec![T::zero(); n * n];
    for c in 0..n {
        for i in c..n {
            let mut v = if i == c { T::one() } else { T::zero() };
            for k in c..i {
                v = v - l[i * n + k] * linv[k * n + c];
            }
            linv[i * n + c] = v / l[i * n + i];
        }
    }
    let mut inv = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut v = T::zero();
            for k in i..n {
                v = v + linv[k * n + i] * linv[k * n + j];
            }
            inv[i * n + j] = v;
            inv[j * n + i] = v;
        }
    }
    if inv.iter().all(|v| v.is_finite()) {
        Some(inv)
    } else {
        None
    }
}
