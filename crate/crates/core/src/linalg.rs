//! Small dense square-matrix routines: inverse, exponential, logarithm,
//! integer powers, Cholesky factorisation and symmetric eigendecomposition.
//!
//! Matrices here are at most a few dozen rows (one row per disease stage),
//! so straightforward O(n^3) algorithms are used throughout.

use ndarray::{Array1, Array2};

use crate::scalar::Scalar;

pub fn identity<T: Scalar>(n: usize) -> Array2<T> {
    Array2::eye(n)
}

/// Maximum absolute column sum.
pub fn norm1<T: Scalar>(m: &Array2<T>) -> T {
    m.columns()
        .into_iter()
        .map(|c| c.iter().map(|v| v.abs()).sum::<T>())
        .fold(T::zero(), T::max)
}

pub fn max_abs_diff<T: Scalar>(a: &Array2<T>, b: &Array2<T>) -> T {
    a.iter()
        .zip(b.iter())
        .map(|(x, y)| (*x - *y).abs())
        .fold(T::zero(), T::max)
}

/// `m^k` by binary exponentiation; `m^0 = I`.
pub fn matrix_power<T: Scalar>(m: &Array2<T>, mut k: u64) -> Array2<T> {
    let mut result = identity::<T>(m.nrows());
    let mut base = m.clone();
    let mut first = true;
    while k > 0 {
        if k & 1 == 1 {
            result = if first { base.clone() } else { result.dot(&base) };
            first = false;
        }
        k >>= 1;
        if k > 0 {
            base = base.dot(&base);
        }
    }
    result
}

/// Gauss-Jordan inverse with partial pivoting. Returns `None` for a
/// numerically singular matrix.
pub fn inverse<T: Scalar>(m: &Array2<T>) -> Option<Array2<T>> {
    let n = m.nrows();
    let mut a = m.clone();
    let mut inv = identity::<T>(n);
    let scale = norm1(m).max(T::min_positive_value());
    let tiny = scale * T::epsilon() * T::from_usize_lossy(n.max(1));
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&i, &j| {
                a[[i, col]]
                    .abs()
                    .partial_cmp(&a[[j, col]].abs())
                    .unwrap_or(std::cmp::Ordering::Equal)
            })
            .unwrap_or(col);
        if !(a[[pivot, col]].abs() > tiny) {
            return None;
        }
        if pivot != col {
            for c in 0..n {
                a.swap([pivot, c], [col, c]);
                inv.swap([pivot, c], [col, c]);
            }
        }
        let p = a[[col, col]];
        for c in 0..n {
            a[[col, c]] /= p;
            inv[[col, c]] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let f = a[[r, col]];
            if f == T::zero() {
                continue;
            }
            for c in 0..n {
                let av = a[[col, c]];
                let iv = inv[[col, c]];
                a[[r, c]] -= f * av;
                inv[[r, c]] -= f * iv;
            }
        }
    }
    Some(inv)
}

/// Matrix exponential by scaling and squaring of a truncated Taylor series.
pub fn expm<T: Scalar>(m: &Array2<T>) -> Array2<T> {
    let n = m.nrows();
    let norm = norm1(m);
    let half = T::lit(0.5);
    let mut squarings = 0u32;
    let mut scaled = m.clone();
    if norm > half {
        squarings = (norm / half).log2().ceil().to_u32().unwrap_or(0);
        let div = T::lit(2.0).powi(squarings as i32);
        scaled.mapv_inplace(|v| v / div);
    }
    let mut sum = identity::<T>(n);
    let mut term = identity::<T>(n);
    for k in 1..=40 {
        term = term.dot(&scaled) / T::from_usize_lossy(k);
        sum = sum + &term;
        if norm1(&term) <= T::epsilon() * norm1(&sum) {
            break;
        }
    }
    for _ in 0..squarings {
        sum = sum.dot(&sum);
    }
    sum
}

/// Principal square root via the Denman-Beavers iteration. `None` when the
/// iteration hits a singular iterate or fails to converge, which happens
/// for singular matrices and for matrices with eigenvalues on the closed
/// negative real axis.
pub fn sqrtm<T: Scalar>(m: &Array2<T>) -> Option<Array2<T>> {
    let n = m.nrows();
    let mut y = m.clone();
    let mut z = identity::<T>(n);
    let half = T::lit(0.5);
    let tol = T::epsilon() * T::lit(16.0);
    for _ in 0..100 {
        let y_inv = inverse(&y)?;
        let z_inv = inverse(&z)?;
        let y_next = (&y + &z_inv) * half;
        let z_next = (&z + &y_inv) * half;
        let delta = max_abs_diff(&y_next, &y);
        let size = y_next.iter().map(|v| v.abs()).fold(T::zero(), T::max);
        y = y_next;
        z = z_next;
        if !delta.is_finite() {
            return None;
        }
        if delta <= tol * size.max(T::one()) {
            return Some(y);
        }
    }
    None
}

/// Principal matrix logarithm by inverse scaling and squaring: repeated
/// square roots until the matrix is close to the identity, then the
/// Mercator series for `log(I + X)`.
pub fn logm<T: Scalar>(m: &Array2<T>) -> Option<Array2<T>> {
    let n = m.nrows();
    let eye = identity::<T>(n);
    let mut a = m.clone();
    let mut roots = 0i32;
    let quarter = T::lit(0.25);
    while norm1(&(&a - &eye)) > quarter {
        a = sqrtm(&a)?;
        roots += 1;
        if roots > 60 {
            return None;
        }
    }
    let x = &a - &eye;
    let mut sum = Array2::<T>::zeros((n, n));
    let mut power = eye;
    for k in 1..=80 {
        power = power.dot(&x);
        let term = &power / T::from_usize_lossy(k);
        if k % 2 == 1 {
            sum = sum + &term;
        } else {
            sum = sum - &term;
        }
        if norm1(&term) <= T::epsilon() * norm1(&sum).max(T::min_positive_value()) {
            break;
        }
    }
    let scale = T::lit(2.0).powi(roots);
    Some(sum * scale)
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite
/// matrix; `None` if not positive definite.
pub fn cholesky<T: Scalar>(m: &Array2<T>) -> Option<Array2<T>> {
    let n = m.nrows();
    let mut l = Array2::<T>::zeros((n, n));
    for i in 0..n {
        for j in 0..=i {
            let mut s = m[[i, j]];
            for k in 0..j {
                s -= l[[i, k]] * l[[j, k]];
            }
            if i == j {
                if !(s > T::zero()) {
                    return None;
                }
                l[[i, i]] = s.sqrt();
            } else {
                l[[i, j]] = s / l[[j, j]];
            }
        }
    }
    Some(l)
}

/// Solves `L y = b` for lower-triangular `L`.
pub fn forward_substitute<T: Scalar>(l: &Array2<T>, b: &Array1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut y = Array1::<T>::zeros(n);
    for i in 0..n {
        let mut s = b[i];
        for k in 0..i {
            s -= l[[i, k]] * y[k];
        }
        y[i] = s / l[[i, i]];
    }
    y
}

/// Solves `L^T x = y` for lower-triangular `L`.
pub fn backward_substitute_transposed<T: Scalar>(l: &Array2<T>, y: &Array1<T>) -> Array1<T> {
    let n = l.nrows();
    let mut x = Array1::<T>::zeros(n);
    for i in (0..n).rev() {
        let mut s = y[i];
        for k in i + 1..n {
            s -= l[[k, i]] * x[k];
        }
        x[i] = s / l[[i, i]];
    }
    x
}

/// Inverse of an SPD matrix from its Cholesky factor.
pub fn cholesky_inverse<T: Scalar>(l: &Array2<T>) -> Array2<T> {
    let n = l.nrows();
    let mut inv = Array2::<T>::zeros((n, n));
    for c in 0..n {
        let mut e = Array1::<T>::zeros(n);
        e[c] = T::one();
        let y = forward_substitute(l, &e);
        let x = backward_substitute_transposed(l, &y);
        inv.column_mut(c).assign(&x);
    }
    inv
}

/// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns.
pub fn symmetric_eigen<T: Scalar>(m: &Array2<T>) -> (Array1<T>, Array2<T>) {
    let n = m.nrows();
    let mut a = m.clone();
    let mut v = identity::<T>(n);
    let two = T::lit(2.0);
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|p| (0..n).filter(move |&q| q != p).map(move |q| (p, q)))
            .map(|(p, q)| a[[p, q]] * a[[p, q]])
            .sum();
        let scale: T = a.iter().map(|x| *x * *x).sum();
        if off <= T::epsilon() * T::epsilon() * scale {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[[p, q]] == T::zero() {
                    continue;
                }
                let theta = (a[[q, q]] - a[[p, p]]) / (two * a[[p, q]]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..n {
                    let (akp, akq) = (a[[k, p]], a[[k, q]]);
                    a[[k, p]] = c * akp - s * akq;
                    a[[k, q]] = s * akp + c * akq;
                }
                for k in 0..n {
                    let (apk, aqk) = (a[[p, k]], a[[q, k]]);
                    a[[p, k]] = c * apk - s * aqk;
                    a[[q, k]] = s * apk + c * aqk;
                }
                for k in 0..n {
                    let (vkp, vkq) = (v[[k, p]], v[[k, q]]);
                    v[[k, p]] = c * vkp - s * vkq;
                    v[[k, q]] = s * vkp + c * vkq;
                }
            }
        }
    }
    (a.diag().to_owned(), v)
}

/// Nearest symmetric matrix (in likelihood) whose eigenvalues are all at
/// least `floor`: the input's eigenvalues clipped from below.
pub fn clip_eigenvalues<T: Scalar>(m: &Array2<T>, floor: T) -> Array2<T> {
    let (values, vectors) = symmetric_eigen(m);
    let clipped = values.mapv(|x| x.max(floor));
    let scaled = &vectors * &clipped.insert_axis(ndarray::Axis(0));
    let out = scaled.dot(&vectors.t());
    (&out + &out.t()) * T::lit(0.5)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn jacobi_reconstructs_symmetric_matrix() {
        let m = array![[4.0, 1.0, -2.0], [1.0, 3.0, 0.5], [-2.0, 0.5, 1.0]];
        let (values, vectors) = symmetric_eigen(&m);
        let back = (&vectors * &values.clone().insert_axis(ndarray::Axis(0))).dot(&vectors.t());
        assert!(max_abs_diff(&back, &m) < 1e-12);
        assert!(max_abs_diff(&vectors.t().dot(&vectors), &identity(3)) < 1e-12);
        let clipped = clip_eigenvalues(&m, 0.5);
        let (after, _) = symmetric_eigen(&clipped);
        assert!(after.iter().all(|v| *v >= 0.5 - 1e-12));
        assert!(max_abs_diff(&clip_eigenvalues(&m, -100.0), &m) < 1e-12);
    }

    #[test]
    fn power_matches_repeated_product() {
        let m = array![[0.5, 0.5, 0.0], [0.0, 0.7, 0.3], [0.0, 0.0, 1.0]];
        let p3 = matrix_power(&m, 3);
        let direct = m.dot(&m).dot(&m);
        assert!(max_abs_diff(&p3, &direct) < 1e-15);
        assert_eq!(matrix_power(&m, 0), identity::<f64>(3));
    }

    #[test]
    fn inverse_round_trip() {
        let m = array![[4.0, 1.0, 0.5], [1.0, 3.0, 0.2], [0.5, 0.2, 2.0]];
        let inv = inverse(&m).unwrap();
        assert!(max_abs_diff(&m.dot(&inv), &identity(3)) < 1e-14);
        let singular = array![[1.0, 2.0], [2.0, 4.0]];
        assert!(inverse(&singular).is_none());
    }

    #[test]
    fn exp_of_diagonal() {
        let m = array![[1.0, 0.0], [0.0, -2.0]];
        let e = expm(&m);
        assert!((e[[0, 0]] - 1f64.exp()).abs() < 1e-13);
        assert!((e[[1, 1]] - (-2f64).exp()).abs() < 1e-15);
        assert!(e[[0, 1]].abs() < 1e-16);
    }

    #[test]
    fn log_inverts_exp() {
        let g = array![[-0.4, 0.3, 0.1], [0.0, -0.2, 0.2], [0.0, 0.0, 0.0]];
        let p = expm(&g);
        let back = logm(&p).unwrap();
        assert!(max_abs_diff(&back, &g) < 1e-12, "{back:?}");
    }

    #[test]
    fn log_fails_on_negative_eigenvalue() {
        let m = array![[0.0, 1.0], [1.0, 0.0]];
        assert!(logm(&m).is_none());
        let singular = array![[0.0, 1.0], [0.0, 1.0]];
        assert!(logm(&singular).is_none());
    }

    #[test]
    fn cholesky_solves() {
        let m = array![[4.0, 2.0], [2.0, 3.0]];
        let l = cholesky(&m).unwrap();
        assert!(max_abs_diff(&l.dot(&l.t()), &m) < 1e-14);
        let inv = cholesky_inverse(&l);
        assert!(max_abs_diff(&inv.dot(&m), &identity(2)) < 1e-14);
        assert!(cholesky(&array![[1.0, 2.0], [2.0, 1.0]]).is_none());
    }
}
