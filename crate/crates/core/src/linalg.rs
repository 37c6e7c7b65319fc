//! Small dense square-matrix kernels, row-major.

use alloc::vec;
use alloc::vec::Vec;

pub(crate) fn matmul(a: &[f64], b: &[f64], n: usize) -> Vec<f64> {
    let mut c = vec![0.0; n * n];
    for i in 0..n {
        for k in 0..n {
            let aik = a[i * n + k];
            if aik == 0.0 {
                continue;
            }
            for j in 0..n {
                c[i * n + j] += aik * b[k * n + j];
            }
        }
    }
    c
}

pub(crate) fn matvec(a: &[f64], x: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|i| (0..n).map(|j| a[i * n + j] * x[j]).sum())
        .collect()
}

pub(crate) fn vecmat(x: &[f64], a: &[f64], n: usize) -> Vec<f64> {
    (0..n)
        .map(|j| (0..n).map(|i| x[i] * a[i * n + j]).sum())
        .collect()
}

/// Solves `m y = rhs` by Gaussian elimination with partial pivoting.
/// Returns `None` for a numerically singular system.
pub(crate) fn solve(m: &[f64], rhs: &[f64], n: usize) -> Option<Vec<f64>> {
    let mut a = m.to_vec();
    let mut b = rhs.to_vec();
    for col in 0..n {
        let pivot = (col..n).max_by(|&p, &q| {
            a[p * n + col]
                .abs()
                .partial_cmp(&a[q * n + col].abs())
                .unwrap_or(core::cmp::Ordering::Equal)
        })?;
        if a[pivot * n + col] == 0.0 || !a[pivot * n + col].is_finite() {
            return None;
        }
        if pivot != col {
            for j in 0..n {
                a.swap(pivot * n + j, col * n + j);
            }
            b.swap(pivot, col);
        }
        let d = a[col * n + col];
        for r in col + 1..n {
            let f = a[r * n + col] / d;
            if f == 0.0 {
                continue;
            }
            for j in col..n {
                a[r * n + j] -= f * a[col * n + j];
            }
            b[r] -= f * b[col];
        }
    }
    let mut y = vec![0.0; n];
    for i in (0..n).rev() {
        let s: f64 = (i + 1..n).map(|j| a[i * n + j] * y[j]).sum();
        y[i] = (b[i] - s) / a[i * n + i];
    }
    Some(y)
}

/// `(I - a)` as a fresh buffer.
pub(crate) fn identity_minus(a: &[f64], n: usize) -> Vec<f64> {
    let mut m: Vec<f64> = a.iter().map(|v| -v).collect();
    for i in 0..n {
        m[i * n + i] += 1.0;
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn solves_small_system() {
        // [[2,1],[1,3]] y = [3,5] -> y = [0.8, 1.4]
        let y = solve(&[2.0, 1.0, 1.0, 3.0], &[3.0, 5.0], 2).unwrap();
        assert!((y[0] - 0.8).abs() < 1e-15 && (y[1] - 1.4).abs() < 1e-15);
        assert!(solve(&[1.0, 2.0, 2.0, 4.0], &[1.0, 1.0], 2).is_none());
    }

    #[test]
    fn pivots_on_zero_diagonal() {
        let y = solve(&[0.0, 1.0, 1.0, 0.0], &[2.0, 3.0], 2).unwrap();
        assert_eq!(y, vec![3.0, 2.0]);
    }
}
