//! Thomas algorithm for tridiagonal systems.

use crate::scalar::Real;

/// Solves `sub[i] x[i-1] + diag[i] x[i] + sup[i] x[i+1] = rhs[i]` in place.
///
/// `sub[0]` and `sup[n-1]` are ignored. No pivoting: the systems assembled by
/// the solver are diagonally dominant.
pub fn solve_in_place<T: Real>(sub: &[T], diag: &[T], sup: &[T], rhs: &mut [T]) {
    let n = rhs.len();
    assert!(n >= 1 && sub.len() == n && diag.len() == n && sup.len() == n);
    let mut c = vec![T::zero(); n];
    let mut denom = diag[0];
    c[0] = sup[0] / denom;
    rhs[0] = rhs[0] / denom;
    for i in 1..n {
        denom = diag[i] - sub[i] * c[i - 1];
        c[i] = sup[i] / denom;
        rhs[i] = (rhs[i] - sub[i] * rhs[i - 1]) / denom;
    }
    for i in (0..n - 1).rev() {
        rhs[i] = rhs[i] - c[i] * rhs[i + 1];
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matches_dense_product() {
        let n = 7;
        let sub: Vec<f64> = (0..n).map(|i| -1.0 - 0.1 * i as f64).collect();
        let sup: Vec<f64> = (0..n).map(|i| -0.5 + 0.05 * i as f64).collect();
        let diag: Vec<f64> = (0..n).map(|i| 4.0 + i as f64).collect();
        let x: Vec<f64> = (0..n).map(|i| (i as f64).sin() + 2.0).collect();
        let mut rhs: Vec<f64> = (0..n)
            .map(|i| {
                let mut v = diag[i] * x[i];
                if i > 0 {
                    v += sub[i] * x[i - 1];
                }
                if i + 1 < n {
                    v += sup[i] * x[i + 1];
                }
                v
            })
            .collect();
        solve_in_place(&sub, &diag, &sup, &mut rhs);
        for (a, b) in rhs.iter().zip(&x) {
            assert!((a - b).abs() < 1e-13);
        }
    }

    #[test]
    fn single_equation() {
        let mut rhs = [6.0];
        solve_in_place(&[0.0], &[3.0], &[0.0], &mut rhs);
        assert_eq!(rhs, [2.0]);
    }
}
