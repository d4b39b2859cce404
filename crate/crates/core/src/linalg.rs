//! Small dense kernels: Cholesky solves, power iteration and a
//! double-double spectral radius.

use ndarray::{Array1, Array2, ArrayView2};

use crate::Scalar;

/// Lower Cholesky factor of a symmetric positive definite matrix, or `None`
/// if a pivot is not strictly positive.
pub fn cholesky<F: Scalar>(a: ArrayView2<F>) -> Option<Array2<F>> {
    let n = a.nrows();
    if a.ncols() != n {
        return None;
    }
    let mut l = Array2::<F>::zeros((n, n));
    for j in 0..n {
        let mut d = a[[j, j]];
        for m in 0..j {
            d -= l[[j, m]] * l[[j, m]];
        }
        if !(d > F::zero()) || !d.is_finite() {
            return None;
        }
        let d = d.sqrt();
        l[[j, j]] = d;
        for i in (j + 1)..n {
            let mut s = a[[i, j]];
            for m in 0..j {
                s -= l[[i, m]] * l[[j, m]];
            }
            l[[i, j]] = s / d;
        }
    }
    Some(l)
}

/// Solves `L Lᵀ x = b` in place given the lower factor.
pub fn cholesky_solve<F: Scalar>(l: &Array2<F>, b: &mut Array1<F>) {
    let n = l.nrows();
    for i in 0..n {
        let mut s = b[i];
        for m in 0..i {
            s -= l[[i, m]] * b[m];
        }
        b[i] = s / l[[i, i]];
    }
    for i in (0..n).rev() {
        let mut s = b[i];
        for m in (i + 1)..n {
            s -= l[[m, i]] * b[m];
        }
        b[i] = s / l[[i, i]];
    }
}

/// `log det` of an SPD matrix through its Cholesky factor.
pub fn log_det_spd<F: Scalar>(a: ArrayView2<F>) -> Option<F> {
    let l = cholesky(a)?;
    Some(l.diag().iter().map(|d| d.ln()).sum::<F>() * F::of(2.0))
}

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration on Rayleigh quotients.
///
/// Stops when two successive estimates agree to `rel_tol` relative, or after
/// `max_iter` iterations. Returns zero for the zero matrix.
pub fn top_eigenvalue_psd<F: Scalar>(a: ArrayView2<F>, rel_tol: F, max_iter: usize) -> F {
    let n = a.nrows();
    if n == 0 {
        return F::zero();
    }
    // fixed low-discrepancy start so the result is reproducible
    let mut v = Array1::from_shape_fn(n, |i| {
        F::of(0.5 + ((i as f64 + 1.0) * 0.618_033_988_749_895).fract())
    });
    let norm = v.dot(&v).sqrt();
    v.mapv_inplace(|x| x / norm);
    let mut estimate = F::zero();
    for _ in 0..max_iter {
        let w = a.dot(&v);
        let rayleigh = v.dot(&w);
        let wn = w.dot(&w).sqrt();
        if wn == F::zero() {
            return F::zero();
        }
        v = w.mapv(|x| x / wn);
        if (rayleigh - estimate).abs() <= rel_tol * rayleigh.abs() {
            return rayleigh;
        }
        estimate = rayleigh;
    }
    estimate
}

/// `a + b` as an unevaluated sum `(s, e)`.
fn two_sum(a: f64, b: f64) -> (f64, f64) {
    let s = a + b;
    let v = s - a;
    (s, (a - (s - v)) + (b - v))
}

/// Fused multiply-add `acc + x·y` in double-double arithmetic.
fn dd_mul_add(acc: (f64, f64), x: (f64, f64), y: (f64, f64)) -> (f64, f64) {
    let p = x.0 * y.0;
    let pe = x.0.mul_add(y.0, -p) + (x.0 * y.1 + x.1 * y.0);
    let (s, e) = two_sum(acc.0, p);
    let (s, e2) = two_sum(s, e + acc.1 + pe);
    (s, e2)
}

/// Spectral radius of a square matrix from `‖A^n‖^(1/n)`, `n = 2^squarings`,
/// squaring in double-double arithmetic and rescaling by powers of two.
///
/// Unlike eigenvalues computed in `f64`, whose error on an `m × m` Jordan
/// block is about `ε^(1/m)`, this keeps defective spectra accurate to well
/// below `1e-8`. Cost is `squarings · n³` double-double operations.
pub fn gelfand_spectral_radius(a: ArrayView2<f64>, squarings: i32) -> f64 {
    let n = a.nrows();
    let mut m: Vec<(f64, f64)> = a.iter().map(|&v| (v, 0.0)).collect();
    // A^(2^j) = m · 2^exp2
    let mut exp2: i128 = 0;
    for _ in 0..squarings {
        let mut next = vec![(0.0, 0.0); n * n];
        for i in 0..n {
            for l in 0..n {
                let x = m[i * n + l];
                if x.0 == 0.0 {
                    continue;
                }
                for j in 0..n {
                    let y = m[l * n + j];
                    if y.0 != 0.0 {
                        next[i * n + j] = dd_mul_add(next[i * n + j], x, y);
                    }
                }
            }
        }
        let largest = next.iter().fold(0.0f64, |acc, v| acc.max(v.0.abs()));
        if largest == 0.0 {
            return 0.0;
        }
        let shift = largest.log2().round() as i32;
        let scale = (-shift as f64).exp2();
        m = next.into_iter().map(|(h, l)| (h * scale, l * scale)).collect();
        exp2 = 2 * exp2 + shift as i128;
    }
    let norm = m.iter().map(|v| v.0 * v.0).sum::<f64>().sqrt();
    ((exp2 as f64 + norm.log2()) / (squarings as f64).exp2()).exp2()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn cholesky_solves_spd_system() {
        let a = array![[4.0f64, 2.0, 0.6], [2.0, 5.0, 1.0], [0.6, 1.0, 3.0]];
        let l = cholesky(a.view()).unwrap();
        let mut b = array![1.0, -2.0, 0.5];
        let rhs = b.clone();
        cholesky_solve(&l, &mut b);
        let back = a.dot(&b);
        for (x, y) in back.iter().zip(rhs.iter()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let a = array![[1.0, 2.0], [2.0, 1.0]];
        assert!(cholesky(a.view()).is_none());
    }

    #[test]
    fn log_det_of_diagonal() {
        let a = array![[2.0, 0.0], [0.0, 3.0]];
        assert!((log_det_spd(a.view()).unwrap() - 6.0f64.ln()).abs() < 1e-14);
    }

    #[test]
    fn power_iteration_diagonal() {
        let a = array![[1.0f64, 0.0, 0.0], [0.0, 9.0, 0.0], [0.0, 0.0, 4.0]];
        assert!((top_eigenvalue_psd(a.view(), 1e-12, 5000) - 9.0).abs() < 1e-9);
    }

    #[test]
    fn gelfand_radius_on_a_jordan_block() {
        let a = array![[0.5, 1.0, 0.0], [0.0, 0.5, 1.0], [0.0, 0.0, 0.5]];
        assert!((gelfand_spectral_radius(a.view(), 60) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn gelfand_radius_on_a_rotation() {
        let (c, s) = (0.3f64.cos() * 0.9, 0.3f64.sin() * 0.9);
        let a = array![[c, -s], [s, c]];
        assert!((gelfand_spectral_radius(a.view(), 60) - 0.9).abs() < 1e-12);
        assert_eq!(gelfand_spectral_radius(array![[0.0, 1.0], [0.0, 0.0]].view(), 60), 0.0);
    }
}
