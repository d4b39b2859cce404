//! Independent reference implementations used by the integration tests.
#![allow(dead_code)]

use hvar::PenaltyKind;
use ndarray::{Array1, Array2, ArrayView1, ArrayView2};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// Penalty groups of row `i` written out from the penalty definitions:
/// index `(ℓ−1)k + j` is the lag-`ℓ` coefficient on series `j`.
pub fn groups(kind: PenaltyKind, i: usize, k: usize, p: usize) -> Vec<(Vec<usize>, f64)> {
    let idx = |lag: usize, j: usize| (lag - 1) * k + j;
    let mut out = Vec::new();
    match kind {
        PenaltyKind::Componentwise => {
            for l in 1..=p {
                out.push(((l..=p).flat_map(|m| (0..k).map(move |j| idx(m, j))).collect(), 1.0));
            }
        }
        PenaltyKind::OwnOther => {
            for l in 1..=p {
                out.push(((l..=p).flat_map(|m| (0..k).map(move |j| idx(m, j))).collect(), 1.0));
                let mut other: Vec<usize> = (0..k).filter(|&j| j != i).map(|j| idx(l, j)).collect();
                other.extend((l + 1..=p).flat_map(|m| (0..k).map(move |j| idx(m, j))));
                if !other.is_empty() {
                    out.push((other, 1.0));
                }
            }
        }
        PenaltyKind::Elementwise => {
            for j in 0..k {
                for l in 1..=p {
                    out.push(((l..=p).map(|m| idx(m, j)).collect(), 1.0));
                }
            }
        }
        PenaltyKind::Lasso => {
            for c in 0..k * p {
                out.push((vec![c], 1.0));
            }
        }
        PenaltyKind::LagWeightedLasso { alpha } => {
            for l in 1..=p {
                for j in 0..k {
                    out.push((vec![idx(l, j)], (l as f64).powf(alpha)));
                }
            }
        }
    }
    out
}

pub fn penalty(x: ArrayView1<f64>, groups: &[(Vec<usize>, f64)]) -> f64 {
    groups.iter().map(|(g, w)| w * g.iter().map(|&c| x[c] * x[c]).sum::<f64>().sqrt()).sum()
}

pub fn prox_objective(x: ArrayView1<f64>, x_tilde: ArrayView1<f64>, lambda: f64, groups: &[(Vec<usize>, f64)]) -> f64 {
    0.5 * (&x - &x_tilde).mapv(|v| v * v).sum() + lambda * penalty(x, groups)
}

/// Prox of `λ Σ w_g ‖x_g‖` by cyclic block coordinate descent on the dual
/// `max −½‖x̃ − Σ ξ_g‖² + ½‖x̃‖²` s.t. `‖ξ_g‖ ≤ λ w_g`, sweeping groups from the
/// last to the first until the duality gap is below `gap_tol` or a sweep
/// leaves the iterate unchanged. Returns the primal point and the final gap;
/// since the primal is 1-strongly convex, `‖x − x*‖² ≤ 2 gap`.
pub fn prox_dual_bcd(x_tilde: ArrayView1<f64>, lambda: f64, groups: &[(Vec<usize>, f64)], gap_tol: f64) -> (Array1<f64>, f64) {
    let n = x_tilde.len();
    let mut xi: Vec<Array1<f64>> = vec![Array1::zeros(n); groups.len()];
    let mut sum = Array1::<f64>::zeros(n);
    let mut gap = f64::INFINITY;
    for sweep in 0..200_000 {
        let before = sum.clone();
        for (h, (g, w)) in groups.iter().enumerate().rev() {
            for &c in g {
                sum[c] -= xi[h][c];
            }
            let radius = lambda * w;
            let norm = g.iter().map(|&c| (x_tilde[c] - sum[c]).powi(2)).sum::<f64>().sqrt();
            let scale = if norm > radius { radius / norm } else { 1.0 };
            for &c in g {
                xi[h][c] = scale * (x_tilde[c] - sum[c]);
                sum[c] += xi[h][c];
            }
        }
        let stalled = sum == before;
        if stalled || sweep % 10 == 0 {
            let x = &x_tilde - &sum;
            let primal = prox_objective(x.view(), x_tilde, lambda, groups);
            let dual = 0.5 * x_tilde.mapv(|v| v * v).sum() - 0.5 * x.mapv(|v| v * v).sum();
            gap = primal - dual;
            if gap <= gap_tol || stalled {
                return (x, gap);
            }
        }
    }
    (&x_tilde - &sum, gap)
}

pub fn row_objective(y: ArrayView1<f64>, z: ArrayView2<f64>, b: ArrayView1<f64>, lambda: f64, groups: &[(Vec<usize>, f64)]) -> f64 {
    let r = &y - &b.dot(&z);
    0.5 * r.mapv(|v| v * v).sum() + lambda * penalty(b, groups)
}

/// Plain proximal gradient with step `1/‖Z‖_F²` and the dual-BCD prox.
pub fn ista_row(y: ArrayView1<f64>, z: ArrayView2<f64>, lambda: f64, groups: &[(Vec<usize>, f64)], iters: usize) -> Array1<f64> {
    let step = 1.0 / z.mapv(|v| v * v).sum();
    let mut b = Array1::<f64>::zeros(z.nrows());
    for _ in 0..iters {
        let grad = -(&y - &b.dot(&z)).dot(&z.t());
        let v = &b - &(grad * step);
        b = prox_dual_bcd(v.view(), step * lambda, groups, 1e-20).0;
    }
    b
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
pub fn solve(a: &Array2<f64>, b: &Array1<f64>) -> Array1<f64> {
    let n = a.nrows();
    let mut m = a.clone();
    let mut r = b.clone();
    for col in 0..n {
        let piv = (col..n).max_by(|&x, &y| m[[x, col]].abs().total_cmp(&m[[y, col]].abs())).unwrap();
        if piv != col {
            for c in 0..n {
                m.swap([col, c], [piv, c]);
            }
            r.swap(col, piv);
        }
        for row in col + 1..n {
            let f = m[[row, col]] / m[[col, col]];
            for c in col..n {
                m[[row, c]] -= f * m[[col, c]];
            }
            r[row] -= f * r[col];
        }
    }
    let mut x = Array1::zeros(n);
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|c| m[[row, c]] * x[c]).sum();
        x[row] = (r[row] - s) / m[[row, row]];
    }
    x
}

/// Least-squares row `y Zᵀ (Z Zᵀ)⁻¹` (no intercept).
pub fn least_squares_row(y: ArrayView1<f64>, z: ArrayView2<f64>) -> Array1<f64> {
    solve(&z.dot(&z.t()), &z.dot(&y))
}

pub fn gaussian(rng: &mut ChaCha8Rng, shape: (usize, usize)) -> Array2<f64> {
    Array2::from_shape_fn(shape, |_| rng.sample::<f64, _>(StandardNormal))
}

/// Rows minus their means.
pub fn center_rows(a: &Array2<f64>) -> Array2<f64> {
    let mut out = a.clone();
    for mut row in out.rows_mut() {
        let m = row.mean().unwrap();
        row.mapv_inplace(|v| v - m);
    }
    out
}

/// Double-double number `hi + lo` with `|lo| ≤ ulp(hi)/2`.
#[derive(Clone, Copy)]
struct Dd(f64, f64);

fn two_sum(a: f64, b: f64) -> Dd {
    let s = a + b;
    let bb = s - a;
    Dd(s, (a - (s - bb)) + (b - bb))
}

impl Dd {
    fn add(self, o: Dd) -> Dd {
        let s = two_sum(self.0, o.0);
        let t = two_sum(self.1, o.1);
        let u = two_sum(s.0, s.1 + t.0);
        two_sum(u.0, u.1 + t.1)
    }

    fn mul(self, o: Dd) -> Dd {
        let p = self.0 * o.0;
        let e = self.0.mul_add(o.0, -p);
        two_sum(p, e + (self.0 * o.1 + self.1 * o.0))
    }
}

/// Spectral radius by Gelfand's formula `ρ = lim ‖A^n‖^(1/n)` with
/// `n = 2^60`, squaring in double-double arithmetic and renormalizing by
/// exact powers of two. Rounding perturbs an `m × m` Jordan block by about
/// `(1e-32)^(1/m)`, far below what plain `f64` eigenvalues achieve.
pub fn spectral_radius_by_squaring(a: &Array2<f64>) -> f64 {
    let n = a.nrows();
    let mut m: Vec<Dd> = a.iter().map(|&v| Dd(v, 0.0)).collect();
    let mut exponent: i128 = 0;
    let squarings = 60;
    for _ in 0..squarings {
        let mut sq = vec![Dd(0.0, 0.0); n * n];
        for r in 0..n {
            for k in 0..n {
                let x = m[r * n + k];
                if x.0 == 0.0 {
                    continue;
                }
                for c in 0..n {
                    sq[r * n + c] = sq[r * n + c].add(x.mul(m[k * n + c]));
                }
            }
        }
        let top = sq.iter().fold(0.0f64, |acc, v| acc.max(v.0.abs()));
        if top == 0.0 {
            return 0.0;
        }
        let shift = top.log2().round() as i32;
        let scale = 2f64.powi(-shift);
        m = sq.iter().map(|v| Dd(v.0 * scale, v.1 * scale)).collect();
        exponent = 2 * exponent + shift as i128;
    }
    let fro = m.iter().map(|v| v.0 * v.0).sum::<f64>().sqrt();
    let log2_rho = (exponent as f64 + fro.log2()) / 2f64.powi(squarings);
    log2_rho.exp2()
}

/// Companion matrix of a `k × k × p` coefficient array.
pub fn companion(b: &ndarray::Array3<f64>) -> Array2<f64> {
    let (k, _, p) = b.dim();
    let n = k * p;
    Array2::from_shape_fn((n, n), |(r, c)| {
        if r < k {
            b[[r, c % k, c / k]]
        } else if c + k == r {
            1.0
        } else {
            0.0
        }
    })
}

pub const ALL_KINDS: [PenaltyKind; 5] = [
    PenaltyKind::Componentwise,
    PenaltyKind::OwnOther,
    PenaltyKind::Elementwise,
    PenaltyKind::Lasso,
    PenaltyKind::LagWeightedLasso { alpha: 0.5 },
];

pub const HIERARCHICAL: [PenaltyKind; 3] = [PenaltyKind::Componentwise, PenaltyKind::OwnOther, PenaltyKind::Elementwise];
