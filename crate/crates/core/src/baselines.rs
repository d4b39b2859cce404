//! Comparison estimators: least squares (fixed or AIC-selected lag), lasso
//! and lag-weighted lasso, sample mean, random walk, and the ridge refit of a
//! selected support.

use std::fmt;

use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::linalg::{cholesky, cholesky_solve, log_det_spd};
use crate::penalty::PenaltyKind;
use crate::series::{recover_intercept, CoefficientTensor, LagDesign, TimeSeriesPanel};
use crate::solver::{fit, FitConfig, FitResult};
use crate::{Error, Result, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BaselineKind {
    LeastSquaresVar { lag: usize },
    /// Lag chosen by AIC up to the evaluation lag bound.
    AicSelectedVar,
    SampleMean,
    RandomWalk,
}

impl fmt::Display for BaselineKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::LeastSquaresVar { lag: 1 } => write!(f, "ls"),
            Self::LeastSquaresVar { lag } => write!(f, "ls:{lag}"),
            Self::AicSelectedVar => write!(f, "ls-aic"),
            Self::SampleMean => write!(f, "mean"),
            Self::RandomWalk => write!(f, "rw"),
        }
    }
}

/// Least-squares VAR with `lag` lags on a design that consumes `p ≥ lag`
/// presample observations (so fits with different lags share a sample).
/// The returned tensor has `p` lag slots; slots beyond `lag` are zero.
pub fn least_squares_var<F: Scalar>(panel: &TimeSeriesPanel<F>, lag: usize, p: usize) -> Result<CoefficientTensor<F>> {
    if p == 0 || lag > p {
        return Err(Error::InvalidArgument(format!("lag {lag} with presample {p}")));
    }
    let design = LagDesign::build(panel, p)?.center();
    least_squares_design(&design, lag)
}

/// Least squares on the first `lag` lag blocks of a design.
pub fn least_squares_design<F: Scalar>(design: &LagDesign<F>, lag: usize) -> Result<CoefficientTensor<F>> {
    let design = design.center();
    let (k, p, t) = (design.k(), design.p(), design.n_obs());
    if lag > p {
        return Err(Error::InvalidArgument(format!("lag {lag} exceeds design lags {p}")));
    }
    let mut rows = Array2::<F>::zeros((k, k * p));
    if lag > 0 {
        let m = k * lag;
        if m > t {
            return Err(Error::TooFewObservations { params: m, obs: t });
        }
        let z = design.z().slice_move(s![..m, ..]);
        let gram = z.dot(&z.t());
        let chol = cholesky(gram.view()).ok_or(Error::Singular)?;
        for i in 0..k {
            let mut rhs = z.dot(&design.y().row(i));
            cholesky_solve(&chol, &mut rhs);
            rows.slice_mut(s![i, ..m]).assign(&rhs);
        }
    }
    let nu = recover_intercept(rows.view(), &design)?;
    CoefficientTensor::from_rows(rows.view(), nu)
}

/// Residual covariance `UUᵀ/T` of a fit on the design (ML denominator).
pub fn residual_covariance<F: Scalar>(design: &LagDesign<F>, tensor: &CoefficientTensor<F>) -> Result<Array2<F>> {
    let design = design.center();
    let rows = tensor.to_rows();
    if rows.dim() != (design.k(), design.z().nrows()) {
        return Err(Error::Dimension("tensor does not match design".into()));
    }
    let u = &design.y() - &rows.dot(&design.z());
    Ok(u.dot(&u.t()) / F::of_usize(design.n_obs()))
}

/// `log det Σ̂ + 2 k² lag / T`.
pub fn aic<F: Scalar>(residual_cov: ArrayView2<F>, lag: usize, k: usize, t: usize) -> Result<F> {
    if residual_cov.dim() != (k, k) {
        return Err(Error::Dimension(format!("{:?} covariance for k = {k}", residual_cov.dim())));
    }
    if t == 0 {
        return Err(Error::InvalidArgument("AIC needs T > 0".into()));
    }
    let log_det = log_det_spd(residual_cov).ok_or(Error::NotPositiveDefinite)?;
    Ok(log_det + F::of_usize(2 * k * k * lag) / F::of_usize(t))
}

#[derive(Debug, Clone)]
pub struct AicSelection<F> {
    pub lag: usize,
    /// `AIC(ℓ)` for `ℓ = 0..=max_lag`; `None` where least squares is not
    /// defined or the residual covariance is singular.
    pub criteria: Vec<Option<F>>,
    pub tensor: CoefficientTensor<F>,
}

/// Fits least squares for every lag `0..=max_lag` with `k·lag < T` on a common
/// sample (presample `max(max_lag, 1)`) and keeps the AIC minimizer.
pub fn select_lag_aic<F: Scalar>(panel: &TimeSeriesPanel<F>, max_lag: usize) -> Result<AicSelection<F>> {
    let p = max_lag.max(1);
    let design = LagDesign::build(panel, p)?.center();
    let (k, t) = (design.k(), design.n_obs());
    let mut best: Option<(usize, F, CoefficientTensor<F>)> = None;
    let mut criteria = Vec::with_capacity(max_lag + 1);
    for lag in 0..=max_lag {
        if k * lag >= t {
            criteria.push(None);
            continue;
        }
        let value = least_squares_design(&design, lag).and_then(|tensor| {
            let cov = residual_covariance(&design, &tensor)?;
            Ok((aic(cov.view(), lag, k, t)?, tensor))
        });
        match value {
            Ok((v, tensor)) if v.is_finite() => {
                criteria.push(Some(v));
                if best.as_ref().is_none_or(|(_, b, _)| v < *b) {
                    best = Some((lag, v, tensor));
                }
            }
            _ => criteria.push(None),
        }
    }
    let (lag, _, tensor) = best.ok_or(Error::NotPositiveDefinite)?;
    Ok(AicSelection { lag, criteria, tensor })
}

/// Lasso path on a (centered) design.
pub fn lasso_fit<F: Scalar>(design: &LagDesign<F>, config: &FitConfig<F>) -> Result<FitResult<F>> {
    fit(design, PenaltyKind::Lasso, config)
}

/// Lasso with lag-`ℓ` coordinates penalized by `λ ℓ^alpha`.
pub fn lag_weighted_lasso_fit<F: Scalar>(design: &LagDesign<F>, alpha: f64, config: &FitConfig<F>) -> Result<FitResult<F>> {
    fit(design, PenaltyKind::LagWeightedLasso { alpha }, config)
}

/// `ŷ_{t+1} = (1/t) Σ_{s ≤ t} y_s` from the first `t` observations.
pub fn forecast_sample_mean<F: Scalar>(panel: &TimeSeriesPanel<F>, t: usize) -> Result<Array1<F>> {
    check_origin(panel, t, 1)?;
    Ok(panel.values().slice(s![.., ..t]).mean_axis(Axis(1)).expect("t >= 1"))
}

/// `ŷ_{t+1} = y_t`, the last of the first `t` observations.
pub fn forecast_random_walk<F: Scalar>(panel: &TimeSeriesPanel<F>, t: usize) -> Result<Array1<F>> {
    check_origin(panel, t, 1)?;
    Ok(panel.column(t - 1).to_owned())
}

fn check_origin<F: Scalar>(panel: &TimeSeriesPanel<F>, t: usize, needed: usize) -> Result<()> {
    if t < needed {
        return Err(Error::InsufficientHistory { needed, have: t });
    }
    if t > panel.total_length() {
        return Err(Error::InvalidArgument(format!(
            "origin {t} beyond a panel of length {}",
            panel.total_length()
        )));
    }
    Ok(())
}

/// `B^(1) = I`, all other lags and the intercept zero.
pub fn random_walk_tensor<F: Scalar>(k: usize, p: usize) -> CoefficientTensor<F> {
    let mut rows = Array2::zeros((k, k * p));
    for i in 0..k {
        rows[[i, i]] = F::one();
    }
    CoefficientTensor::from_rows(rows.view(), Array1::zeros(k)).expect("valid shape")
}

/// Ridge regression restricted, row by row, to the coordinates in
/// `support` (`k × kp`); masked-out coefficients are exactly zero.
pub fn ridge_refit<F: Scalar>(design: &LagDesign<F>, support: ArrayView2<bool>, ridge_penalty: F) -> Result<CoefficientTensor<F>> {
    if !(ridge_penalty > F::zero()) || !ridge_penalty.is_finite() {
        return Err(Error::InvalidArgument("ridge penalty must be positive".into()));
    }
    let design = design.center();
    let (k, kp) = (design.k(), design.z().nrows());
    if support.dim() != (k, kp) {
        return Err(Error::Dimension(format!("support {:?} for a {k}x{kp} coefficient matrix", support.dim())));
    }
    let mut rows = Array2::<F>::zeros((k, kp));
    if support.iter().any(|&m| m) {
        let z = design.z();
        let gram = z.dot(&z.t());
        let yzt = design.y().dot(&z.t());
        for i in 0..k {
            let idx: Vec<usize> = (0..kp).filter(|&c| support[[i, c]]).collect();
            if idx.is_empty() {
                continue;
            }
            let n = idx.len();
            let mut g = Array2::from_shape_fn((n, n), |(a, b)| gram[[idx[a], idx[b]]]);
            for a in 0..n {
                g[[a, a]] += ridge_penalty;
            }
            let chol = cholesky(g.view()).ok_or(Error::Singular)?;
            let mut rhs = Array1::from_shape_fn(n, |a| yzt[[i, idx[a]]]);
            cholesky_solve(&chol, &mut rhs);
            for (a, &c) in idx.iter().enumerate() {
                rows[[i, c]] = rhs[a];
            }
        }
    }
    let nu = recover_intercept(rows.view(), &design)?;
    CoefficientTensor::from_rows(rows.view(), nu)
}
