//! Hierarchical vector autoregression (HVAR).
//!
//! Estimates high-dimensional VAR models whose lag coefficients are shrunk by
//! nested group-lasso penalties, so that fitted models honor an ordered
//! "low lags first" sparsity pattern. The crate contains
//!
//! - lag-design construction and data transforms ([`series`]),
//! - nested group chains for the componentwise, own-other and elementwise
//!   penalties ([`penalty`]),
//! - the one-pass proximal operator for nested group norms ([`prox`]),
//! - a row-decoupled accelerated proximal gradient solver ([`solver`]),
//! - comparison estimators ([`baselines`]),
//! - a sparse-VAR scenario simulator ([`simulation`]),
//! - rolling one-step-ahead evaluation and tuning ([`evaluation`]),
//! - CSV / JSON readers and writers ([`io`]).
//!
//! Numerical code is generic over [`Scalar`] (`f32` or `f64`); the aliases at
//! the crate root fix the scalar to `f64`, which is what the simulator and the
//! file formats use.

// `!(x > 0)` checks are written that way so NaN fails them too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod error;
pub mod evaluation;
pub mod io;
pub mod linalg;
pub mod penalty;
pub mod prox;
pub mod scalar;
pub mod series;
pub mod simulation;
pub mod solver;

pub use error::{Error, Result};
pub use penalty::{NestedGroupChain, PenaltyKind, RowPenalty};
pub use scalar::Scalar;
pub use series::{CoefficientTensor, LagDesign, MaxlagMatrix, ScaleRecord, TimeSeriesPanel};
pub use solver::{FitConfig, FitResult, StepRule};

pub type Panel = series::TimeSeriesPanel<f64>;
pub type Design = series::LagDesign<f64>;
pub type Coefficients = series::CoefficientTensor<f64>;
pub type Chain = penalty::NestedGroupChain<f64>;
pub type Penalty = penalty::RowPenalty<f64>;
pub type Config = solver::FitConfig<f64>;
pub type Fit = solver::FitResult<f64>;

pub type Panel32 = series::TimeSeriesPanel<f32>;
pub type Design32 = series::LagDesign<f32>;
pub type Coefficients32 = series::CoefficientTensor<f32>;
