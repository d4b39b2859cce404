//! Multivariate series, lag designs, coefficient tensors and maxlag matrices.
//!
//! Conventions used across the crate:
//!
//! - A panel stores component `i` at time `t` in `values[[i, t]]`.
//! - A lag design with `p` lags consumes the first `p` panel columns as
//!   presample; observation `t` of the design is panel column `p + t`.
//! - Regressors are stacked newest lag first: rows `(ℓ-1)k .. ℓk` of `Z` hold
//!   lag `ℓ`. A coefficient row `B_i` of length `kp` uses the same layout, so
//!   coordinate `(ℓ-1)k + j` is `B_ij^(ℓ)`.

use ndarray::{s, Array1, Array2, Array3, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, Scalar};

/// Raw `k`-component series observed over `total_length` time points.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeSeriesPanel<F> {
    values: Array2<F>,
    names: Vec<String>,
}

impl<F: Scalar> TimeSeriesPanel<F> {
    /// Builds a panel from a `k × total_length` matrix. Components get the
    /// default names `y1..yk`.
    pub fn new(values: Array2<F>) -> Result<Self> {
        let names = (1..=values.nrows()).map(|i| format!("y{i}")).collect();
        Self::with_names(values, names)
    }

    pub fn with_names(values: Array2<F>, names: Vec<String>) -> Result<Self> {
        if values.nrows() == 0 {
            return Err(Error::InvalidArgument("panel needs at least one component".into()));
        }
        if values.ncols() == 0 {
            return Err(Error::InvalidArgument("panel needs at least one time point".into()));
        }
        if names.len() != values.nrows() {
            return Err(Error::Dimension(format!(
                "{} names for {} components",
                names.len(),
                values.nrows()
            )));
        }
        if let Some(((i, t), _)) = values.indexed_iter().find(|(_, v)| !v.is_finite()) {
            return Err(Error::NonFinite(format!("panel at component {i}, time {t}")));
        }
        Ok(Self { values, names })
    }

    pub fn k(&self) -> usize {
        self.values.nrows()
    }

    pub fn total_length(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> ArrayView2<'_, F> {
        self.values.view()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Observation at (0-based) time `t`.
    pub fn column(&self, t: usize) -> ArrayView1<'_, F> {
        self.values.column(t)
    }

    /// The first `len` time points.
    pub fn prefix(&self, len: usize) -> Result<Self> {
        if len == 0 || len > self.total_length() {
            return Err(Error::InvalidArgument(format!(
                "prefix of length {len} from a panel of length {}",
                self.total_length()
            )));
        }
        Ok(Self {
            values: self.values.slice(s![.., ..len]).to_owned(),
            names: self.names.clone(),
        })
    }

    /// Standardizes every component to sample mean 0 and sample variance 1
    /// (denominator `n - 1`).
    pub fn standardize(&self) -> Result<(Self, ScaleRecord<F>)> {
        let n = self.total_length();
        if n < 2 {
            return Err(Error::SeriesTooShort { length: n, lags: 0 });
        }
        let record = ScaleRecord::estimate(self.values.view())?;
        if let Some(i) = record.scales.iter().position(|s| *s == F::zero()) {
            return Err(Error::ConstantSeries { name: self.names[i].clone() });
        }
        let values = record.apply(self.values.view());
        Ok((Self { values, names: self.names.clone() }, record))
    }

    /// Inverse of [`standardize`](Self::standardize).
    pub fn destandardize(&self, record: &ScaleRecord<F>) -> Result<Self> {
        if record.means.len() != self.k() {
            return Err(Error::Dimension("scale record does not match panel".into()));
        }
        let mut values = self.values.clone();
        for (i, mut row) in values.axis_iter_mut(Axis(0)).enumerate() {
            let (m, sd) = (record.means[i], record.scales[i]);
            row.mapv_inplace(|x| x * sd + m);
        }
        Ok(Self { values, names: self.names.clone() })
    }
}

/// Per-component location and scale removed by standardization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaleRecord<F> {
    pub means: Vec<F>,
    pub scales: Vec<F>,
}

impl<F: Scalar> ScaleRecord<F> {
    /// Sample means and standard deviations (denominator `n - 1`) of each row.
    pub fn estimate(values: ArrayView2<F>) -> Result<Self> {
        let n = values.ncols();
        if n < 2 {
            return Err(Error::SeriesTooShort { length: n, lags: 0 });
        }
        let nf = F::of_usize(n);
        let mut means = Vec::with_capacity(values.nrows());
        let mut scales = Vec::with_capacity(values.nrows());
        for row in values.axis_iter(Axis(0)) {
            let mean = row.sum() / nf;
            let ss: F = row.iter().map(|&x| (x - mean) * (x - mean)).sum();
            means.push(mean);
            scales.push((ss / F::of_usize(n - 1)).sqrt());
        }
        Ok(Self { means, scales })
    }

    pub fn apply(&self, values: ArrayView2<F>) -> Array2<F> {
        let mut out = values.to_owned();
        for (i, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            let (m, sd) = (self.means[i], self.scales[i]);
            row.mapv_inplace(|x| (x - m) / sd);
        }
        out
    }

    /// Maps a standardized observation vector back to raw units.
    pub fn invert_vector(&self, v: ArrayView1<F>) -> Array1<F> {
        Array1::from_shape_fn(v.len(), |i| v[i] * self.scales[i] + self.means[i])
    }
}

/// Response matrix `Y` (`k × T`) and stacked-lag regressors `Z` (`kp × T`).
#[derive(Debug, Clone, PartialEq)]
pub struct LagDesign<F> {
    y: Array2<F>,
    z: Array2<F>,
    p: usize,
    y_means: Array1<F>,
    z_means: Array1<F>,
    centered: bool,
}

impl<F: Scalar> LagDesign<F> {
    /// Stacks `p` lags of the panel. Observation `t` regresses panel column
    /// `p + t` on columns `p + t - 1, …, t`.
    pub fn build(panel: &TimeSeriesPanel<F>, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::InvalidArgument("lag order must be positive".into()));
        }
        let len = panel.total_length();
        if len <= p {
            return Err(Error::SeriesTooShort { length: len, lags: p });
        }
        let k = panel.k();
        let t_obs = len - p;
        let values = panel.values();
        let y = values.slice(s![.., p..]).to_owned();
        let mut z = Array2::<F>::zeros((k * p, t_obs));
        for lag in 1..=p {
            z.slice_mut(s![(lag - 1) * k..lag * k, ..])
                .assign(&values.slice(s![.., p - lag..len - lag]));
        }
        Ok(Self {
            y,
            z,
            p,
            y_means: Array1::zeros(k),
            z_means: Array1::zeros(k * p),
            centered: false,
        })
    }

    /// Wraps an explicit uncentered `(Y, Z)` pair; `Z` must have `k·p` rows.
    pub fn from_parts(y: Array2<F>, z: Array2<F>, p: usize) -> Result<Self> {
        let k = y.nrows();
        if p == 0 || z.nrows() != k * p || z.ncols() != y.ncols() || y.ncols() == 0 {
            return Err(Error::Dimension(format!(
                "Y {}x{} and Z {}x{} with p = {p}",
                k,
                y.ncols(),
                z.nrows(),
                z.ncols()
            )));
        }
        Ok(Self {
            y,
            z,
            p,
            y_means: Array1::zeros(k),
            z_means: Array1::zeros(k * p),
            centered: false,
        })
    }

    /// Subtracts each row's mean from `Y` and `Z`, i.e. right-multiplies both
    /// by `I - 11ᵀ/T`. The removed means are kept for intercept recovery.
    /// Centering a centered design returns it unchanged.
    pub fn center(&self) -> Self {
        if self.centered {
            return self.clone();
        }
        let y_means = self.y.mean_axis(Axis(1)).expect("T > 0");
        let z_means = self.z.mean_axis(Axis(1)).expect("T > 0");
        let y = &self.y - &y_means.view().insert_axis(Axis(1));
        let z = &self.z - &z_means.view().insert_axis(Axis(1));
        Self { y, z, p: self.p, y_means, z_means, centered: true }
    }

    pub fn y(&self) -> ArrayView2<'_, F> {
        self.y.view()
    }

    pub fn z(&self) -> ArrayView2<'_, F> {
        self.z.view()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn k(&self) -> usize {
        self.y.nrows()
    }

    /// Number of observations `T`.
    pub fn n_obs(&self) -> usize {
        self.y.ncols()
    }

    pub fn is_centered(&self) -> bool {
        self.centered
    }

    /// Row means of `Y` before centering (computed on the fly when the
    /// design is uncentered).
    pub fn y_means(&self) -> Array1<F> {
        if self.centered {
            self.y_means.clone()
        } else {
            self.y.mean_axis(Axis(1)).expect("T > 0")
        }
    }

    pub fn z_means(&self) -> Array1<F> {
        if self.centered {
            self.z_means.clone()
        } else {
            self.z.mean_axis(Axis(1)).expect("T > 0")
        }
    }

    /// Keeps only the first `lags` lag blocks of `Z` (same observations).
    pub fn truncate_lags(&self, lags: usize) -> Result<Self> {
        if lags == 0 || lags > self.p {
            return Err(Error::InvalidArgument(format!(
                "cannot truncate {} lags to {lags}",
                self.p
            )));
        }
        let rows = lags * self.k();
        Ok(Self {
            y: self.y.clone(),
            z: self.z.slice(s![..rows, ..]).to_owned(),
            p: lags,
            y_means: self.y_means.clone(),
            z_means: self.z_means.slice(s![..rows]).to_owned(),
            centered: self.centered,
        })
    }
}

/// Lag coefficients `B[[i, j, ℓ-1]] = B_ij^(ℓ)` and intercept `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct CoefficientTensor<F> {
    b: Array3<F>,
    nu: Array1<F>,
}

impl<F: Scalar> CoefficientTensor<F> {
    pub fn new(b: Array3<F>, nu: Array1<F>) -> Result<Self> {
        let (k, k2, p) = b.dim();
        if k != k2 || nu.len() != k {
            return Err(Error::Dimension(format!(
                "tensor {k}x{k2}x{p} with intercept of length {}",
                nu.len()
            )));
        }
        if p == 0 {
            return Err(Error::InvalidArgument("tensor needs p >= 1".into()));
        }
        if b.iter().chain(nu.iter()).any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("coefficient tensor".into()));
        }
        Ok(Self { b, nu })
    }

    pub fn zeros(k: usize, p: usize) -> Self {
        Self { b: Array3::zeros((k, k, p)), nu: Array1::zeros(k) }
    }

    /// Assembles a tensor from a `k × kp` row matrix in newest-first layout.
    pub fn from_rows(rows: ArrayView2<F>, nu: Array1<F>) -> Result<Self> {
        let k = rows.nrows();
        if k == 0 || !rows.ncols().is_multiple_of(k) {
            return Err(Error::Dimension(format!("{}x{} coefficient rows", k, rows.ncols())));
        }
        let p = rows.ncols() / k;
        let b = Array3::from_shape_fn((k, k, p), |(i, j, l)| rows[[i, l * k + j]]);
        Self::new(b, nu)
    }

    /// `k × kp` row matrix `[B^(1) ⋯ B^(p)]`.
    pub fn to_rows(&self) -> Array2<F> {
        let (k, _, p) = self.b.dim();
        Array2::from_shape_fn((k, k * p), |(i, c)| self.b[[i, c % k, c / k]])
    }

    pub fn k(&self) -> usize {
        self.b.dim().0
    }

    pub fn p(&self) -> usize {
        self.b.dim().2
    }

    pub fn b(&self) -> &Array3<F> {
        &self.b
    }

    pub fn nu(&self) -> &Array1<F> {
        &self.nu
    }

    pub fn with_intercept(mut self, nu: Array1<F>) -> Result<Self> {
        if nu.len() != self.k() {
            return Err(Error::Dimension("intercept length".into()));
        }
        self.nu = nu;
        Ok(self)
    }

    /// The `k × k` matrix `B^(ℓ)` for `ℓ` in `1..=p`.
    pub fn lag_matrix(&self, lag: usize) -> Array2<F> {
        self.b.slice(s![.., .., lag - 1]).to_owned()
    }

    /// Boolean support mask in row layout (`k × kp`).
    pub fn support(&self) -> Array2<bool> {
        self.to_rows().mapv(|v| v != F::zero())
    }
}

/// Recovers `ν = mean(Y) - B·mean(Z)` so that the uncentered model reproduces
/// forecasts of a fit on centered data.
pub fn recover_intercept<F: Scalar>(rows: ArrayView2<F>, design: &LagDesign<F>) -> Result<Array1<F>> {
    let k = design.k();
    if rows.nrows() != k || rows.ncols() != k * design.p() {
        return Err(Error::Dimension(format!(
            "coefficient rows {}x{} for a design with k={k}, p={}",
            rows.nrows(),
            rows.ncols(),
            design.p()
        )));
    }
    Ok(design.y_means() - rows.dot(&design.z_means()))
}

/// `k × k` matrix of elementwise maximal lags.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct MaxlagMatrix {
    lags: Array2<usize>,
    p: usize,
}

impl MaxlagMatrix {
    pub fn new(lags: Array2<usize>, p: usize) -> Result<Self> {
        if lags.nrows() != lags.ncols() {
            return Err(Error::Dimension("maxlag matrix must be square".into()));
        }
        if let Some(v) = lags.iter().find(|&&v| v > p) {
            return Err(Error::InvalidArgument(format!("maxlag {v} exceeds p = {p}")));
        }
        Ok(Self { lags, p })
    }

    pub fn zeros(k: usize, p: usize) -> Self {
        Self { lags: Array2::zeros((k, k)), p }
    }

    pub fn k(&self) -> usize {
        self.lags.nrows()
    }

    pub fn p(&self) -> usize {
        self.p
    }

    pub fn get(&self, i: usize, j: usize) -> usize {
        self.lags[[i, j]]
    }

    pub fn as_array(&self) -> &Array2<usize> {
        &self.lags
    }

    /// `Σ_ij L_ij`.
    pub fn l1_norm(&self) -> usize {
        self.lags.sum()
    }

    /// `Σ_ij |L_ij - other_ij|`.
    pub fn l1_distance(&self, other: &MaxlagMatrix) -> Result<usize> {
        if self.lags.dim() != other.lags.dim() {
            return Err(Error::Dimension("maxlag matrices differ in shape".into()));
        }
        Ok(self.lags.iter().zip(other.lags.iter()).map(|(a, b)| a.abs_diff(*b)).sum())
    }
}

/// `L_ij = max{ℓ : |B_ij^(ℓ)| > zero_tol}`, or 0 when no such lag exists.
pub fn maxlag_of<F: Scalar>(tensor: &CoefficientTensor<F>, zero_tol: F) -> MaxlagMatrix {
    let (k, _, p) = tensor.b.dim();
    let lags = Array2::from_shape_fn((k, k), |(i, j)| {
        (1..=p).rev().find(|&l| tensor.b[[i, j, l - 1]].abs() > zero_tol).unwrap_or(0)
    });
    MaxlagMatrix { lags, p }
}
