//! Accelerated proximal gradient fitting of penalized VAR objectives.
//!
//! With the intercept removed by centering, the objective
//! `½‖Y − BZ‖² + λ Σ_i Ω_i(B_i)` separates over the rows of `B`, so each row
//! is an independent problem `½‖Y_i − B_i Z‖² + λ Ω_i(B_i)`. Rows are solved
//! in parallel with FISTA using momentum `(m − 2)/(m + 1)` and, by default, the
//! fixed step `1/σ₁(Z)²`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::linalg::top_eigenvalue_psd;
use crate::penalty::{PenaltyKind, RowPenalty};
use crate::prox::{prox_row, prox_row_in_place};
use crate::series::{recover_intercept, CoefficientTensor, LagDesign};
use crate::{Error, Result, Scalar};

/// Step-size policy of the proximal gradient iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StepRule {
    /// `s = 1/σ₁(Z)²`, the inverse Lipschitz constant of the smooth part.
    FixedLipschitz,
    /// Start from `min(kp, T)/‖Z‖_F²` and halve until the quadratic upper
    /// model of the smooth part holds.
    Backtracking,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig<F> {
    /// Stop once `‖b̂ − B_i[m]‖_∞ ≤ epsilon`.
    pub epsilon: F,
    pub max_iter: usize,
    /// Strictly descending, non-negative penalty levels.
    pub lambda_grid: Vec<F>,
    pub step_rule: StepRule,
}

impl<F: Scalar> FitConfig<F> {
    pub fn new(lambda_grid: Vec<F>) -> Result<Self> {
        let config = Self { lambda_grid, ..Self::default() };
        config.validate()?;
        Ok(config)
    }

    pub fn with_epsilon(mut self, epsilon: F) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_step_rule(mut self, rule: StepRule) -> Self {
        self.step_rule = rule;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > F::zero()) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidArgument("max_iter must be positive".into()));
        }
        if self.lambda_grid.iter().any(|l| !(*l >= F::zero()) || !l.is_finite()) {
            return Err(Error::InvalidArgument("penalty levels must be finite and >= 0".into()));
        }
        if self.lambda_grid.windows(2).any(|w| !(w[0] > w[1])) {
            return Err(Error::InvalidArgument("lambda grid must be strictly descending".into()));
        }
        Ok(())
    }
}

impl<F: Scalar> Default for FitConfig<F> {
    fn default() -> Self {
        Self {
            epsilon: F::of(1e-4),
            max_iter: 1000,
            lambda_grid: Vec::new(),
            step_rule: StepRule::FixedLipschitz,
        }
    }
}

/// Solution path over a penalty grid.
#[derive(Debug, Clone)]
pub struct FitResult<F> {
    pub kind: PenaltyKind,
    pub lambdas: Vec<F>,
    /// Coefficients (with recovered intercepts) per penalty level.
    pub coefficients: Vec<CoefficientTensor<F>>,
    /// Penalized objective summed over rows, per penalty level.
    pub objectives: Vec<F>,
    /// `iterations[l][i]`: FISTA iterations for row `i` at level `l`.
    pub iterations: Vec<Vec<usize>>,
    /// `converged[l][i]`: whether row `i` met the tolerance before `max_iter`.
    pub converged: Vec<Vec<bool>>,
    rows: Vec<Array2<F>>,
}

impl<F: Scalar> FitResult<F> {
    /// `k × kp` coefficient rows at level `l`.
    pub fn rows(&self, l: usize) -> ArrayView2<'_, F> {
        self.rows[l].view()
    }

    pub fn all_rows(&self) -> &[Array2<F>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.lambdas.len()
    }

    pub fn is_empty(&self) -> bool {
        self.lambdas.is_empty()
    }
}

/// Solution of one row problem.
#[derive(Debug, Clone)]
pub struct RowFit<F> {
    pub coef: Array1<F>,
    pub objective: F,
    pub iterations: usize,
    pub converged: bool,
}

/// `1/σ₁(Z)²`, with `σ₁(Z)²` the top eigenvalue of `ZZᵀ` (or of `ZᵀZ`,
/// whichever is smaller) from power iteration.
pub fn spectral_step<F: Scalar>(z: ArrayView2<F>) -> Result<F> {
    if z.iter().all(|v| *v == F::zero()) {
        return Err(Error::ZeroMatrix);
    }
    let gram = if z.nrows() <= z.ncols() { z.dot(&z.t()) } else { z.t().dot(&z) };
    let top = top_eigenvalue_psd(gram.view(), F::of(1e-10), 1000);
    if !(top > F::zero()) {
        return Err(Error::ZeroMatrix);
    }
    Ok(F::one() / top)
}

/// Smooth-part data shared by every row of one design.
struct Smooth<'a, F> {
    z: ArrayView2<'a, F>,
    gram: Option<Array2<F>>,
    step: F,
    z_fro2: F,
}

impl<'a, F: Scalar> Smooth<'a, F> {
    fn new(z: ArrayView2<'a, F>) -> Result<Self> {
        let step = spectral_step(z)?;
        // the Gram form is cheaper per iteration only when kp <= T
        let gram = (z.nrows() <= z.ncols()).then(|| z.dot(&z.t()));
        let z_fro2 = z.iter().map(|v| *v * *v).sum();
        Ok(Self { z, gram, step, z_fro2 })
    }

    fn initial_backtracking_step(&self) -> F {
        F::of_usize(self.z.nrows().min(self.z.ncols())) / self.z_fro2
    }

    fn residual(&self, y: ArrayView1<F>, b: ArrayView1<F>) -> Array1<F> {
        &y - &b.dot(&self.z)
    }

    fn loss(&self, y: ArrayView1<F>, b: ArrayView1<F>) -> F {
        let r = self.residual(y, b);
        F::of(0.5) * r.dot(&r)
    }

    /// Gradient of `½‖y − bZ‖²`, i.e. `−(y − bZ)Zᵀ`; `yzt = y Zᵀ`.
    fn gradient(&self, y: ArrayView1<F>, yzt: ArrayView1<F>, b: ArrayView1<F>) -> Array1<F> {
        match &self.gram {
            Some(g) => &b.dot(g) - &yzt,
            None => {
                let r = self.residual(y, b);
                -self.z.dot(&r)
            }
        }
    }
}

/// Prepared row problems for one centered design and penalty kind.
pub struct HvarProblem<'a, F> {
    design: &'a LagDesign<F>,
    kind: PenaltyKind,
    penalties: Vec<RowPenalty<F>>,
    smooth: Smooth<'a, F>,
    yzt: Array2<F>,
}

impl<'a, F: Scalar> HvarProblem<'a, F> {
    /// `design` must be centered.
    pub fn new(design: &'a LagDesign<F>, kind: PenaltyKind) -> Result<Self> {
        if !design.is_centered() {
            return Err(Error::InvalidArgument("penalized fits need a centered design".into()));
        }
        let (k, p) = (design.k(), design.p());
        let penalties = (0..k)
            .map(|i| RowPenalty::for_kind(kind, i, k, p))
            .collect::<Result<Vec<_>>>()?;
        let smooth = Smooth::new(design.z())?;
        let yzt = design.y().dot(&design.z().t());
        Ok(Self { design, kind, penalties, smooth, yzt })
    }

    pub fn step(&self) -> F {
        self.smooth.step
    }

    pub fn kind(&self) -> PenaltyKind {
        self.kind
    }

    pub fn penalty(&self, i: usize) -> &RowPenalty<F> {
        &self.penalties[i]
    }

    /// `½‖Y_i − bZ‖² + λ Ω_i(b)`.
    pub fn row_objective(&self, i: usize, b: ArrayView1<F>, lambda: F) -> F {
        self.smooth.loss(self.design.y().row(i), b) + lambda * self.penalties[i].value(b)
    }

    /// Largest penalty level at which every row's solution is zero, up to a
    /// relative bisection tolerance of `1e-12` (rounded up by `1e-10`
    /// relative so the level tested is safely on the zero side).
    ///
    /// `b = 0` solves row `i` iff `prox_{λΩ_i}(Y_i Zᵀ) = 0`.
    pub fn lambda_max(&self) -> Result<F> {
        let upper = self
            .yzt
            .axis_iter(Axis(0))
            .map(|c| c.dot(&c).sqrt())
            .fold(F::zero(), F::max);
        if upper == F::zero() {
            return Err(Error::DegenerateDesign);
        }
        let all_zero = |lambda: F| -> bool {
            self.yzt.axis_iter(Axis(0)).zip(&self.penalties).all(|(c, pen)| {
                prox_row(c, lambda, pen)
                    .map(|v| v.iter().all(|x| *x == F::zero()))
                    .unwrap_or(false)
            })
        };
        let mut hi = upper;
        let mut grow = 0;
        while !all_zero(hi) {
            // only reachable through rounding at the analytic bound
            hi *= F::of(1.0 + 1e-8);
            grow += 1;
            if grow > 100 {
                return Err(Error::InvalidArgument("could not bracket lambda_max".into()));
            }
        }
        let mut lo = F::zero();
        let tol = F::of(1e-12);
        for _ in 0..200 {
            if hi - lo <= tol * hi {
                break;
            }
            let mid = (lo + hi) * F::of(0.5);
            if all_zero(mid) {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        Ok(hi * F::of(1.0 + 1e-10))
    }

    /// FISTA on row `i` from `start`.
    pub fn fit_row(&self, i: usize, lambda: F, config: &FitConfig<F>, start: ArrayView1<F>) -> Result<RowFit<F>> {
        let y = self.design.y().index_axis_move(Axis(0), i);
        let yzt = self.yzt.row(i);
        let penalty = &self.penalties[i];
        let dim = penalty.dim();
        if start.len() != dim {
            return Err(Error::Dimension(format!("warm start of length {} for row of length {dim}", start.len())));
        }
        let smooth = &self.smooth;
        let objective = |b: ArrayView1<F>| smooth.loss(y, b) + lambda * penalty.value(b);

        let mut scratch = Vec::new();
        let mut prev = start.to_owned();
        let mut cur = start.to_owned();
        let mut step = match config.step_rule {
            StepRule::FixedLipschitz => smooth.step,
            StepRule::Backtracking => smooth.initial_backtracking_step(),
        };
        let mut iterations = 0;
        let mut converged = false;
        for m in 1..=config.max_iter {
            iterations = m;
            let momentum = (F::of_usize(m) - F::of(2.0)) / (F::of_usize(m) + F::one());
            let b_hat = &cur + &((&cur - &prev) * momentum);
            let grad = smooth.gradient(y, yzt, b_hat.view());
            let next = match config.step_rule {
                StepRule::FixedLipschitz => {
                    proximal_step(&b_hat, &grad, step, lambda, penalty, &mut scratch)
                }
                StepRule::Backtracking => {
                    let f_hat = smooth.loss(y, b_hat.view());
                    let mut halvings = 0;
                    loop {
                        let cand = proximal_step(&b_hat, &grad, step, lambda, penalty, &mut scratch);
                        let d = &cand - &b_hat;
                        let model = f_hat + grad.dot(&d) + d.dot(&d) / (F::of(2.0) * step);
                        let f_cand = smooth.loss(y, cand.view());
                        let slack = F::of(1e-12) * f_hat.abs().max(F::one());
                        if f_cand <= model + slack || halvings >= 60 {
                            break cand;
                        }
                        step *= F::of(0.5);
                        halvings += 1;
                    }
                }
            };
            if next.iter().any(|v| !v.is_finite()) {
                return Err(Error::Diverged { row: i, lambda: lambda.to_f64().unwrap_or(f64::NAN) });
            }
            let change = b_hat
                .iter()
                .zip(next.iter())
                .fold(F::zero(), |acc, (a, b)| acc.max((*a - *b).abs()));
            prev = std::mem::replace(&mut cur, next);
            if change <= config.epsilon {
                converged = true;
                break;
            }
        }

        let mut value = objective(cur.view());
        if !value.is_finite() {
            return Err(Error::Diverged { row: i, lambda: lambda.to_f64().unwrap_or(f64::NAN) });
        }
        // accelerated iterates are not monotone; never return worse than the start
        let start_value = objective(start);
        if start_value < value {
            cur = start.to_owned();
            value = start_value;
        }
        Ok(RowFit { coef: cur, objective: value, iterations, converged })
    }

    /// Fits the whole grid. Each row runs down the grid warm-started from its
    /// previous solution; with `warm` given, level `l` instead starts from
    /// `warm[l]`. Rows run in parallel and the result does not depend on the
    /// number of threads.
    pub fn fit_path(&self, config: &FitConfig<F>, warm: Option<&[Array2<F>]>) -> Result<FitResult<F>> {
        config.validate()?;
        let (k, p) = (self.design.k(), self.design.p());
        let n = config.lambda_grid.len();
        if let Some(w) = warm {
            if w.len() != n || w.iter().any(|m| m.dim() != (k, k * p)) {
                return Err(Error::Dimension("warm starts do not match the grid".into()));
            }
        }
        let per_row: Vec<Vec<RowFit<F>>> = (0..k)
            .into_par_iter()
            .map(|i| {
                let mut fits: Vec<RowFit<F>> = Vec::with_capacity(n);
                let mut start = Array1::zeros(k * p);
                for (l, &lambda) in config.lambda_grid.iter().enumerate() {
                    if let Some(w) = warm {
                        start = w[l].row(i).to_owned();
                    }
                    let fit = self.fit_row(i, lambda, config, start.view())?;
                    start = fit.coef.clone();
                    fits.push(fit);
                }
                Ok(fits)
            })
            .collect::<Result<_>>()?;

        let mut rows = Vec::with_capacity(n);
        let mut coefficients = Vec::with_capacity(n);
        let mut objectives = Vec::with_capacity(n);
        let mut iterations = Vec::with_capacity(n);
        let mut converged = Vec::with_capacity(n);
        for l in 0..n {
            let mut m = Array2::zeros((k, k * p));
            for (i, fits) in per_row.iter().enumerate() {
                m.row_mut(i).assign(&fits[l].coef);
            }
            let nu = recover_intercept(m.view(), self.design)?;
            coefficients.push(CoefficientTensor::from_rows(m.view(), nu)?);
            rows.push(m);
            objectives.push(per_row.iter().map(|f| f[l].objective).sum());
            iterations.push(per_row.iter().map(|f| f[l].iterations).collect());
            converged.push(per_row.iter().map(|f| f[l].converged).collect());
        }
        Ok(FitResult {
            kind: self.kind,
            lambdas: config.lambda_grid.clone(),
            coefficients,
            objectives,
            iterations,
            converged,
            rows,
        })
    }
}

fn proximal_step<F: Scalar>(
    b_hat: &Array1<F>,
    grad: &Array1<F>,
    step: F,
    lambda: F,
    penalty: &RowPenalty<F>,
    scratch: &mut Vec<F>,
) -> Array1<F> {
    let mut v = b_hat - &(grad * step);
    prox_row_in_place(v.as_slice_mut().expect("contiguous"), step * lambda, penalty, scratch);
    v
}

/// Fits one row problem `½‖y − bZ‖² + λ Ω(b)` from a zero start. `z` should
/// be centered together with `y`.
pub fn fit_row<F: Scalar>(
    y: ArrayView1<F>,
    z: ArrayView2<F>,
    lambda: F,
    penalty: &RowPenalty<F>,
    config: &FitConfig<F>,
) -> Result<Array1<F>> {
    if y.len() != z.ncols() || z.nrows() != penalty.dim() {
        return Err(Error::Dimension(format!(
            "response of length {} with regressors {}x{} and a penalty on {}",
            y.len(),
            z.nrows(),
            z.ncols(),
            penalty.dim()
        )));
    }
    // a one-row problem is a design whose single response row is `y`
    let design = LagDesign::from_parts(y.insert_axis(Axis(0)).to_owned(), z.to_owned(), z.nrows())?;
    let kind = penalty.kind();
    let problem = HvarProblem {
        design: &design,
        kind,
        penalties: vec![penalty.clone()],
        smooth: Smooth::new(design.z())?,
        yzt: design.y().dot(&design.z().t()),
    };
    Ok(problem.fit_row(0, lambda, config, Array1::zeros(penalty.dim()).view())?.coef)
}

/// Fits `kind` over `config.lambda_grid`. An uncentered design is centered
/// first; intercepts are recovered from the removed means.
pub fn fit<F: Scalar>(design: &LagDesign<F>, kind: PenaltyKind, config: &FitConfig<F>) -> Result<FitResult<F>> {
    let centered = design.center();
    HvarProblem::new(&centered, kind)?.fit_path(config, None)
}

/// `n_lambda` log-spaced levels from `λ_max` down to `ratio · λ_max`.
pub fn lambda_grid<F: Scalar>(design: &LagDesign<F>, kind: PenaltyKind, n_lambda: usize, ratio: F) -> Result<Vec<F>> {
    if n_lambda == 0 {
        return Err(Error::InvalidArgument("n_lambda must be positive".into()));
    }
    if !(ratio > F::zero() && ratio < F::one()) {
        return Err(Error::InvalidArgument("lambda ratio must lie in (0, 1)".into()));
    }
    let centered = design.center();
    let lambda_max = HvarProblem::new(&centered, kind)?.lambda_max()?;
    Ok(log_grid(lambda_max, n_lambda, ratio))
}

pub(crate) fn log_grid<F: Scalar>(top: F, n: usize, ratio: F) -> Vec<F> {
    if n == 1 {
        return vec![top];
    }
    let (ln_top, ln_ratio) = (top.ln(), ratio.ln());
    (0..n)
        .map(|j| {
            if j == 0 {
                top
            } else {
                (ln_top + ln_ratio * F::of_usize(j) / F::of_usize(n - 1)).exp()
            }
        })
        .collect()
}
