//! Rolling one-step-ahead forecast evaluation.
//!
//! Time is indexed by panel column. A forecast *targeting* column `t` is
//! made at origin `t`, i.e. after observing columns `0..t`; models are refit
//! on exactly those columns (expanding window). Windows list target columns,
//! inclusive at both ends.

use std::fmt;
use std::str::FromStr;

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{
    forecast_random_walk, forecast_sample_mean, least_squares_var, random_walk_tensor, ridge_refit, select_lag_aic,
    BaselineKind,
};
use crate::penalty::PenaltyKind;
use crate::series::{maxlag_of, CoefficientTensor, LagDesign, MaxlagMatrix, ScaleRecord, TimeSeriesPanel};
use crate::simulation::{simulate, ScenarioSpec};
use crate::solver::{lambda_grid, FitConfig, HvarProblem};
use crate::{Error, Result, Scalar};

/// Method names accepted by [`Method::from_str`].
pub const METHOD_NAMES: &[&str] = &[
    "hvar-c", "hvar-o", "hvar-e", "lasso", "lwlasso", "lwlasso:<alpha>", "ls", "ls:<lag>", "ls-aic", "mean", "rw",
];

/// The method rows of the forecast comparison tables.
pub const TABLE_METHODS: &[&str] = &["hvar-c", "hvar-o", "hvar-e", "lasso", "lwlasso", "ls", "mean", "rw"];

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Method {
    /// A penalized VAR with λ tuned by rolling cross-validation.
    Penalized { kind: PenaltyKind },
    /// Lag-weighted lasso with both α and λ tuned.
    TunedLagWeightedLasso,
    Baseline { kind: BaselineKind },
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Penalized { kind } => write!(f, "{kind}"),
            Self::TunedLagWeightedLasso => write!(f, "lwlasso"),
            Self::Baseline { kind } => write!(f, "{kind}"),
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        let baseline = |kind| Ok(Self::Baseline { kind });
        match s {
            "lwlasso" => Ok(Self::TunedLagWeightedLasso),
            "ls" => baseline(BaselineKind::LeastSquaresVar { lag: 1 }),
            "ls-aic" => baseline(BaselineKind::AicSelectedVar),
            "mean" => baseline(BaselineKind::SampleMean),
            "rw" => baseline(BaselineKind::RandomWalk),
            _ => {
                if let Some(lag) = s.strip_prefix("ls:") {
                    let lag = lag.parse().map_err(|_| Error::UnknownMethod(s.to_string()))?;
                    return baseline(BaselineKind::LeastSquaresVar { lag });
                }
                Ok(Self::Penalized { kind: s.parse()? })
            }
        }
    }
}

/// Parses a comma-separated method list.
pub fn parse_methods(list: &str) -> Result<Vec<Method>> {
    let methods: Vec<Method> = list.split(',').filter(|s| !s.trim().is_empty()).map(str::parse).collect::<Result<_>>()?;
    if methods.is_empty() {
        return Err(Error::Empty("method list"));
    }
    Ok(methods)
}

/// Tuning and evaluation target columns (inclusive).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct EvaluationWindows {
    pub tune_start: usize,
    pub tune_end: usize,
    pub eval_start: usize,
    pub eval_end: usize,
}

impl EvaluationWindows {
    /// Checks `p + 2 ≤ tune_start ≤ tune_end < eval_start ≤ eval_end < total_length`;
    /// the lower bound leaves at least two observations for the first fit.
    pub fn new(
        tune_start: usize,
        tune_end: usize,
        eval_start: usize,
        eval_end: usize,
        p: usize,
        total_length: usize,
    ) -> Result<Self> {
        let w = Self { tune_start, tune_end, eval_start, eval_end };
        if tune_start < p + 2 {
            return Err(Error::Windows(format!(
                "tuning starts at column {tune_start}; with p = {p} the first fit needs it to be at least {}",
                p + 2
            )));
        }
        if !(tune_start <= tune_end && tune_end < eval_start && eval_start <= eval_end) {
            return Err(Error::Windows(format!("windows out of order: {w:?}")));
        }
        if eval_end >= total_length {
            return Err(Error::Windows(format!(
                "evaluation ends at column {eval_end} of a panel with {total_length} columns"
            )));
        }
        Ok(w)
    }

    /// The last `eval_frac` of the columns for evaluation and the `tune_frac`
    /// before them for tuning (both rounded to whole columns).
    pub fn from_fractions(total_length: usize, p: usize, tune_frac: f64, eval_frac: f64) -> Result<Self> {
        let ok = |f: f64| f > 0.0 && f < 1.0;
        if !ok(tune_frac) || !ok(eval_frac) || tune_frac + eval_frac >= 1.0 {
            return Err(Error::Windows(format!("fractions {tune_frac} and {eval_frac} must be in (0, 1) with sum < 1")));
        }
        let n = total_length as f64;
        let eval_len = ((eval_frac * n).round() as usize).max(1);
        let tune_len = ((tune_frac * n).round() as usize).max(1);
        if eval_len + tune_len >= total_length {
            return Err(Error::Windows(format!("panel of length {total_length} is too short to split")));
        }
        let eval_start = total_length - eval_len;
        let tune_start = eval_start - tune_len;
        Self::new(tune_start, eval_start - 1, eval_start, total_length - 1, p, total_length)
    }

    pub fn tune_len(&self) -> usize {
        self.tune_end - self.tune_start + 1
    }

    pub fn eval_len(&self) -> usize {
        self.eval_end - self.eval_start + 1
    }
}

/// Options shared by cross-validation and suite evaluation.
#[derive(Debug, Clone)]
pub struct EvalConfig<F> {
    /// Maximal lag order of the penalized models (and of the AIC search).
    pub p: usize,
    /// Solver settings; its grid is replaced per method.
    pub fit: FitConfig<F>,
    pub n_lambda: usize,
    pub lambda_ratio: F,
    /// Refit every this many origins, forecasting with the latest fit between.
    pub refit_every: usize,
    pub one_se_rule: bool,
    /// Cross-validate and forecast with a ridge refit of the selected support.
    pub relaxed_ridge: bool,
    /// Ridge penalty per training observation: `ρ = ridge_scale · T`.
    pub ridge_scale: F,
    pub alpha_grid: Vec<f64>,
    /// Standardize inside every training window (no look-ahead in the scale
    /// statistics); forecasts are mapped back to raw units.
    pub strict_standardize: bool,
}

impl<F: Scalar> EvalConfig<F> {
    pub fn new(p: usize) -> Self {
        Self {
            p,
            fit: FitConfig::default(),
            n_lambda: 25,
            lambda_ratio: F::of(1e-4),
            refit_every: 1,
            one_se_rule: false,
            relaxed_ridge: false,
            ridge_scale: F::of(1e-2),
            alpha_grid: vec![0.0, 0.25, 0.5, 0.75, 1.0],
            strict_standardize: false,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::InvalidArgument("p must be positive".into()));
        }
        if self.n_lambda == 0 {
            return Err(Error::InvalidArgument("n_lambda must be positive".into()));
        }
        if !(self.lambda_ratio > F::zero() && self.lambda_ratio < F::one()) {
            return Err(Error::InvalidArgument("lambda ratio must lie in (0, 1)".into()));
        }
        if self.refit_every == 0 {
            return Err(Error::InvalidArgument("refit_every must be positive".into()));
        }
        if !(self.ridge_scale > F::zero()) || !self.ridge_scale.is_finite() {
            return Err(Error::InvalidArgument("ridge scale must be positive".into()));
        }
        if self.alpha_grid.is_empty() || self.alpha_grid.iter().any(|a| !(0.0..=1.0).contains(a)) {
            return Err(Error::InvalidArgument("alpha grid must be non-empty within [0, 1]".into()));
        }
        if !(self.fit.epsilon > F::zero()) || self.fit.max_iter == 0 {
            return Err(Error::InvalidArgument("solver tolerance and iteration cap must be positive".into()));
        }
        Ok(())
    }
}

/// `ŷ_t = ν + Σ_ℓ B^(ℓ) y_{t−ℓ}` from the first `t` columns of `panel`.
pub fn one_step_forecast<F: Scalar>(model: &CoefficientTensor<F>, panel: &TimeSeriesPanel<F>, t: usize) -> Result<Array1<F>> {
    if model.k() != panel.k() {
        return Err(Error::Dimension(format!("model for k = {} on a panel with k = {}", model.k(), panel.k())));
    }
    let p = model.p();
    if t < p {
        return Err(Error::InsufficientHistory { needed: p, have: t });
    }
    if t > panel.total_length() {
        return Err(Error::InvalidArgument(format!("origin {t} beyond a panel of length {}", panel.total_length())));
    }
    let b = model.b();
    let mut out = model.nu().clone();
    for l in 1..=p {
        let y = panel.column(t - l);
        let bl = b.index_axis(Axis(2), l - 1);
        out += &bl.dot(&y);
    }
    Ok(out)
}

/// Per-origin mean squared error `(1/k) Σ_i (ŷ_it − y_it)²`.
pub fn squared_error_series<F: Scalar>(forecasts: ArrayView2<F>, actuals: ArrayView2<F>) -> Result<Vec<F>> {
    if forecasts.dim() != actuals.dim() {
        return Err(Error::Dimension(format!("forecasts {:?} vs actuals {:?}", forecasts.dim(), actuals.dim())));
    }
    if forecasts.is_empty() {
        return Err(Error::Empty("forecast range"));
    }
    let k = F::of_usize(forecasts.nrows());
    Ok(forecasts
        .axis_iter(Axis(1))
        .zip(actuals.axis_iter(Axis(1)))
        .map(|(f, a)| f.iter().zip(a.iter()).map(|(&x, &y)| (x - y) * (x - y)).sum::<F>() / k)
        .collect())
}

/// Mean squared forecast error over aligned `k × n` forecasts and actuals.
pub fn msfe<F: Scalar>(forecasts: ArrayView2<F>, actuals: ArrayView2<F>) -> Result<F> {
    let series = squared_error_series(forecasts, actuals)?;
    Ok(mean(&series))
}

fn mean<F: Scalar>(v: &[F]) -> F {
    v.iter().copied().sum::<F>() / F::of_usize(v.len())
}

/// Sample standard deviation over `√n`; zero for fewer than two values.
pub fn standard_error<F: Scalar>(v: &[F]) -> F {
    let n = v.len();
    if n < 2 {
        return F::zero();
    }
    let m = mean(v);
    let ss: F = v.iter().map(|&x| (x - m) * (x - m)).sum();
    (ss / F::of_usize(n - 1)).sqrt() / F::of_usize(n).sqrt()
}

/// Index of the smallest value; ties go to the earliest (largest λ).
pub fn argmin<F: Scalar>(values: &[F]) -> Option<usize> {
    let mut best: Option<usize> = None;
    for (j, &v) in values.iter().enumerate() {
        if best.is_none_or(|b| v < values[b]) {
            best = Some(j);
        }
    }
    best
}

/// Largest-λ index whose MSFE is within one standard error of the best.
/// `msfe` is ordered by descending λ and `errors[j]` is candidate `j`'s
/// per-origin error series.
pub fn one_se_rule<F: Scalar>(msfe: &[F], errors: &[Vec<F>]) -> Result<usize> {
    let best = argmin(msfe).ok_or(Error::Empty("lambda grid"))?;
    if errors.len() != msfe.len() {
        return Err(Error::Dimension("one error series per candidate needed".into()));
    }
    let bound = msfe[best] + standard_error(&errors[best]);
    Ok(msfe.iter().position(|&m| m <= bound).unwrap_or(best))
}

/// `‖L̂ − L‖₁ / ‖L‖₁`.
pub fn lag_selection_score(l_hat: &MaxlagMatrix, l_true: &MaxlagMatrix) -> Result<f64> {
    let norm = l_true.l1_norm();
    if norm == 0 {
        return Err(Error::InvalidArgument("true maxlag matrix is zero".into()));
    }
    Ok(l_hat.l1_distance(l_true)? as f64 / norm as f64)
}

/// Cross-validation record for one penalty over its λ grid.
#[derive(Debug, Clone, Serialize)]
pub struct CvCurve<F> {
    pub kind: PenaltyKind,
    pub lambdas: Vec<F>,
    pub msfe: Vec<F>,
    pub se: Vec<F>,
    /// `errors[j][o]`: mean squared error of candidate `j` at origin `o`.
    #[serde(skip)]
    pub errors: Vec<Vec<F>>,
    pub argmin: usize,
    pub chosen: usize,
}

impl<F: Scalar> CvCurve<F> {
    pub fn chosen_lambda(&self) -> F {
        self.lambdas[self.chosen]
    }
}

struct Origin<F> {
    input: TimeSeriesPanel<F>,
    record: Option<ScaleRecord<F>>,
}

fn training_view<F: Scalar>(panel: &TimeSeriesPanel<F>, t: usize, strict: bool) -> Result<Origin<F>> {
    let prefix = panel.prefix(t)?;
    if strict {
        let (std, record) = prefix.standardize()?;
        Ok(Origin { input: std, record: Some(record) })
    } else {
        Ok(Origin { input: prefix, record: None })
    }
}

/// λ grid from the first tuning window's design.
pub fn tuning_grid<F: Scalar>(
    panel: &TimeSeriesPanel<F>,
    kind: PenaltyKind,
    windows: &EvaluationWindows,
    config: &EvalConfig<F>,
) -> Result<Vec<F>> {
    let origin = training_view(panel, windows.tune_start, config.strict_standardize)?;
    let design = LagDesign::build(&origin.input, config.p)?;
    lambda_grid(&design, kind, config.n_lambda, config.lambda_ratio)
}

/// Rolls `kind` over the targets `first..=last`, returning per-λ
/// per-origin errors. Fits at consecutive origins are warm-started.
fn roll_penalized<F: Scalar>(
    panel: &TimeSeriesPanel<F>,
    kind: PenaltyKind,
    grid: &[F],
    first: usize,
    last: usize,
    config: &EvalConfig<F>,
) -> Result<Vec<Vec<F>>> {
    if grid.is_empty() {
        return Err(Error::Empty("lambda grid"));
    }
    let mut fit_config = config.fit.clone();
    fit_config.lambda_grid = grid.to_vec();
    fit_config.validate()?;
    let n = grid.len();
    let mut errors = vec![Vec::with_capacity(last + 1 - first); n];
    let mut warm: Option<Vec<Array2<F>>> = None;
    let mut models: Vec<CoefficientTensor<F>> = Vec::new();
    let mut record: Option<ScaleRecord<F>> = None;

    for t in first..=last {
        let refit = (t - first).is_multiple_of(config.refit_every);
        if refit {
            let origin = training_view(panel, t, config.strict_standardize)?;
            let design = LagDesign::build(&origin.input, config.p)?.center();
            let problem = HvarProblem::new(&design, kind)?;
            let path = problem.fit_path(&fit_config, warm.as_deref())?;
            models = if config.relaxed_ridge {
                let ridge = config.ridge_scale * F::of_usize(design.n_obs());
                path.coefficients
                    .iter()
                    .map(|c| ridge_refit(&design, c.support().view(), ridge))
                    .collect::<Result<_>>()?
            } else {
                path.coefficients.clone()
            };
            warm = Some(path.all_rows().to_vec());
            record = origin.record;
        }
        let input = match &record {
            Some(r) => TimeSeriesPanel::new(r.apply(panel.prefix(t)?.values()))?,
            None => panel.prefix(t)?,
        };
        let actual = panel.column(t);
        for (l, model) in models.iter().enumerate() {
            let mut f = one_step_forecast(model, &input, t)?;
            if let Some(r) = &record {
                f = r.invert_vector(f.view());
            }
            let k = F::of_usize(f.len());
            errors[l].push(f.iter().zip(actual.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum::<F>() / k);
        }
    }
    Ok(errors)
}

/// Expanding-window cross-validation of `kind` over `grid` (descending) on the
/// tuning window.
pub fn rolling_cv<F: Scalar>(
    panel: &TimeSeriesPanel<F>,
    kind: PenaltyKind,
    grid: &[F],
    windows: &EvaluationWindows,
    config: &EvalConfig<F>,
) -> Result<CvCurve<F>> {
    config.validate()?;
    let errors = roll_penalized(panel, kind, grid, windows.tune_start, windows.tune_end, config)?;
    let msfe: Vec<F> = errors.iter().map(|e| mean(e)).collect();
    let se: Vec<F> = errors.iter().map(|e| standard_error(e)).collect();
    let best = argmin(&msfe).ok_or(Error::Empty("lambda grid"))?;
    let chosen = if config.one_se_rule { one_se_rule(&msfe, &errors)? } else { best };
    Ok(CvCurve { kind, lambdas: grid.to_vec(), msfe, se, errors, argmin: best, chosen })
}

/// Evaluation of one method on one panel.
#[derive(Debug, Clone, Serialize)]
pub struct ForecastReport<F> {
    pub method: String,
    pub msfe: F,
    /// Standard error across forecast origins.
    pub msfe_se: F,
    /// Mean squared error at each evaluation origin.
    pub squared_errors: Vec<F>,
    pub lambda: Option<F>,
    pub lambda_index: Option<usize>,
    pub alpha: Option<f64>,
    /// Maxlag matrix of the method fit on the whole panel.
    pub l_hat: Option<MaxlagMatrix>,
    pub lag_score: Option<f64>,
    pub refit_every: usize,
    pub curves: Vec<CvCurve<F>>,
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodOutcome<F> {
    pub method: String,
    pub report: Option<ForecastReport<F>>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, Serialize)]
pub struct SuiteReport<F> {
    pub windows: EvaluationWindows,
    pub outcomes: Vec<MethodOutcome<F>>,
}

impl<F: Scalar> SuiteReport<F> {
    pub fn get(&self, method: &str) -> Option<&ForecastReport<F>> {
        self.outcomes.iter().find(|o| o.method == method).and_then(|o| o.report.as_ref())
    }
}

/// Tunes (where applicable), forecasts over the evaluation window and, given
/// the true maxlags, scores lag selection. Failing methods are recorded and
/// the rest continue. Methods run in parallel; output order follows `methods`.
pub fn evaluate_suite<F: Scalar + Serialize>(
    panel: &TimeSeriesPanel<F>,
    methods: &[Method],
    windows: &EvaluationWindows,
    config: &EvalConfig<F>,
    truth: Option<&MaxlagMatrix>,
) -> Result<SuiteReport<F>> {
    config.validate()?;
    EvaluationWindows::new(
        windows.tune_start,
        windows.tune_end,
        windows.eval_start,
        windows.eval_end,
        config.p,
        panel.total_length(),
    )?;
    let outcomes = methods
        .par_iter()
        .map(|m| {
            let name = m.to_string();
            match evaluate_method(panel, *m, windows, config, truth) {
                Ok(report) => MethodOutcome { method: name, report: Some(report), error: None },
                Err(e) => MethodOutcome { method: name, report: None, error: Some(e.to_string()) },
            }
        })
        .collect();
    Ok(SuiteReport { windows: *windows, outcomes })
}

/// Evaluates a single method; see [`evaluate_suite`].
pub fn evaluate_method<F: Scalar>(
    panel: &TimeSeriesPanel<F>,
    method: Method,
    windows: &EvaluationWindows,
    config: &EvalConfig<F>,
    truth: Option<&MaxlagMatrix>,
) -> Result<ForecastReport<F>> {
    let name = method.to_string();
    let (squared_errors, lambda, lambda_index, alpha, l_hat, curves) = match method {
        Method::Penalized { kind } => {
            let grid = tuning_grid(panel, kind, windows, config)?;
            let curve = rolling_cv(panel, kind, &grid, windows, config)?;
            let (errors, l_hat) = penalized_evaluation(panel, kind, &curve, windows, config)?;
            (errors, Some(curve.chosen_lambda()), Some(curve.chosen), None, l_hat, vec![curve])
        }
        Method::TunedLagWeightedLasso => {
            let curves = config
                .alpha_grid
                .iter()
                .map(|&alpha| {
                    let kind = PenaltyKind::LagWeightedLasso { alpha };
                    let grid = tuning_grid(panel, kind, windows, config)?;
                    rolling_cv(panel, kind, &grid, windows, config)
                })
                .collect::<Result<Vec<_>>>()?;
            let scores: Vec<F> = curves.iter().map(|c| c.msfe[c.argmin]).collect();
            let best = argmin(&scores).ok_or(Error::Empty("alpha grid"))?;
            let curve = &curves[best];
            let (errors, l_hat) = penalized_evaluation(panel, curve.kind, curve, windows, config)?;
            let alpha = config.alpha_grid[best];
            (errors, Some(curve.chosen_lambda()), Some(curve.chosen), Some(alpha), l_hat, curves)
        }
        Method::Baseline { kind } => {
            let (errors, l_hat) = baseline_evaluation(panel, kind, windows, config)?;
            (errors, None, None, None, l_hat, Vec::new())
        }
    };
    let lag_score = match truth {
        Some(t) => Some(lag_selection_score(&l_hat, t)?),
        None => None,
    };
    Ok(ForecastReport {
        method: name,
        msfe: mean(&squared_errors),
        msfe_se: standard_error(&squared_errors),
        squared_errors,
        lambda,
        lambda_index,
        alpha,
        l_hat: Some(l_hat),
        lag_score,
        refit_every: config.refit_every,
        curves,
    })
}

fn penalized_evaluation<F: Scalar>(
    panel: &TimeSeriesPanel<F>,
    kind: PenaltyKind,
    curve: &CvCurve<F>,
    windows: &EvaluationWindows,
    config: &EvalConfig<F>,
) -> Result<(Vec<F>, MaxlagMatrix)> {
    let lambda = curve.chosen_lambda();
    let mut errors = roll_penalized(panel, kind, &[lambda], windows.eval_start, windows.eval_end, config)?;
    let l_hat = penalized_maxlag(panel, kind, &curve.lambdas[..=curve.chosen], config)?;
    Ok((errors.remove(0), l_hat))
}

/// Maxlag matrix of a fit on the whole panel, run down `path` so the last
/// level is warm-started.
fn penalized_maxlag<F: Scalar>(
    panel: &TimeSeriesPanel<F>,
    kind: PenaltyKind,
    path: &[F],
    config: &EvalConfig<F>,
) -> Result<MaxlagMatrix> {
    let origin = training_view(panel, panel.total_length(), config.strict_standardize)?;
    let design = LagDesign::build(&origin.input, config.p)?.center();
    let mut fit_config = config.fit.clone();
    fit_config.lambda_grid = path.to_vec();
    let fit = HvarProblem::new(&design, kind)?.fit_path(&fit_config, None)?;
    let last = fit.coefficients.last().ok_or(Error::Empty("lambda path"))?;
    Ok(maxlag_of(last, F::zero()))
}

fn baseline_evaluation<F: Scalar>(
    panel: &TimeSeriesPanel<F>,
    kind: BaselineKind,
    windows: &EvaluationWindows,
    config: &EvalConfig<F>,
) -> Result<(Vec<F>, MaxlagMatrix)> {
    let (k, p) = (panel.k(), config.p);
    let fit_ls = |data: &TimeSeriesPanel<F>| -> Result<CoefficientTensor<F>> {
        match kind {
            BaselineKind::LeastSquaresVar { lag } => least_squares_var(data, lag, lag.max(1)),
            BaselineKind::AicSelectedVar => Ok(select_lag_aic(data, p)?.tensor),
            _ => unreachable!("only least-squares baselines are refit"),
        }
    };
    let mut errors = Vec::with_capacity(windows.eval_len());
    let mut model: Option<CoefficientTensor<F>> = None;
    for t in windows.eval_start..=windows.eval_end {
        let forecast = match kind {
            BaselineKind::SampleMean => forecast_sample_mean(panel, t)?,
            BaselineKind::RandomWalk => forecast_random_walk(panel, t)?,
            _ => {
                if (t - windows.eval_start).is_multiple_of(config.refit_every) {
                    model = Some(fit_ls(&panel.prefix(t)?)?);
                }
                one_step_forecast(model.as_ref().expect("fit at the first origin"), panel, t)?
            }
        };
        let actual = panel.column(t);
        let kf = F::of_usize(k);
        errors.push(forecast.iter().zip(actual.iter()).map(|(&a, &b)| (a - b) * (a - b)).sum::<F>() / kf);
    }
    let l_hat = match kind {
        BaselineKind::SampleMean => MaxlagMatrix::zeros(k, p),
        BaselineKind::RandomWalk => maxlag_of(&random_walk_tensor::<F>(k, p), F::zero()),
        _ => {
            let full = fit_ls(panel)?;
            let lags = maxlag_of(&full, F::zero());
            MaxlagMatrix::new(lags.as_array().clone(), p.max(lags.p()))?
        }
    };
    Ok((errors, l_hat))
}

/// Cross-replicate summary of one method.
#[derive(Debug, Clone, Serialize)]
pub struct AggregateRow {
    pub method: String,
    pub replicates: usize,
    pub failures: usize,
    pub msfe_mean: f64,
    pub msfe_se: f64,
    pub lag_score_mean: Option<f64>,
    pub lag_score_se: Option<f64>,
}

/// Means and standard errors across replicate reports, in method order of
/// the first report.
pub fn aggregate_replicates<F: Scalar>(reports: &[SuiteReport<F>]) -> Vec<AggregateRow> {
    let Some(first) = reports.first() else {
        return Vec::new();
    };
    first
        .outcomes
        .iter()
        .map(|o| {
            let found: Vec<&ForecastReport<F>> = reports.iter().filter_map(|r| r.get(&o.method)).collect();
            let msfe: Vec<f64> = found.iter().map(|r| r.msfe.to_f64().unwrap_or(f64::NAN)).collect();
            let scores: Vec<f64> = found.iter().filter_map(|r| r.lag_score).collect();
            let has_scores = !scores.is_empty() && scores.len() == found.len();
            AggregateRow {
                method: o.method.clone(),
                replicates: found.len(),
                failures: reports.len() - found.len(),
                msfe_mean: if msfe.is_empty() { f64::NAN } else { mean(&msfe) },
                msfe_se: standard_error(&msfe),
                lag_score_mean: has_scores.then(|| mean(&scores)),
                lag_score_se: has_scores.then(|| standard_error(&scores)),
            }
        })
        .collect()
}

/// One replicate of a simulation study.
#[derive(Debug, Clone, Serialize)]
pub struct Replicate {
    pub seed: u64,
    pub report: SuiteReport<f64>,
}

/// Simulates `spec` under each seed and evaluates `methods`, with windows
/// taken as fractions of the simulated length. Replicates run in parallel and
/// come back in seed order.
pub fn run_replicates(
    spec: &ScenarioSpec,
    seeds: &[u64],
    methods: &[Method],
    tune_frac: f64,
    eval_frac: f64,
    config: &EvalConfig<f64>,
) -> Result<Vec<Replicate>> {
    spec.validate()?;
    seeds
        .par_iter()
        .map(|&seed| {
            let data = simulate(&spec.with_seed(seed))?;
            let windows =
                EvaluationWindows::from_fractions(data.panel.total_length(), config.p, tune_frac, eval_frac)?;
            let truth = (data.true_l.l1_norm() > 0).then_some(&data.true_l);
            let report = evaluate_suite(&data.panel, methods, &windows, config, truth)?;
            Ok(Replicate { seed, report })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::{array, Array3};

    #[test]
    fn forecast_examples() {
        let panel = TimeSeriesPanel::new(array![[2.0, 4.0]]).unwrap();
        let model = CoefficientTensor::new(Array3::from_elem((1, 1, 1), 0.5), array![1.0]).unwrap();
        assert_eq!(one_step_forecast(&model, &panel, 2).unwrap(), array![3.0]);
        let zero = CoefficientTensor::new(Array3::zeros((1, 1, 1)), array![0.7]).unwrap();
        assert_eq!(one_step_forecast(&zero, &panel, 1).unwrap(), array![0.7]);
        assert!(matches!(one_step_forecast(&zero, &panel, 0), Err(Error::InsufficientHistory { .. })));
        let rw = random_walk_tensor::<f64>(1, 2);
        assert_eq!(one_step_forecast(&rw, &panel, 2).unwrap(), array![4.0]);
    }

    #[test]
    fn msfe_examples() {
        let a = array![[1.0, 2.0], [3.0, 4.0]];
        assert_eq!(msfe(a.view(), a.view()).unwrap(), 0.0);
        assert_eq!(msfe(array![[1.0, 1.0]].view(), array![[0.0, 2.0]].view()).unwrap(), 1.0);
        assert!(msfe(Array2::<f64>::zeros((1, 0)).view(), Array2::<f64>::zeros((1, 0)).view()).is_err());
    }

    #[test]
    fn one_se_examples() {
        let e = vec![vec![1.0, 1.0]; 3];
        assert_eq!(one_se_rule(&[1.0, 1.0, 1.0], &e).unwrap(), 0);
        assert_eq!(one_se_rule(&[3.0, 2.0, 1.0, 1.0], &vec![vec![1.0; 4]; 4]).unwrap(), 2);
        // best is index 2 with per-origin errors {0, 2}: SE = 1
        let errors = vec![vec![2.5, 2.5], vec![1.5, 1.5], vec![0.0, 2.0]];
        assert_eq!(one_se_rule(&[2.5, 1.5, 1.0], &errors).unwrap(), 1);
    }

    #[test]
    fn lag_score_examples() {
        let l = MaxlagMatrix::new(Array2::from_elem((2, 2), 2), 2).unwrap();
        let half = MaxlagMatrix::new(Array2::from_elem((2, 2), 1), 2).unwrap();
        assert_eq!(lag_selection_score(&half, &l).unwrap(), 0.5);
        assert_eq!(lag_selection_score(&l, &l).unwrap(), 0.0);
        assert_eq!(lag_selection_score(&MaxlagMatrix::zeros(2, 2), &l).unwrap(), 1.0);
        assert!(lag_selection_score(&l, &MaxlagMatrix::zeros(2, 2)).is_err());
    }

    #[test]
    fn windows_from_thirds() {
        let w = EvaluationWindows::from_fractions(106, 6, 1.0 / 3.0, 1.0 / 3.0).unwrap();
        assert_eq!(w, EvaluationWindows { tune_start: 36, tune_end: 70, eval_start: 71, eval_end: 105 });
        assert!(EvaluationWindows::new(3, 5, 6, 8, 2, 9).is_err());
        assert!(EvaluationWindows::new(4, 5, 6, 9, 2, 9).is_err());
        assert!(EvaluationWindows::new(4, 6, 6, 8, 2, 9).is_err());
        assert!(EvaluationWindows::new(4, 5, 6, 8, 2, 9).is_ok());
    }

    #[test]
    fn method_names_round_trip() {
        for name in TABLE_METHODS.iter().chain(["ls-aic", "ls:3", "lwlasso:0.5"].iter()) {
            let m: Method = name.parse().unwrap();
            assert_eq!(m.to_string(), *name);
        }
        assert!(matches!("bogus".parse::<Method>(), Err(Error::UnknownMethod(_))));
        assert!(parse_methods("mean,,rw").unwrap().len() == 2);
    }
}
