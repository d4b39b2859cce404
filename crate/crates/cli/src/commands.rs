use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use hvar::baselines::{least_squares_var, select_lag_aic, BaselineKind};
use hvar::evaluation::{
    aggregate_replicates, evaluate_suite, lag_selection_score, one_step_forecast, parse_methods, rolling_cv,
    run_replicates, tuning_grid, CvCurve, EvalConfig, EvaluationWindows, Method, METHOD_NAMES,
};
use hvar::io::{
    read_model, read_panel_file, read_sidecar, write_aggregate_table, write_coefficients, write_cv_curves, write_file,
    write_intercepts, write_json, write_maxlag, write_panel, write_suite_table, TruthSidecar,
};
use hvar::series::maxlag_of;
use hvar::simulation::{simulate as simulate_scenario, Scenario, ScenarioSpec};
use hvar::solver::{fit as fit_path, lambda_grid};
use hvar::{CoefficientTensor, FitConfig, LagDesign, MaxlagMatrix, PenaltyKind, ScaleRecord, TimeSeriesPanel};
use ndarray::Axis;
use rayon::prelude::*;
use serde::Serialize;

use crate::args::{CvArgs, DataArgs, EvaluateArgs, FitArgs, ForecastArgs, SimulateArgs, TuningArgs, WindowArgs};
use crate::CliError;

type Outcome = Result<(), CliError>;

fn usage(e: impl ToString) -> CliError {
    CliError::Usage(e.to_string())
}

/// Everything needed to rerun a command: the parsed flags, the thread
/// setting and the tool version. No clocks, so reruns compare equal.
#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    threads: Option<usize>,
    config: &'a T,
    outputs: Vec<String>,
}

struct Output {
    dir: PathBuf,
    written: Vec<String>,
}

impl Output {
    fn create(dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.written.push(name.to_string());
        self.dir.join(name)
    }

    fn finish<T: Serialize>(mut self, command: &'static str, threads: Option<usize>, config: &T) -> Outcome {
        let path = self.dir.join("manifest.json");
        self.written.sort();
        let manifest = Manifest {
            tool: "hvar",
            version: env!("CARGO_PKG_VERSION"),
            command,
            threads,
            config,
            outputs: std::mem::take(&mut self.written),
        };
        write_json(path, &manifest)?;
        Ok(())
    }
}

fn methods_from(list: &str) -> Result<Vec<Method>, CliError> {
    parse_methods(list).map_err(|e| match e {
        hvar::Error::UnknownMethod(m) => {
            CliError::Usage(format!("unknown method `{m}`; valid names: {}", METHOD_NAMES.join(", ")))
        }
        other => usage(other),
    })
}

fn floats(list: &str, what: &str) -> Result<Vec<f64>, CliError> {
    list.split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<f64>().map_err(|_| CliError::Usage(format!("`{s}` in {what} is not a number"))))
        .collect()
}

fn seeds_from(spec: &str) -> Result<Vec<u64>, CliError> {
    let bad = || CliError::Usage(format!("seeds `{spec}` must be `a..b` or a comma-separated list"));
    let seeds: Vec<u64> = if let Some((a, b)) = spec.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        (a..b).collect()
    } else {
        spec.split(',').map(|s| s.trim().parse().map_err(|_| bad())).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(bad());
    }
    Ok(seeds)
}

fn load(data: &DataArgs) -> Result<(TimeSeriesPanel<f64>, Option<ScaleRecord<f64>>), CliError> {
    let panel = read_panel_file::<f64>(&data.input)?;
    if data.standardize {
        let (std, record) = panel.standardize()?;
        Ok((std, Some(record)))
    } else {
        Ok((panel, None))
    }
}

fn eval_config(t: &TuningArgs) -> Result<EvalConfig<f64>, CliError> {
    let mut c = EvalConfig::new(t.p);
    c.fit = c.fit.with_epsilon(t.grid.epsilon).with_max_iter(t.grid.max_iter);
    c.n_lambda = t.grid.n_lambda;
    c.lambda_ratio = t.grid.lambda_ratio;
    c.refit_every = t.refit_every;
    c.one_se_rule = t.one_se_rule;
    c.relaxed_ridge = t.relaxed_ridge;
    c.ridge_scale = t.ridge_scale;
    c.alpha_grid = floats(&t.alpha_grid, "--alpha-grid")?;
    c.strict_standardize = t.strict_standardize;
    c.validate().map_err(usage)?;
    Ok(c)
}

fn windows_for(w: &WindowArgs, total: usize, p: usize) -> Result<EvaluationWindows, CliError> {
    let windows = match (w.tune_start, w.tune_end, w.eval_start, w.eval_end) {
        (Some(a), Some(b), Some(c), Some(d)) => EvaluationWindows::new(a, b, c, d, p, total),
        _ => EvaluationWindows::from_fractions(total, p, w.tune_frac, w.eval_frac),
    };
    windows.map_err(usage)
}

fn scenario_spec(number: u8, k: usize, p: usize, t: usize, block1_own_lag: usize) -> Result<ScenarioSpec, CliError> {
    let scenario = Scenario::from_number(number).map_err(usage)?;
    let spec = ScenarioSpec { block1_own_lag, ..ScenarioSpec::new(scenario, k, p, t, 0) };
    spec.validate().map_err(usage)?;
    Ok(spec)
}

pub fn simulate(a: &SimulateArgs, threads: Option<usize>) -> Outcome {
    let spec = ScenarioSpec { seed: a.seed, sigma_u: a.sigma_u, ..scenario_spec(a.scenario, a.k, a.p, a.t, a.block1_own_lag)? };
    spec.validate().map_err(usage)?;
    let data = simulate_scenario(&spec)?;
    let mut out = Output::create(&a.output_dir)?;
    write_file(out.path("panel.csv"), |w| write_panel(w, &data.panel))?;
    write_json(out.path("truth.json"), &TruthSidecar::from_dataset(&data))?;
    println!(
        "simulated scenario {} with k = {}, p = {}, T = {} (seed {}): {} columns",
        a.scenario,
        a.k,
        a.p,
        a.t,
        a.seed,
        data.panel.total_length()
    );
    out.finish("simulate", threads, a)
}

/// Contents of `fit.json`.
#[derive(Serialize)]
struct FitSummary {
    method: String,
    lambda: Option<f64>,
    lambda_index: Option<usize>,
    lambda_max: Option<f64>,
    selected_lag: Option<usize>,
    iterations_max: Option<usize>,
    converged: bool,
    nonzero: usize,
    lag_score: Option<f64>,
    standardized: bool,
}

fn fit_model(a: &FitArgs, panel: &TimeSeriesPanel<f64>, out: &mut Output) -> Result<(CoefficientTensor<f64>, FitSummary), CliError> {
    let method: Method = a.method.parse().map_err(|_| {
        CliError::Usage(format!("unknown method `{}`; valid names: {}", a.method, METHOD_NAMES.join(", ")))
    })?;
    let mut summary = FitSummary {
        method: method.to_string(),
        lambda: None,
        lambda_index: None,
        lambda_max: None,
        selected_lag: None,
        iterations_max: None,
        converged: true,
        nonzero: 0,
        lag_score: None,
        standardized: a.data.standardize,
    };
    let level_given = a.level.lambda.is_some() || a.level.lambda_index.is_some();
    let model = match method {
        Method::Penalized { kind } => {
            let design = LagDesign::build(panel, a.p)?;
            let full = lambda_grid(&design, kind, a.grid.n_lambda, a.grid.lambda_ratio).map_err(usage)?;
            let grid = match (a.level.lambda, a.level.lambda_index) {
                (Some(l), _) if l.is_finite() && l >= 0.0 => vec![l],
                (Some(l), _) => return Err(CliError::Usage(format!("--lambda {l} must be finite and >= 0"))),
                (None, Some(i)) if i < full.len() => full[..=i].to_vec(),
                (None, Some(i)) => {
                    return Err(CliError::Usage(format!("--lambda-index {i} is outside a grid of {}", full.len())))
                }
                (None, None) => {
                    return Err(CliError::Usage(format!(
                        "{method} needs --lambda or --lambda-index (run `hvar cv` to choose one)"
                    )))
                }
            };
            let config = FitConfig::new(grid)
                .map_err(usage)?
                .with_epsilon(a.grid.epsilon)
                .with_max_iter(a.grid.max_iter);
            let path = fit_path(&design, kind, &config)?;
            let mut csv = String::from("lambda_index,lambda,objective,nonzero,rows_converged\n");
            for (l, lambda) in path.lambdas.iter().enumerate() {
                let nz = path.coefficients[l].b().iter().filter(|v| **v != 0.0).count();
                let conv = path.converged[l].iter().filter(|c| **c).count();
                writeln!(csv, "{l},{lambda},{},{nz},{conv}", path.objectives[l]).expect("string write");
            }
            fs::write(out.path("path.csv"), csv)?;
            let last = path.lambdas.len() - 1;
            summary.lambda = Some(path.lambdas[last]);
            summary.lambda_index = a.level.lambda_index;
            summary.lambda_max = Some(full[0]);
            summary.iterations_max = path.iterations[last].iter().copied().max();
            summary.converged = path.converged[last].iter().all(|c| *c);
            path.coefficients[last].clone()
        }
        Method::Baseline { kind } if level_given => {
            return Err(CliError::Usage(format!("{kind} takes no penalty level")));
        }
        Method::Baseline { kind: BaselineKind::LeastSquaresVar { lag } } => {
            if lag > a.p {
                return Err(CliError::Usage(format!("ls:{lag} needs --p of at least {lag}")));
            }
            summary.selected_lag = Some(lag);
            least_squares_var(panel, lag, a.p)?
        }
        Method::Baseline { kind: BaselineKind::AicSelectedVar } => {
            let sel = select_lag_aic(panel, a.p)?;
            summary.selected_lag = Some(sel.lag);
            sel.tensor
        }
        _ => {
            return Err(CliError::Usage(format!(
                "fit takes hvar-c, hvar-o, hvar-e, lasso, lwlasso:<alpha>, ls, ls:<lag> or ls-aic, not `{}`",
                a.method
            )))
        }
    };
    summary.nonzero = model.b().iter().filter(|v| **v != 0.0).count();
    Ok((model, summary))
}

pub fn fit(a: &FitArgs, threads: Option<usize>) -> Outcome {
    if a.p == 0 {
        return Err(usage("--p must be positive"));
    }
    let (panel, record) = load(&a.data)?;
    let truth = a.truth.as_ref().map(read_sidecar).transpose()?;
    let mut out = Output::create(&a.output_dir)?;
    let (model, mut summary) = fit_model(a, &panel, &mut out)?;
    let l_hat = maxlag_of(&model, 0.0);
    if let Some(t) = &truth {
        let l = t.maxlag()?;
        let padded = MaxlagMatrix::new(l_hat.as_array().clone(), l.p().max(l_hat.p()))?;
        summary.lag_score = Some(lag_selection_score(&padded, &l)?);
    }
    write_file(out.path("coefficients.csv"), |w| write_coefficients(w, &model))?;
    write_file(out.path("intercepts.csv"), |w| write_intercepts(w, model.nu()))?;
    write_file(out.path("maxlag.csv"), |w| write_maxlag(w, &l_hat, panel.names()))?;
    if let Some(r) = &record {
        write_json(out.path("scale.json"), r)?;
    }
    write_json(out.path("fit.json"), &summary)?;
    match (summary.lambda, summary.lag_score) {
        (Some(l), Some(s)) => println!("{}: lambda {l}, {} nonzero, lag selection error {s:.4}", summary.method, summary.nonzero),
        (Some(l), None) => println!("{}: lambda {l}, {} nonzero", summary.method, summary.nonzero),
        (None, Some(s)) => println!("{}: {} nonzero, lag selection error {s:.4}", summary.method, summary.nonzero),
        (None, None) => println!("{}: {} nonzero", summary.method, summary.nonzero),
    }
    out.finish("fit", threads, a)
}

pub fn forecast(a: &ForecastArgs, threads: Option<usize>) -> Outcome {
    let panel = read_panel_file::<f64>(&a.input)?;
    let model = read_model::<f64>(a.model_dir.join("coefficients.csv"), a.model_dir.join("intercepts.csv"))?;
    let scale_path = a.model_dir.join("scale.json");
    let record: Option<ScaleRecord<f64>> = if scale_path.exists() {
        Some(serde_json::from_reader(fs::File::open(&scale_path)?).map_err(|e| CliError::Runtime(e.to_string()))?)
    } else {
        None
    };
    let origin = panel.total_length();
    let point = match &record {
        Some(r) => {
            if r.means.len() != panel.k() {
                return Err(CliError::Runtime("scale.json does not match the panel".into()));
            }
            let std = TimeSeriesPanel::with_names(r.apply(panel.values()), panel.names().to_vec())?;
            r.invert_vector(one_step_forecast(&model, &std, origin)?.view())
        }
        None => one_step_forecast(&model, &panel, origin)?,
    };
    let forecast = TimeSeriesPanel::with_names(point.insert_axis(Axis(1)).to_owned(), panel.names().to_vec())?;
    let mut out = Output::create(&a.output_dir)?;
    write_file(out.path("forecast.csv"), |w| write_panel(w, &forecast))?;
    println!("forecast for row {origin}: {}", forecast.values().iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", "));
    out.finish("forecast", threads, a)
}

#[derive(Serialize)]
struct CvRecord {
    method: String,
    /// Curve whose minimum is lowest (the α choice for `lwlasso`).
    selected: usize,
    curves: Vec<CvCurve<f64>>,
}

pub fn cv(a: &CvArgs, threads: Option<usize>) -> Outcome {
    let methods = methods_from(&a.methods)?;
    let config = eval_config(&a.tuning)?;
    let jobs: Vec<(String, Vec<PenaltyKind>)> = methods
        .iter()
        .map(|m| match m {
            Method::Penalized { kind } => Ok((m.to_string(), vec![*kind])),
            Method::TunedLagWeightedLasso => Ok((
                m.to_string(),
                config.alpha_grid.iter().map(|&alpha| PenaltyKind::LagWeightedLasso { alpha }).collect(),
            )),
            Method::Baseline { kind } => Err(CliError::Usage(format!("{kind} has no penalty to cross-validate"))),
        })
        .collect::<Result<_, _>>()?;
    let (panel, _) = load(&a.data)?;
    let windows = windows_for(&a.windows, panel.total_length(), config.p)?;
    let records: Vec<CvRecord> = jobs
        .par_iter()
        .map(|(name, kinds)| {
            let curves = kinds
                .iter()
                .map(|&kind| {
                    let grid = tuning_grid(&panel, kind, &windows, &config)?;
                    rolling_cv(&panel, kind, &grid, &windows, &config)
                })
                .collect::<hvar::Result<Vec<_>>>()?;
            let selected = (0..curves.len())
                .min_by(|&x, &y| curves[x].msfe[curves[x].argmin].total_cmp(&curves[y].msfe[curves[y].argmin]))
                .expect("at least one curve");
            Ok(CvRecord { method: name.clone(), selected, curves })
        })
        .collect::<Result<_, CliError>>()?;

    let mut out = Output::create(&a.output_dir)?;
    let mut curves = String::from("method,kind,lambda_index,lambda,msfe,se,argmin,chosen\n");
    let mut summary = String::from("method,kind,chosen_index,chosen_lambda,msfe,se,selected\n");
    for r in &records {
        for (h, c) in r.curves.iter().enumerate() {
            for (j, lambda) in c.lambdas.iter().enumerate() {
                writeln!(curves, "{},{},{j},{lambda},{},{},{},{}", r.method, c.kind, c.msfe[j], c.se[j], j == c.argmin, j == c.chosen)
                    .expect("string write");
            }
            writeln!(
                summary,
                "{},{},{},{},{},{},{}",
                r.method,
                c.kind,
                c.chosen,
                c.chosen_lambda(),
                c.msfe[c.chosen],
                c.se[c.chosen],
                h == r.selected
            )
            .expect("string write");
        }
        let c = &r.curves[r.selected];
        println!("{:10} {:14} lambda {:.6e} (index {}), tuning MSFE {:.6}", r.method, c.kind.to_string(), c.chosen_lambda(), c.chosen, c.msfe[c.chosen]);
    }
    fs::write(out.path("cv_curves.csv"), curves)?;
    fs::write(out.path("cv_summary.csv"), summary)?;
    write_json(out.path("cv.json"), &records)?;
    out.finish("cv", threads, a)
}

pub fn evaluate(a: &EvaluateArgs, threads: Option<usize>) -> Outcome {
    let methods = methods_from(&a.methods)?;
    let config = eval_config(&a.tuning)?;
    let mut out;
    if let Some(input) = &a.input {
        let (panel, _) = load(&DataArgs { input: input.clone(), standardize: a.standardize })?;
        let windows = windows_for(&a.windows, panel.total_length(), config.p)?;
        let truth = match &a.truth {
            Some(path) => Some(read_sidecar(path)?.maxlag()?),
            None => None,
        };
        let report = evaluate_suite(&panel, &methods, &windows, &config, truth.as_ref())?;
        out = Output::create(&a.output_dir)?;
        write_file(out.path("suite.csv"), |w| write_suite_table(w, &report))?;
        write_file(out.path("cv_curves.csv"), |w| write_cv_curves(w, &report))?;
        write_json(out.path("report.json"), &report)?;
        for o in &report.outcomes {
            match &o.report {
                Some(r) => match r.lag_score {
                    Some(s) => println!("{:10} MSFE {:.6} ({:.6})  lag error {s:.4}", o.method, r.msfe, r.msfe_se),
                    None => println!("{:10} MSFE {:.6} ({:.6})", o.method, r.msfe, r.msfe_se),
                },
                None => println!("{:10} failed: {}", o.method, o.error.as_deref().unwrap_or("unknown error")),
            }
        }
    } else {
        let number = a.scenario.ok_or_else(|| usage("--input or --scenario is required"))?;
        let k = a.k.ok_or_else(|| usage("--scenario needs --k"))?;
        if a.windows.tune_start.is_some() {
            return Err(usage("explicit windows apply to --input; simulated runs use --tune-frac and --eval-frac"));
        }
        let spec = scenario_spec(number, k, config.p, a.t, a.block1_own_lag)?;
        let seeds = seeds_from(&a.seeds)?;
        let total = a.t + config.p;
        EvaluationWindows::from_fractions(total, config.p, a.windows.tune_frac, a.windows.eval_frac).map_err(usage)?;
        let reps = run_replicates(&spec, &seeds, &methods, a.windows.tune_frac, a.windows.eval_frac, &config)?;
        out = Output::create(&a.output_dir)?;
        for r in &reps {
            write_file(out.path(&format!("suite_seed{}.csv", r.seed)), |w| write_suite_table(w, &r.report))?;
        }
        let reports: Vec<_> = reps.iter().map(|r| r.report.clone()).collect();
        let rows = aggregate_replicates(&reports);
        write_file(out.path("aggregate.csv"), |w| write_aggregate_table(w, &rows))?;
        write_json(out.path("replicates.json"), &reps)?;
        for r in &rows {
            let lag = r.lag_score_mean.map(|s| format!("  lag error {s:.4}")).unwrap_or_default();
            println!("{:10} MSFE {:.6} ({:.6}) over {} replicates{lag}", r.method, r.msfe_mean, r.msfe_se, r.replicates);
        }
    }
    out.finish("evaluate", threads, a)
}
