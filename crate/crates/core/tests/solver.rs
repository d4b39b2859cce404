mod common;

use common::{center_rows, gaussian, groups, ista_row, least_squares_row, row_objective, ALL_KINDS, HIERARCHICAL};
use hvar::penalty::hierarchy_violation_rows;
use hvar::solver::{fit, fit_row, lambda_grid, HvarProblem};
use hvar::{FitConfig, LagDesign, PenaltyKind, RowPenalty, StepRule, TimeSeriesPanel};
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_design(rng: &mut ChaCha8Rng, k: usize, p: usize, t: usize) -> LagDesign<f64> {
    let z = gaussian(rng, (k * p, t));
    let truth = gaussian(rng, (k, k * p)) * 0.5;
    let y = truth.dot(&z) + gaussian(rng, (k, t));
    LagDesign::from_parts(y, z, p).unwrap().center()
}

fn random_panel(rng: &mut ChaCha8Rng, k: usize, len: usize) -> TimeSeriesPanel<f64> {
    // a stable VAR(1) with a little cross-dependence
    let a = Array2::from_shape_fn((k, k), |(i, j)| if i == j { 0.5 } else { 0.1 / k as f64 });
    let noise = gaussian(rng, (k, len));
    let mut values = Array2::zeros((k, len));
    for t in 1..len {
        let next = a.dot(&values.column(t - 1)) + noise.column(t);
        values.column_mut(t).assign(&next);
    }
    TimeSeriesPanel::new(values).unwrap()
}

#[test]
fn row_fit_matches_proximal_gradient_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let (k, p, t) = (2, 2, 30);
    for kind in ALL_KINDS {
        for _ in 0..10 {
            let design = random_design(&mut rng, k, p, t);
            let problem = HvarProblem::new(&design, kind).unwrap();
            let lambda = problem.lambda_max().unwrap() * rng.random_range(0.02..0.9);
            let config = FitConfig::default().with_epsilon(1e-10).with_max_iter(20_000);
            for i in 0..k {
                let g = groups(kind, i, k, p);
                let y = design.y().row(i).to_owned();
                let ours = problem.fit_row(i, lambda, &config, Array1::zeros(k * p).view()).unwrap();
                let oracle = ista_row(y.view(), design.z(), lambda, &g, 20_000);
                let f_ours = row_objective(y.view(), design.z(), ours.coef.view(), lambda, &g);
                let f_oracle = row_objective(y.view(), design.z(), oracle.view(), lambda, &g);
                assert!(f_ours <= f_oracle + 1e-6, "{kind}: {f_ours} vs oracle {f_oracle}");
                assert!((ours.objective - f_ours).abs() <= 1e-9 * f_ours.max(1.0));
            }
        }
    }
}

#[test]
fn default_tolerance_is_close_to_optimal() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let (k, p, t) = (2, 2, 30);
    for kind in ALL_KINDS {
        let design = random_design(&mut rng, k, p, t);
        let problem = HvarProblem::new(&design, kind).unwrap();
        let lambda = 0.2 * problem.lambda_max().unwrap();
        let tight = FitConfig::default().with_epsilon(1e-12).with_max_iter(50_000);
        let loose = FitConfig::default();
        for i in 0..k {
            let zero = Array1::zeros(k * p);
            let a = problem.fit_row(i, lambda, &tight, zero.view()).unwrap();
            let b = problem.fit_row(i, lambda, &loose, zero.view()).unwrap();
            assert!(b.objective - a.objective <= 1e-5 * a.objective.max(1.0), "{kind}");
        }
    }
}

#[test]
fn backtracking_step_reaches_the_same_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    for kind in HIERARCHICAL {
        let design = random_design(&mut rng, 3, 2, 40);
        let problem = HvarProblem::new(&design, kind).unwrap();
        let lambda = 0.3 * problem.lambda_max().unwrap();
        let fixed = FitConfig::default().with_epsilon(1e-11).with_max_iter(50_000);
        let back = fixed.clone().with_step_rule(StepRule::Backtracking);
        for i in 0..3 {
            let zero = Array1::zeros(6);
            let a = problem.fit_row(i, lambda, &fixed, zero.view()).unwrap();
            let b = problem.fit_row(i, lambda, &back, zero.view()).unwrap();
            assert!((a.objective - b.objective).abs() <= 1e-8 * a.objective.max(1.0));
        }
    }
}

#[test]
fn zero_penalty_matches_least_squares() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for kind in ALL_KINDS {
        for (k, p, t) in [(2, 2, 30), (3, 2, 50), (1, 3, 20)] {
            let design = random_design(&mut rng, k, p, t);
            let config = FitConfig::new(vec![0.0]).unwrap().with_epsilon(1e-13).with_max_iter(200_000);
            let result = HvarProblem::new(&design, kind).unwrap().fit_path(&config, None).unwrap();
            for i in 0..k {
                let ls = least_squares_row(design.y().row(i), design.z());
                let got = result.rows(0).row(i).to_owned();
                let err = (&got - &ls).iter().fold(0.0f64, |m, v| m.max(v.abs()));
                assert!(err <= 1e-6, "{kind} k={k} p={p}: {got} vs {ls}");
            }
        }
    }
}

#[test]
fn intercepts_are_recovered_from_the_means() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let panel = random_panel(&mut rng, 3, 80);
    let shifted = TimeSeriesPanel::new(panel.values().mapv(|v| v + 5.0)).unwrap();
    let design = LagDesign::build(&shifted, 2).unwrap();
    let config = FitConfig::new(vec![0.0]).unwrap().with_epsilon(1e-13).with_max_iter(200_000);
    let result = fit(&design, PenaltyKind::Componentwise, &config).unwrap();
    // compare with least squares on [Z; 1]
    let t = design.n_obs();
    let mut z1 = Array2::ones((7, t));
    z1.slice_mut(ndarray::s![..6, ..]).assign(&design.z());
    for i in 0..3 {
        let ls = least_squares_row(design.y().row(i), z1.view());
        assert!((result.coefficients[0].nu()[i] - ls[6]).abs() <= 1e-6);
        for c in 0..6 {
            assert!((result.rows(0)[[i, c]] - ls[c]).abs() <= 1e-6);
        }
    }
}

#[test]
fn lambda_max_gives_the_zero_fit_and_is_tight() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for kind in ALL_KINDS {
        let design = random_design(&mut rng, 3, 3, 40);
        let problem = HvarProblem::new(&design, kind).unwrap();
        let lmax = problem.lambda_max().unwrap();
        let config = FitConfig::new(vec![lmax, 0.97 * lmax]).unwrap().with_epsilon(1e-10).with_max_iter(20_000);
        let result = problem.fit_path(&config, None).unwrap();
        assert!(result.rows(0).iter().all(|v| *v == 0.0), "{kind}");
        assert!(result.rows(1).iter().any(|v| *v != 0.0), "{kind}: zero below lambda_max");
    }
}

#[test]
fn lasso_fit_satisfies_optimality_conditions() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    for alpha in [0.0, 0.5, 1.0] {
        let kind = PenaltyKind::LagWeightedLasso { alpha };
        let (k, p) = (3, 3);
        let design = random_design(&mut rng, k, p, 60);
        let problem = HvarProblem::new(&design, kind).unwrap();
        let lambda = 0.1 * problem.lambda_max().unwrap();
        let config = FitConfig::default().with_epsilon(1e-12).with_max_iter(100_000);
        for i in 0..k {
            let b = problem.fit_row(i, lambda, &config, Array1::zeros(k * p).view()).unwrap().coef;
            let grad = -(design.y().row(i).to_owned() - b.dot(&design.z())).dot(&design.z().t());
            for c in 0..k * p {
                let w = ((c / k + 1) as f64).powf(alpha);
                if b[c] != 0.0 {
                    assert!((grad[c] + lambda * w * b[c].signum()).abs() <= 1e-6, "active {c}");
                } else {
                    assert!(grad[c].abs() <= lambda * w + 1e-6, "inactive {c}");
                }
            }
        }
    }
}

#[test]
fn unweighted_lag_weighted_lasso_is_the_lasso() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let design = random_design(&mut rng, 3, 2, 40);
    let grid = lambda_grid(&design, PenaltyKind::Lasso, 5, 0.01).unwrap();
    let config = FitConfig::new(grid).unwrap();
    let a = fit(&design, PenaltyKind::Lasso, &config).unwrap();
    let b = fit(&design, PenaltyKind::LagWeightedLasso { alpha: 0.0 }, &config).unwrap();
    for l in 0..config.lambda_grid.len() {
        assert_eq!(a.rows(l), b.rows(l));
    }
}

#[test]
fn one_dimensional_problem_has_closed_form() {
    // ½‖y − bz‖² + λ|b| is solved by soft(yzᵀ, λ)/‖z‖²
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    for _ in 0..20 {
        let z = center_rows(&gaussian(&mut rng, (1, 25)));
        let y = z.row(0).mapv(|v| 0.7 * v) + center_rows(&gaussian(&mut rng, (1, 25))).row(0);
        let lambda: f64 = rng.random_range(0.0..10.0);
        let yz = y.dot(&z.row(0));
        let zz = z.row(0).dot(&z.row(0));
        let expected = yz.signum() * (yz.abs() - lambda).max(0.0) / zz;
        for kind in ALL_KINDS {
            let pen = RowPenalty::for_kind(kind, 0, 1, 1).unwrap();
            let config = FitConfig::default().with_epsilon(1e-13).with_max_iter(10_000);
            let b = fit_row(y.view(), z.view(), lambda, &pen, &config).unwrap();
            assert!((b[0] - expected).abs() <= 1e-9, "{kind}: {} vs {expected}", b[0]);
        }
    }
}

#[test]
fn rows_do_not_depend_on_thread_count() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    let panel = random_panel(&mut rng, 6, 90);
    let design = LagDesign::build(&panel, 3).unwrap();
    for kind in ALL_KINDS {
        let grid = lambda_grid(&design, kind, 8, 1e-3).unwrap();
        let config = FitConfig::new(grid).unwrap();
        let run = |threads: usize| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| fit(&design, kind, &config).unwrap())
        };
        let (a, b) = (run(1), run(4));
        for l in 0..a.len() {
            assert_eq!(a.rows(l), b.rows(l));
            assert_eq!(a.coefficients[l], b.coefficients[l]);
        }
    }
}

#[test]
fn fitted_paths_respect_the_hierarchy() {
    let mut rng = ChaCha8Rng::seed_from_u64(40);
    for kind in HIERARCHICAL {
        for (k, p) in [(3, 4), (5, 3), (2, 6)] {
            let panel = random_panel(&mut rng, k, 70);
            let design = LagDesign::build(&panel, p).unwrap();
            let grid = lambda_grid(&design, kind, 15, 1e-4).unwrap();
            let result = fit(&design, kind, &FitConfig::new(grid).unwrap()).unwrap();
            for l in 0..result.len() {
                assert_eq!(hierarchy_violation_rows(result.rows(l), kind), None, "{kind} level {l}");
            }
        }
    }
}

#[test]
fn warm_starts_do_not_change_the_optimum() {
    let mut rng = ChaCha8Rng::seed_from_u64(41);
    let design = random_design(&mut rng, 3, 2, 50);
    let kind = PenaltyKind::OwnOther;
    let problem = HvarProblem::new(&design, kind).unwrap();
    let lmax = problem.lambda_max().unwrap();
    let config = FitConfig::new(vec![0.5 * lmax, 0.1 * lmax]).unwrap().with_epsilon(1e-11).with_max_iter(50_000);
    let cold = problem.fit_path(&config, None).unwrap();
    let warm_rows: Vec<Array2<f64>> = vec![gaussian(&mut rng, (3, 6)), gaussian(&mut rng, (3, 6))];
    let warm = problem.fit_path(&config, Some(&warm_rows)).unwrap();
    for l in 0..2 {
        assert!((cold.objectives[l] - warm.objectives[l]).abs() <= 1e-8 * cold.objectives[l]);
    }
}

#[test]
fn single_precision_fit_tracks_double() {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let panel = random_panel(&mut rng, 4, 80);
    let design = LagDesign::build(&panel, 2).unwrap();
    let panel32 = TimeSeriesPanel::new(panel.values().mapv(|v| v as f32)).unwrap();
    let design32 = LagDesign::build(&panel32, 2).unwrap();
    let kind = PenaltyKind::Elementwise;
    let grid = lambda_grid(&design, kind, 4, 0.05).unwrap();
    let a = fit(&design, kind, &FitConfig::new(grid.clone()).unwrap().with_epsilon(1e-7)).unwrap();
    let grid32: Vec<f32> = grid.iter().map(|v| *v as f32).collect();
    let b = fit(&design32, kind, &FitConfig::new(grid32).unwrap().with_epsilon(1e-5)).unwrap();
    for l in 0..a.len() {
        let diff = (&a.rows(l).mapv(|v| v as f32) - &b.rows(l)).iter().fold(0.0f32, |m, v| m.max(v.abs()));
        assert!(diff <= 1e-3, "level {l}: {diff}");
    }
}
