mod common;

use common::{companion, spectral_radius_by_squaring};
use hvar::io::{read_sidecar, write_json, TruthSidecar};
use hvar::series::maxlag_of;
use hvar::simulation::{
    generate_coefficients, maxlag_scenario1, maxlag_scenario2, maxlag_scenario3, simulate, simulate_var, Scenario,
    ScenarioSpec,
};
use hvar::{CoefficientTensor, Error};
use ndarray::{array, Array1, Array2, Array3};

fn sample_cov(values: ndarray::ArrayView2<f64>) -> Array2<f64> {
    let n = values.ncols() as f64;
    let means = values.mean_axis(ndarray::Axis(1)).unwrap();
    let c = &values - &means.insert_axis(ndarray::Axis(1));
    c.dot(&c.t()) / (n - 1.0)
}

#[test]
fn white_noise_covariance() {
    let zero = CoefficientTensor::<f64>::zeros(3, 1);
    let panel = simulate_var(&zero, 0.1, 10_000, 500, 1).unwrap();
    let cov = sample_cov(panel.values());
    for i in 0..3 {
        for j in 0..3 {
            let target = if i == j { 0.01 } else { 0.0 };
            assert!((cov[[i, j]] - target).abs() <= 0.15 * 0.01, "{cov}");
        }
    }
    let silent = simulate_var(&zero, 0.0, 50, 500, 1).unwrap();
    assert!(silent.values().iter().all(|v| *v == 0.0));
}

#[test]
fn ar1_stationary_variance() {
    let b = CoefficientTensor::new(Array3::from_elem((1, 1, 1), 0.5), Array1::zeros(1)).unwrap();
    let panel = simulate_var(&b, 0.1, 10_000, 500, 2).unwrap();
    let var = sample_cov(panel.values())[[0, 0]];
    let target = 0.01 / (1.0 - 0.25);
    assert!((var / target - 1.0).abs() <= 0.15, "{var} vs {target}");
}

#[test]
fn explosive_coefficients_are_rejected() {
    let b = CoefficientTensor::new(Array3::from_elem((1, 1, 1), 1.01), Array1::zeros(1)).unwrap();
    assert!(matches!(simulate_var(&b, 0.1, 10, 10, 0), Err(Error::NonStationary(_))));
}

#[test]
fn univariate_coefficient_equals_the_target_radius() {
    let l = hvar::MaxlagMatrix::new(array![[1]], 1).unwrap();
    let b = generate_coefficients(&l, 4, 0.8, None).unwrap();
    assert!((b.b()[[0, 0, 0]].abs() - 0.8).abs() <= 1e-6);
}

#[test]
fn scenario_patterns_match_their_definitions() {
    let l1 = maxlag_scenario1(5, 5).unwrap();
    for i in 0..5 {
        assert!(l1.as_array().row(i).iter().all(|&v| v == i + 1));
    }
    let l3 = maxlag_scenario3(4, 4).unwrap();
    assert_eq!(l3.as_array(), &array![[4, 3, 2, 1], [3, 2, 1, 0], [2, 1, 0, 0], [1, 0, 0, 0]]);
    let l3_big = maxlag_scenario3(8, 4).unwrap();
    assert_eq!(l3_big.get(1, 1), 4);
    assert_eq!(l3_big.get(7, 6), 0);
    assert_eq!(l3_big.get(2, 7), 0);
    assert_eq!(l3_big.get(0, 7), 1);
    let l2 = maxlag_scenario2(6, 2, 1).unwrap();
    let expected = array![
        [1, 0, 0, 0, 0, 0],
        [0, 1, 0, 0, 0, 0],
        [1, 1, 2, 1, 1, 1],
        [1, 1, 1, 2, 1, 1],
        [2, 2, 2, 2, 2, 2],
        [2, 2, 2, 2, 2, 2],
    ];
    assert_eq!(l2.as_array(), &expected);
}

#[test]
fn scenario_dimensions_are_checked() {
    assert!(maxlag_scenario1(7, 6).is_err());
    assert!(maxlag_scenario2(7, 2, 1).is_err());
    assert!(maxlag_scenario3(10, 4).is_err());
    assert!(maxlag_scenario1(10, 4).is_err());
}

#[test]
fn scenarios_hit_the_target_radius() {
    for (scenario, k, p) in [(Scenario::Componentwise, 10, 6), (Scenario::OwnOther, 12, 2), (Scenario::Elementwise, 12, 4)] {
        for seed in 0..5 {
            let data = simulate(&ScenarioSpec::new(scenario.clone(), k, p, 100, seed)).unwrap();
            let radius = spectral_radius_by_squaring(&companion(data.true_b.b()));
            assert!((radius - 0.8).abs() <= 1e-6, "{scenario:?} seed {seed}: {radius}");
            assert_eq!(maxlag_of(&data.true_b, 0.0), data.true_l);
            assert_eq!(data.panel.total_length(), 100 + p);
            assert!(data.panel.values().iter().all(|v| v.is_finite()));
        }
    }
}

#[test]
fn own_lags_dominate_in_the_own_other_scenario() {
    let data = simulate(&ScenarioSpec::new(Scenario::OwnOther, 6, 2, 50, 3)).unwrap();
    let b = data.true_b.b();
    for i in 0..6 {
        for j in 0..6 {
            if i != j && b[[i, j, 0]] != 0.0 {
                assert!(b[[i, i, 0]] > 2.9 * b[[i, j, 0]].abs());
            }
        }
    }
}

#[test]
fn same_seed_same_dataset() {
    let spec = ScenarioSpec::new(Scenario::Elementwise, 8, 4, 60, 42);
    let a = simulate(&spec).unwrap();
    let b = simulate(&spec).unwrap();
    assert_eq!(a.panel, b.panel);
    assert_eq!(a.true_b, b.true_b);
    let c = simulate(&spec.with_seed(43)).unwrap();
    assert_ne!(a.panel, c.panel);
    // coefficients do not depend on the series length
    let longer = simulate(&ScenarioSpec { t: 90, ..spec.clone() }).unwrap();
    assert_eq!(a.true_b, longer.true_b);
}

#[test]
fn sidecar_round_trips_the_truth() {
    let data = simulate(&ScenarioSpec::new(Scenario::Componentwise, 5, 5, 30, 9)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("truth.json");
    write_json(&path, &TruthSidecar::from_dataset(&data)).unwrap();
    let back = read_sidecar(&path).unwrap();
    assert_eq!(back.tensor().unwrap(), data.true_b);
    assert_eq!(back.maxlag().unwrap(), data.true_l);
    assert_eq!(maxlag_of(&back.tensor().unwrap(), 0.0), back.maxlag().unwrap());
    assert_eq!(back.seed, 9);
}
