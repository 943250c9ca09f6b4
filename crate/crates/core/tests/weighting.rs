use std::time::Instant;

use sampledefect_core::fixtures::{calluna_population, calluna_sample, LogisticSelection};
use sampledefect_core::mitigation::{
    evaluate_mitigation, evaluate_true_stratum_weights, fit_propensity, fit_propensity_on,
    report_from_weights, weights_from_propensities, FitOptions, Normalization, WeightingOptions,
};

#[test]
fn logistic_selection_is_recovered_and_corrected() {
    let start = Instant::now();
    let fixture = LogisticSelection::standard(42);
    let (pop, m) = fixture.generate();
    let model = fit_propensity(&pop, &m, &FitOptions::default()).unwrap();
    assert!(model.converged);
    assert_eq!(model.coefficients.len(), 2);
    let truth = [fixture.selection.0, fixture.selection.1];
    for k in 0..2 {
        let z = (model.coefficients[k] - truth[k]) / model.std_errors[k];
        assert!(z.abs() <= 3.0, "coefficient {k}: z = {z}");
    }

    let report = evaluate_mitigation(&pop, &m, &model, &WeightingOptions::default()).unwrap();
    assert!(report.bias_reduction_pct.unwrap() >= 80.0, "{report:?}");
    assert!(start.elapsed().as_secs() < 30);
}

#[test]
fn recovery_holds_across_seeds() {
    let mut within = 0;
    for seed in 0..10 {
        let fixture = LogisticSelection {
            size: 20_000,
            ..LogisticSelection::standard(seed)
        };
        let (pop, m) = fixture.generate();
        let model = fit_propensity(&pop, &m, &FitOptions::default()).unwrap();
        let z = (model.coefficients[1] - fixture.selection.1) / model.std_errors[1];
        within += (z.abs() <= 3.0) as usize;
    }
    assert!(within >= 9);
}

#[test]
fn fitted_weights_at_heather_scale() {
    let (pop, m) = LogisticSelection::calluna_scale(8).generate();
    assert!((m.n() as f64 - 19_419.0).abs() < 600.0, "{}", m.n());
    let model = fit_propensity(&pop, &m, &FitOptions::default()).unwrap();
    let report = evaluate_mitigation(&pop, &m, &model, &WeightingOptions::default()).unwrap();
    let (u, w) = (
        report.unweighted_error.unwrap(),
        report.weighted_error.unwrap(),
    );
    assert!(w.abs() <= 0.2 * u.abs(), "{u} -> {w}");
}

#[test]
fn true_stratum_weights_are_exact_at_heather_scale() {
    let pop = calluna_population();
    let m = calluna_sample(&pop, 3).unwrap();
    for normalization in [Normalization::Hajek, Normalization::HorvitzThompson] {
        let options = WeightingOptions {
            normalization,
            cap: None,
        };
        let r = evaluate_true_stratum_weights(&pop, &m, &options).unwrap();
        assert!(r.weighted_error.unwrap().abs() <= 1e-12, "{r:?}");
        assert!((r.bias_reduction_pct.unwrap() - 100.0).abs() < 1e-9);
    }
}

#[test]
fn independent_covariate_removes_no_bias() {
    let pop = calluna_population();
    let m = calluna_sample(&pop, 4).unwrap();
    let noise = pop
        .covariate_names()
        .iter()
        .position(|c| c == "noise")
        .unwrap();
    let model = fit_propensity_on(&pop, &m, &[noise], &FitOptions::default()).unwrap();
    let report = evaluate_mitigation(&pop, &m, &model, &WeightingOptions::default()).unwrap();
    assert!(report.bias_reduction_pct.unwrap().abs() < 3.0, "{report:?}");
}

#[test]
fn informative_covariate_on_the_heather_sample_helps() {
    let pop = calluna_population();
    let m = calluna_sample(&pop, 4).unwrap();
    let model = fit_propensity(&pop, &m, &FitOptions::default()).unwrap();
    let report = evaluate_mitigation(&pop, &m, &model, &WeightingOptions::default()).unwrap();
    assert!(model.converged);
    assert!(report.bias_reduction_pct.unwrap() > 0.0, "{report:?}");
}

#[test]
fn intercept_only_model_reproduces_the_sampling_rate() {
    let pop = calluna_population();
    let m = calluna_sample(&pop, 6).unwrap();
    let model = fit_propensity_on(&pop, &m, &[], &FitOptions::default()).unwrap();
    let f = m.n() as f64 / pop.len() as f64;
    for p in model.predict(&pop).unwrap() {
        assert!((p - f).abs() < 1e-6);
    }
    let report = evaluate_mitigation(&pop, &m, &model, &WeightingOptions::default()).unwrap();
    assert!((report.weighted_estimate - report.unweighted_estimate).abs() < 1e-12);
}

#[test]
fn equal_weights_leave_the_estimate_alone() {
    let y = [1.0, 0.0, 0.0, 1.0, 1.0];
    let w = weights_from_propensities(&[0.2; 5], Normalization::Hajek, None).unwrap();
    let r = report_from_weights(&y, &w, Some(0.5), None).unwrap();
    assert_eq!(r.weighted_estimate, r.unweighted_estimate);
    assert!(r.bias_reduction_pct.unwrap().abs() < 1e-12);
}
