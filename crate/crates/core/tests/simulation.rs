use std::time::Instant;

use sampledefect_core::fixtures::{calluna_population, CALLUNA_RHO, CALLUNA_SAMPLED};
use sampledefect_core::montecarlo::{
    export_distributions, mse_parity, normal_ci, normal_quantile, run_experiment, ExperimentConfig,
};
use sampledefect_core::sampler::targeted_allocation;
use sampledefect_core::*;

fn srs_cfg(n: usize, m: usize, seed: u64) -> ExperimentConfig {
    ExperimentConfig::new(SamplerSpec::Srs { n, seed: 0 }, m, 0.95, seed)
}

fn biased_cfg(m: usize, seed: u64) -> ExperimentConfig {
    let sampler = SamplerSpec::TargetedRho {
        n: CALLUNA_SAMPLED,
        target_rho: CALLUNA_RHO,
        seed: 0,
    };
    ExperimentConfig::new(sampler, m, 0.95, seed)
}

/// Closed-form MSEs: SRS variance with the finite-population correction,
/// and the squared bias of the fixed-allocation design.
fn analytic_mses(pop: &Population) -> (f64, f64) {
    let big_n = pop.len() as f64;
    let p = pop.count_ones() as f64 / big_n;
    let srs = p * (1.0 - p) / 28.0 * (big_n - 28.0) / (big_n - 1.0);
    let alloc = targeted_allocation(pop, CALLUNA_SAMPLED, CALLUNA_RHO).unwrap();
    let bias = alloc.ones as f64 / CALLUNA_SAMPLED as f64 - p;
    (srs, bias * bias)
}

#[test]
fn quantile_and_interval_by_hand() {
    assert!((normal_quantile(0.95).unwrap() - 1.96).abs() < 1e-4);
    let ci = normal_ci(0.5, 0.0, 10, 0.95).unwrap();
    assert_eq!((ci.lo, ci.hi), (0.5, 0.5));
    let ci = normal_ci(0.213, 0.41, 19_419, 0.95).unwrap();
    assert!((ci.half_width() - 1.96 * 0.41 / 139.35).abs() < 1e-5);
    assert!(!ci.contains(0.299));
}

#[test]
fn coverage_of_both_designs() {
    let pop = calluna_population();
    let start = Instant::now();
    let srs = run_experiment(&pop, &srs_cfg(28, 1000, 1)).unwrap();
    let biased = run_experiment(&pop, &biased_cfg(1000, 1)).unwrap();
    assert!((0.90..=0.98).contains(&srs.coverage), "{}", srs.coverage);
    assert!(biased.coverage <= 0.001, "{}", biased.coverage);
    assert_eq!(
        srs.covered,
        srs.outcomes.iter().filter(|o| o.covers).count()
    );
    assert_eq!(srs.coverage, srs.covered as f64 / 1000.0);
    assert!(start.elapsed().as_secs() < 120);
}

#[test]
fn srs_is_unbiased_and_biased_mean_matches_the_identity() {
    let pop = calluna_population();
    let srs = run_experiment(&pop, &srs_cfg(28, 4000, 3)).unwrap();
    let se = srs.estimates.sd / (4000f64).sqrt();
    assert!((srs.mean_estimate - srs.true_mean).abs() <= 4.0 * se);

    let biased = run_experiment(&pop, &biased_cfg(200, 3)).unwrap();
    let m = sampledefect_core::sampler::sample(&pop, &biased.sampler).unwrap();
    let d = error_decomposition(&pop, &m).unwrap();
    let se = biased.estimates.sd / (200f64).sqrt();
    let gap = biased.mean_estimate - biased.true_mean - d.product();
    assert!(gap.abs() <= 3.0 * se + 1e-12, "{gap} vs {se}");
}

#[test]
fn mse_parity_with_small_srs() {
    let pop = calluna_population();
    let start = Instant::now();
    let parity = mse_parity(&pop, &srs_cfg(28, 2000, 7), &biased_cfg(2000, 7)).unwrap();
    let (srs, biased) = analytic_mses(&pop);
    assert!((biased / srs - 1.02).abs() < 0.01);
    assert!((parity.mse_biased - biased).abs() < 1e-12);
    assert!((0.85..=1.18).contains(&parity.ratio), "{}", parity.ratio);
    assert!(start.elapsed().as_secs() < 180);
}

#[test]
fn mse_ratio_settles_as_replicates_grow() {
    let pop = calluna_population();
    let (srs, biased) = analytic_mses(&pop);
    let target = biased / srs;
    let deviation = |m: usize| -> f64 {
        let seeds = 12u64;
        (0..seeds)
            .map(|s| {
                let p = mse_parity(&pop, &srs_cfg(28, m, 100 + s), &biased_cfg(2, s)).unwrap();
                (p.ratio - target).abs()
            })
            .sum::<f64>()
            / seeds as f64
    };
    let d = [deviation(250), deviation(1000), deviation(4000)];
    assert!(d[2] < d[0], "{d:?}");
    assert!(d[2] <= d[1] * 1.25 && d[1] <= d[0] * 1.25, "{d:?}");
}

#[test]
fn zero_target_design_is_unbiased_at_the_same_size() {
    // Both designs centre on the truth. Allocation by outcome removes all
    // within-stratum variation, so its MSE is only the rounding bias.
    let pop = calluna_population();
    let n = 500;
    let stratified = ExperimentConfig::new(
        SamplerSpec::TargetedRho {
            n,
            target_rho: 0.0,
            seed: 0,
        },
        500,
        0.95,
        9,
    );
    let parity = mse_parity(&pop, &srs_cfg(n, 500, 9), &stratified).unwrap();
    let alloc = targeted_allocation(&pop, n, 0.0).unwrap();
    let p = population_stats(&pop).mean;
    let rounding = alloc.ones as f64 / n as f64 - p;
    assert!((parity.mse_biased - rounding * rounding).abs() < 1e-15);
    assert!(rounding.abs() <= 0.5 / n as f64);
    let srs_var = p * (1.0 - p) / n as f64;
    assert!((parity.mse_small_srs / srs_var - 1.0).abs() < 0.2);
}

#[test]
fn exports_have_the_expected_shape() {
    let pop = calluna_population();
    let result = run_experiment(&pop, &srs_cfg(28, 3, 5)).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let (replicates, histogram) = export_distributions(&result, dir.path()).unwrap();
    let text = std::fs::read_to_string(&replicates).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "replicate,estimate,squared_error");
    assert_eq!(lines.len(), 4);
    assert_eq!(result.estimates.histogram.total(), 3);
    assert!(std::fs::read_to_string(histogram)
        .unwrap()
        .starts_with("series,bin,lo,hi,count"));

    let first = std::fs::read(&replicates).unwrap();
    export_distributions(&result, dir.path()).unwrap();
    assert_eq!(std::fs::read(&replicates).unwrap(), first);

    let again = run_experiment(&pop, &srs_cfg(28, 3, 5)).unwrap();
    assert_eq!(again, result);
}
