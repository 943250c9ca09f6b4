//! Quasi-randomization: model each unit's inclusion probability from design
//! variables observed on the whole frame, then weight the sample by the
//! inverse fitted probabilities.

mod propensity;
mod weights;

pub use propensity::{
    fit_propensity, fit_propensity_on, logistic, FitOptions, PropensityModel, DEFAULT_MAX_ITER,
    DEFAULT_RIDGE, DEFAULT_TOL,
};
pub use weights::{
    weighted_mean, weighted_total, weights_from_propensities, Normalization, WeightSet,
    WeightSummary,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{population_stats, Population, SampleMembership};

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct WeightingOptions {
    pub normalization: Normalization,
    pub cap: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MitigationReport {
    pub unweighted_estimate: f64,
    pub weighted_estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub true_mean: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub unweighted_error: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub weighted_error: Option<f64>,
    /// `100 * (1 - |weighted error| / |unweighted error|)`; absent without a
    /// true mean or when the unweighted estimate is already exact.
    pub bias_reduction_pct: Option<f64>,
    pub weights_summary: WeightSummary,
    pub normalization: Normalization,
    pub cap: Option<f64>,
    pub capped: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub model: Option<PropensityModel>,
}

/// Builds the report from sampled outcomes and their weights.
pub fn report_from_weights(
    y_sample: &[f64],
    weights: &WeightSet,
    true_mean: Option<f64>,
    model: Option<PropensityModel>,
) -> Result<MitigationReport> {
    let equal = WeightSet {
        weights: vec![1.0; y_sample.len()],
        normalization: Normalization::Hajek,
        cap: None,
        capped: 0,
    };
    let unweighted = weighted_mean(y_sample, &equal)?;
    let weighted = weighted_mean(y_sample, weights)?;
    let unweighted_error = true_mean.map(|t| unweighted - t);
    let weighted_error = true_mean.map(|t| weighted - t);
    let bias_reduction_pct = match (unweighted_error, weighted_error) {
        (Some(u), Some(w)) if u != 0.0 => Some(100.0 * (1.0 - w.abs() / u.abs())),
        _ => None,
    };
    Ok(MitigationReport {
        unweighted_estimate: unweighted,
        weighted_estimate: weighted,
        true_mean,
        unweighted_error,
        weighted_error,
        bias_reduction_pct,
        weights_summary: weights.summary(),
        normalization: weights.normalization,
        cap: weights.cap,
        capped: weights.capped,
        model,
    })
}

fn sampled_y(pop: &Population, membership: &SampleMembership) -> Vec<f64> {
    membership.sampled_indices().map(|i| pop.y(i)).collect()
}

/// Weights the sample with the model's fitted probabilities. The true mean
/// is taken from the population, which carries `y` for every unit.
pub fn evaluate_mitigation(
    pop: &Population,
    membership: &SampleMembership,
    model: &PropensityModel,
    options: &WeightingOptions,
) -> Result<MitigationReport> {
    membership.check_aligned(pop)?;
    if membership.n() == 0 {
        return Err(Error::EmptySample);
    }
    model.check_population(pop)?;
    let probs: Vec<f64> = membership
        .sampled_indices()
        .map(|i| model.predict_unit(pop.unit(i)))
        .collect();
    let weights = weights_from_propensities(&probs, options.normalization, options.cap)?;
    let truth = population_stats(pop).mean;
    report_from_weights(
        &sampled_y(pop, membership),
        &weights,
        Some(truth),
        Some(model.clone()),
    )
}

/// True inclusion probabilities of a fixed-count two-stratum design over a
/// binary population: `n1 / N1` for sampled ones, `n0 / N0` for sampled
/// zeros. Returned in sample order.
pub fn stratum_inclusion_probabilities(
    pop: &Population,
    membership: &SampleMembership,
) -> Result<Vec<f64>> {
    membership.check_aligned(pop)?;
    pop.require_binary()?;
    let ones = pop.count_ones();
    let zeros = pop.len() - ones;
    let sampled_ones = membership
        .sampled_indices()
        .filter(|&i| pop.y(i) == 1.0)
        .count();
    let sampled_zeros = membership.n() - sampled_ones;
    Ok(membership
        .sampled_indices()
        .map(|i| {
            if pop.y(i) == 1.0 {
                sampled_ones as f64 / ones as f64
            } else {
                sampled_zeros as f64 / zeros as f64
            }
        })
        .collect())
}

/// Report for weights built from the true stratum probabilities.
pub fn evaluate_true_stratum_weights(
    pop: &Population,
    membership: &SampleMembership,
    options: &WeightingOptions,
) -> Result<MitigationReport> {
    let probs = stratum_inclusion_probabilities(pop, membership)?;
    let weights = weights_from_propensities(&probs, options.normalization, options.cap)?;
    report_from_weights(
        &sampled_y(pop, membership),
        &weights,
        Some(population_stats(pop).mean),
        None,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::Unit;

    #[test]
    fn four_unit_stratified_design_is_exact() {
        let pop = Population::from_values(&[1.0, 1.0, 0.0, 0.0]).unwrap();
        // One one, two... sample {0, 2, 3}: n1 = 1 of 2, n0 = 2 of 2.
        let m = SampleMembership::from_flags(vec![true, false, true, true]);
        let r = evaluate_true_stratum_weights(&pop, &m, &WeightingOptions::default()).unwrap();
        assert!((r.weighted_estimate - 0.5).abs() < 1e-12);
        assert!((r.unweighted_estimate - 1.0 / 3.0).abs() < 1e-15);
        assert!((r.bias_reduction_pct.unwrap() - 100.0).abs() < 1e-9);
    }

    #[test]
    fn equal_weights_change_nothing() {
        let units = (0..6)
            .map(|i| Unit::new(i.to_string(), (i % 2) as f64).with_covariates(vec![i as f64]))
            .collect();
        let pop = Population::new(units, vec!["x".into()]).unwrap();
        let m = SampleMembership::from_flags(vec![true, true, true, false, false, false]);
        let model = fit_propensity_on(&pop, &m, &[], &FitOptions::default()).unwrap();
        let r = evaluate_mitigation(&pop, &m, &model, &WeightingOptions::default()).unwrap();
        assert!((r.weighted_estimate - r.unweighted_estimate).abs() < 1e-15);
        assert!(r.bias_reduction_pct.unwrap().abs() < 1e-9);
    }

    #[test]
    fn unknown_truth_reports_no_verdict() {
        let w = weights_from_propensities(&[0.5, 0.25], Normalization::Hajek, None).unwrap();
        let r = report_from_weights(&[1.0, 0.0], &w, None, None).unwrap();
        assert!(r.bias_reduction_pct.is_none());
        let json = serde_json::to_value(&r).unwrap();
        assert!(json.get("true_mean").is_none());
        assert!(json.get("weights_summary").is_some());
    }
}
