//! Data-defect diagnostics for a sample drawn from a known finite population.
//!
//! The estimation error of a sample mean factors exactly as
//!
//! ```text
//! mean_sample - mean_population = rho(R, Y) * sqrt((1 - f) / f) * sigma_Y
//! ```
//!
//! where `rho(R, Y)` is the population correlation between the inclusion
//! indicator and the study variable, `f = n / N` and `sigma_Y` is the
//! divide-by-N population standard deviation. The effective sample size is
//! the size of a simple random sample with the same mean squared error,
//! `n_eff = f / (1 - f) / rho^2`, using the realized `rho` in place of its
//! expectation over the selection mechanism.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{population_stats, sample_stats, Population, SampleMembership};
use crate::summation::NeumaierSum;

/// Pearson correlation over all `N` units between the inclusion indicator
/// and `y`.
pub fn defect_correlation(pop: &Population, membership: &SampleMembership) -> Result<f64> {
    membership.check_aligned(pop)?;
    let n = membership.n();
    let big_n = pop.len();
    if n == 0 || n == big_n {
        return Err(Error::NoSamplingVariation {
            n,
            population: big_n,
        });
    }
    let first = pop.y(0);
    if pop.y_values().all(|y| y == first) {
        return Err(Error::ConstantStudyVariable);
    }
    let stats = population_stats(pop);
    let f = n as f64 / big_n as f64;
    let mut cov = NeumaierSum::new();
    for (i, y) in pop.y_values().enumerate() {
        let r = if membership.contains(i) { 1.0 } else { 0.0 };
        cov.add((r - f) * (y - stats.mean));
    }
    let cov = cov.total() / big_n as f64;
    let sigma_r = (f * (1.0 - f)).sqrt();
    Ok((cov / (sigma_r * stats.sd)).clamp(-1.0, 1.0))
}

/// The three factors of the error identity alongside the directly computed
/// error.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ErrorDecomposition {
    pub rho: f64,
    pub f: f64,
    pub sigma_y: f64,
    /// `sqrt((1 - f) / f)`.
    pub dropout_factor: f64,
    /// Sample mean minus population mean, computed directly.
    pub actual_error: f64,
    pub sample_mean: f64,
    pub population_mean: f64,
    pub n: usize,
    pub population_size: usize,
}

impl ErrorDecomposition {
    /// `rho * dropout_factor * sigma_y`; equals `actual_error` up to rounding.
    pub fn product(&self) -> f64 {
        self.rho * self.dropout_factor * self.sigma_y
    }
}

pub fn error_decomposition(
    pop: &Population,
    membership: &SampleMembership,
) -> Result<ErrorDecomposition> {
    let rho = defect_correlation(pop, membership)?;
    let pstats = population_stats(pop);
    let sstats = sample_stats(pop, membership)?;
    let f = membership.n() as f64 / pop.len() as f64;
    // Difference of means taken on centered values, so its rounding error
    // scales with sigma_y rather than with |mean|.
    let shift = pstats.mean;
    let mut sampled = NeumaierSum::new();
    let mut all = NeumaierSum::new();
    for (i, y) in pop.y_values().enumerate() {
        all.add(y - shift);
        if membership.contains(i) {
            sampled.add(y - shift);
        }
    }
    let actual_error = sampled.total() / membership.n() as f64 - all.total() / pop.len() as f64;
    Ok(ErrorDecomposition {
        rho,
        f,
        sigma_y: pstats.sd,
        dropout_factor: ((1.0 - f) / f).sqrt(),
        actual_error,
        sample_mean: sstats.mean,
        population_mean: pstats.mean,
        n: membership.n(),
        population_size: pop.len(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveSampleSize {
    pub value: f64,
    /// The formula exceeded `N` (or diverged) and was capped at the census size.
    pub clamped: bool,
}

impl EffectiveSampleSize {
    /// Integer view, rounded up: 27.4 reports as 28.
    pub fn ceil(&self) -> u64 {
        self.value.ceil() as u64
    }
}

pub fn effective_sample_size(
    rho: f64,
    n: usize,
    population_size: usize,
) -> Result<EffectiveSampleSize> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if n > population_size {
        return Err(Error::invalid(format!(
            "sample size {n} exceeds population size {population_size}"
        )));
    }
    if !(rho.abs() <= 1.0) {
        return Err(Error::invalid(format!("correlation {rho} outside [-1, 1]")));
    }
    let cap = EffectiveSampleSize {
        value: population_size as f64,
        clamped: true,
    };
    if rho == 0.0 || n == population_size {
        return Ok(cap);
    }
    let f = n as f64 / population_size as f64;
    let value = f / (1.0 - f) / (rho * rho);
    if value > population_size as f64 {
        return Ok(cap);
    }
    Ok(EffectiveSampleSize {
        value,
        clamped: false,
    })
}

/// Half-width multiplier a normal interval needs to cover the truth:
/// `sqrt(n / n_eff)`.
pub fn required_z(n: usize, n_eff: f64) -> f64 {
    (n as f64 / n_eff).sqrt()
}

/// `1 - n_eff / n`. Fails when `n_eff > n`, which means the caller is
/// comparing against a census-clamped or better-than-SRS value.
pub fn relative_reduction(n: usize, n_eff: f64) -> Result<f64> {
    if n == 0 {
        return Err(Error::EmptySample);
    }
    if !(n_eff > 0.0) {
        return Err(Error::invalid(format!(
            "effective sample size must be positive, got {n_eff}"
        )));
    }
    if n_eff > n as f64 {
        return Err(Error::invalid(format!(
            "effective sample size {n_eff} exceeds the sample size {n}"
        )));
    }
    Ok(1.0 - n_eff / n as f64)
}

/// Full diagnostic record for one sample.
///
/// `required_z` and `relative_reduction` are computed from the reported
/// effective size `min(ceil(n_eff), n)`; a sample at least as informative
/// as a simple random sample of its own size gets `required_z = 1` and no
/// reduction.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DefectDiagnostics {
    pub rho: f64,
    pub f: f64,
    pub sigma_y: f64,
    pub dropout_factor: f64,
    pub actual_error: f64,
    pub n_eff: f64,
    pub n_eff_clamped: bool,
    pub n_eff_ceil: u64,
    pub required_z: f64,
    pub relative_reduction: f64,
    pub n: usize,
    pub population_size: usize,
    pub sample_mean: f64,
    pub population_mean: f64,
}

impl DefectDiagnostics {
    /// The effective size `required_z` and `relative_reduction` refer to.
    pub fn reported_n_eff(&self) -> u64 {
        self.n_eff_ceil.min(self.n as u64)
    }
}

pub fn diagnose(pop: &Population, membership: &SampleMembership) -> Result<DefectDiagnostics> {
    let parts = error_decomposition(pop, membership)?;
    let n_eff = effective_sample_size(parts.rho, parts.n, parts.population_size)?;
    let reported = n_eff.ceil().min(parts.n as u64).max(1) as f64;
    Ok(DefectDiagnostics {
        rho: parts.rho,
        f: parts.f,
        sigma_y: parts.sigma_y,
        dropout_factor: parts.dropout_factor,
        actual_error: parts.actual_error,
        n_eff: n_eff.value,
        n_eff_clamped: n_eff.clamped,
        n_eff_ceil: n_eff.ceil(),
        required_z: required_z(parts.n, reported),
        relative_reduction: relative_reduction(parts.n, reported)?,
        n: parts.n,
        population_size: parts.population_size,
        sample_mean: parts.sample_mean,
        population_mean: parts.population_mean,
    })
}
