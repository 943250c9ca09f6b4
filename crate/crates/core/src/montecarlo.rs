//! Replicated sampling experiments: normal-approximation intervals,
//! empirical coverage, mean squared error, and plot-ready distributions.
//!
//! The interval is the naive analyst's one: `mean ± z * s / sqrt(n)` with
//! `s` the divide-by-(n-1) sample standard deviation and no finite
//! population correction. Coverage is judged against the exact population
//! mean.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::population::{population_stats, Population};
use crate::rng::replicate_seed;
use crate::sampler::{PreparedSampler, SamplerSpec};
use crate::summation::{self, NeumaierSum};

pub const DEFAULT_HISTOGRAM_BINS: usize = 40;

fn default_bins() -> usize {
    DEFAULT_HISTOGRAM_BINS
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub sampler: SamplerSpec,
    pub replicates: usize,
    pub ci_level: f64,
    pub master_seed: u64,
    #[serde(default = "default_bins")]
    pub histogram_bins: usize,
}

impl ExperimentConfig {
    pub fn new(sampler: SamplerSpec, replicates: usize, ci_level: f64, master_seed: u64) -> Self {
        Self {
            sampler,
            replicates,
            ci_level,
            master_seed,
            histogram_bins: DEFAULT_HISTOGRAM_BINS,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.sampler.validate()?;
        if self.replicates == 0 {
            return Err(Error::invalid("replicates must be at least 1"));
        }
        check_level(self.ci_level)?;
        if self.histogram_bins == 0 {
            return Err(Error::invalid("histogram_bins must be at least 1"));
        }
        Ok(())
    }
}

fn check_level(level: f64) -> Result<()> {
    if level > 0.0 && level < 1.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("ci_level {level} outside (0, 1)")))
    }
}

/// Two-sided standard normal quantile for coverage `level`.
pub fn normal_quantile(level: f64) -> Result<f64> {
    check_level(level)?;
    let normal = Normal::standard();
    Ok(normal.inverse_cdf(1.0 - (1.0 - level) / 2.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConfidenceInterval {
    pub lo: f64,
    pub hi: f64,
}

impl ConfidenceInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lo <= value && value <= self.hi
    }

    pub fn half_width(&self) -> f64 {
        (self.hi - self.lo) / 2.0
    }
}

pub fn normal_ci(estimate: f64, sd_est: f64, n: usize, level: f64) -> Result<ConfidenceInterval> {
    if n < 2 {
        return Err(Error::invalid(format!(
            "a normal interval needs n >= 2, got {n}"
        )));
    }
    if !(sd_est >= 0.0) {
        return Err(Error::invalid(format!(
            "standard deviation {sd_est} is negative"
        )));
    }
    let half = normal_quantile(level)? * sd_est / (n as f64).sqrt();
    Ok(ConfidenceInterval {
        lo: estimate - half,
        hi: estimate + half,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
}

impl Histogram {
    /// Equal-width bins over the observed range; the maximum lands in the
    /// last bin. A zero-width range puts everything in the first bin.
    pub fn from_values(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let mut counts = vec![0u64; bins];
        if values.is_empty() {
            return Self {
                lo: 0.0,
                hi: 0.0,
                counts,
            };
        }
        let width = (hi - lo) / bins as f64;
        for &v in values {
            let k = if width > 0.0 {
                (((v - lo) / width) as usize).min(bins - 1)
            } else {
                0
            };
            counts[k] += 1;
        }
        Self { lo, hi, counts }
    }

    pub fn edges(&self, bin: usize) -> (f64, f64) {
        let width = (self.hi - self.lo) / self.counts.len() as f64;
        let left = self.lo + width * bin as f64;
        let right = if bin + 1 == self.counts.len() {
            self.hi
        } else {
            self.lo + width * (bin + 1) as f64
        };
        (left, right)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub count: usize,
    pub mean: f64,
    /// Divide-by-(count-1); zero for a single value.
    pub sd: f64,
    pub histogram: Histogram,
}

impl Summary {
    /// Sums run over the sorted values, so the result does not depend on
    /// replicate order.
    pub fn from_values(values: &[f64], bins: usize) -> Self {
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let count = sorted.len();
        let mean = summation::mean(&sorted).unwrap_or(f64::NAN);
        let sd = if count > 1 {
            let ss: NeumaierSum = sorted.iter().map(|v| (v - mean) * (v - mean)).collect();
            (ss.total() / (count - 1) as f64).sqrt()
        } else {
            0.0
        };
        Self {
            count,
            mean,
            sd,
            histogram: Histogram::from_values(&sorted, bins),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicateOutcome {
    pub replicate: usize,
    pub seed: u64,
    pub estimate: f64,
    pub sd: f64,
    pub interval: ConfidenceInterval,
    pub covers: bool,
    pub squared_error: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub sampler: SamplerSpec,
    pub ci_level: f64,
    pub master_seed: u64,
    pub true_mean: f64,
    pub replicates: usize,
    pub covered: usize,
    /// `covered / replicates`.
    pub coverage: f64,
    pub mse: f64,
    pub mean_estimate: f64,
    pub estimates: Summary,
    pub squared_errors: Summary,
    #[serde(skip)]
    pub outcomes: Vec<ReplicateOutcome>,
}

fn run_replicate(
    pop: &Population,
    sampler: &PreparedSampler,
    truth: f64,
    z: f64,
    master_seed: u64,
    replicate: usize,
) -> ReplicateOutcome {
    let seed = replicate_seed(master_seed, replicate as u64);
    let idx = sampler.draw_indices(seed);
    let n = idx.len() as f64;
    let estimate = summation::sum(idx.iter().map(|&i| pop.y(i))) / n;
    let ss = summation::sum(idx.iter().map(|&i| {
        let d = pop.y(i) - estimate;
        d * d
    }));
    let sd = (ss / (n - 1.0)).sqrt();
    let half = z * sd / n.sqrt();
    let interval = ConfidenceInterval {
        lo: estimate - half,
        hi: estimate + half,
    };
    ReplicateOutcome {
        replicate,
        seed,
        estimate,
        sd,
        interval,
        covers: interval.contains(truth),
        squared_error: (estimate - truth) * (estimate - truth),
    }
}

/// Aggregates outcomes given in any order.
pub fn aggregate(
    cfg: &ExperimentConfig,
    true_mean: f64,
    mut outcomes: Vec<ReplicateOutcome>,
) -> CoverageResult {
    outcomes.sort_by_key(|o| o.replicate);
    let estimates: Vec<f64> = outcomes.iter().map(|o| o.estimate).collect();
    let squared: Vec<f64> = outcomes.iter().map(|o| o.squared_error).collect();
    let covered = outcomes.iter().filter(|o| o.covers).count();
    let estimates = Summary::from_values(&estimates, cfg.histogram_bins);
    let squared_errors = Summary::from_values(&squared, cfg.histogram_bins);
    CoverageResult {
        sampler: cfg.sampler,
        ci_level: cfg.ci_level,
        master_seed: cfg.master_seed,
        true_mean,
        replicates: outcomes.len(),
        covered,
        coverage: covered as f64 / outcomes.len() as f64,
        mse: squared_errors.mean,
        mean_estimate: estimates.mean,
        estimates,
        squared_errors,
        outcomes,
    }
}

/// Runs `cfg.replicates` independent draws. Replicate `r` uses
/// `replicate_seed(cfg.master_seed, r)`, so the parallel schedule cannot
/// change the result.
pub fn run_experiment(pop: &Population, cfg: &ExperimentConfig) -> Result<CoverageResult> {
    cfg.validate()?;
    let sampler = PreparedSampler::new(pop, &cfg.sampler)?;
    if sampler.n() < 2 {
        return Err(Error::invalid(
            "coverage experiments need samples of at least 2 units",
        ));
    }
    let z = normal_quantile(cfg.ci_level)?;
    let truth = population_stats(pop).mean;
    let outcomes: Vec<ReplicateOutcome> = (0..cfg.replicates)
        .into_par_iter()
        .map(|r| run_replicate(pop, &sampler, truth, z, cfg.master_seed, r))
        .collect();
    Ok(aggregate(cfg, truth, outcomes))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MseParity {
    pub mse_small_srs: f64,
    pub mse_biased: f64,
    /// `mse_biased / mse_small_srs`.
    pub ratio: f64,
}

/// Compares a small simple random sample (conventionally of size
/// `ceil(n_eff)` of the biased design) with the large biased design.
pub fn mse_parity(
    pop: &Population,
    small_srs: &ExperimentConfig,
    biased: &ExperimentConfig,
) -> Result<MseParity> {
    let a = run_experiment(pop, small_srs)?;
    let b = run_experiment(pop, biased)?;
    Ok(MseParity {
        mse_small_srs: a.mse,
        mse_biased: b.mse,
        ratio: b.mse / a.mse,
    })
}

pub fn write_replicates_csv<W: Write>(sink: W, result: &CoverageResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["replicate", "estimate", "squared_error"])?;
    for o in &result.outcomes {
        w.write_record([
            o.replicate.to_string(),
            o.estimate.to_string(),
            o.squared_error.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_histogram_csv<W: Write>(sink: W, result: &CoverageResult) -> Result<()> {
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(["series", "bin", "lo", "hi", "count"])?;
    for (series, summary) in [
        ("estimate", &result.estimates),
        ("squared_error", &result.squared_errors),
    ] {
        let h = &summary.histogram;
        for (bin, count) in h.counts.iter().enumerate() {
            let (lo, hi) = h.edges(bin);
            w.write_record([
                series.to_string(),
                bin.to_string(),
                lo.to_string(),
                hi.to_string(),
                count.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(())
}

/// Writes `replicates.csv` and `histogram.csv` into `dir`.
pub fn export_distributions(result: &CoverageResult, dir: &Path) -> Result<(PathBuf, PathBuf)> {
    fs::create_dir_all(dir)?;
    let replicates = dir.join("replicates.csv");
    let histogram = dir.join("histogram.csv");
    write_replicates_csv(fs::File::create(&replicates)?, result)?;
    write_histogram_csv(fs::File::create(&histogram)?, result)?;
    Ok((replicates, histogram))
}
