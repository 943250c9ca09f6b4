//! Membership generators: simple random samples and fixed-size samples of
//! binary populations engineered to hit a target defect correlation.
//!
//! For a binary population with `N1` ones (`p = N1 / N`) and a sample of
//! size `n` (`f = n / N`), the realized correlation depends only on how many
//! ones are sampled:
//!
//! ```text
//! rho(n1) = (n1 / N - f p) / (sigma_R sigma_Y),
//! sigma_R = sqrt(f (1 - f)),  sigma_Y = sqrt(p (1 - p))
//! ```
//!
//! The targeted sampler solves for `n1`, rounds half to even, and draws `n1`
//! units uniformly from the ones and `n - n1` from the zeros. Rounding moves
//! `n1` by at most one half, so `|rho - target| <= 1 / (N sigma_R sigma_Y)`.

use rand::seq::index;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{Population, SampleMembership};
use crate::rng::rng_from_seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum SamplerSpec {
    Srs {
        n: usize,
        #[serde(default)]
        seed: u64,
    },
    TargetedRho {
        n: usize,
        target_rho: f64,
        #[serde(default)]
        seed: u64,
    },
}

impl SamplerSpec {
    pub fn n(&self) -> usize {
        match *self {
            SamplerSpec::Srs { n, .. } | SamplerSpec::TargetedRho { n, .. } => n,
        }
    }

    pub fn seed(&self) -> u64 {
        match *self {
            SamplerSpec::Srs { seed, .. } | SamplerSpec::TargetedRho { seed, .. } => seed,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            SamplerSpec::Srs { .. } => "srs",
            SamplerSpec::TargetedRho { .. } => "targeted_rho",
        }
    }

    /// Checks what can be checked without a population.
    pub fn validate(&self) -> Result<()> {
        if self.n() == 0 {
            return Err(Error::invalid("sample size must be at least 1"));
        }
        if let SamplerSpec::TargetedRho { target_rho, .. } = *self {
            if !(target_rho.abs() <= 1.0) {
                return Err(Error::invalid(format!(
                    "target_rho {target_rho} outside [-1, 1]"
                )));
            }
        }
        Ok(())
    }
}

/// Counts of sampled ones and zeros.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Allocation {
    pub ones: usize,
    pub zeros: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RhoRange {
    pub min: f64,
    pub max: f64,
}

/// Sufficient statistics of a binary population for the targeted sampler.
#[derive(Debug, Clone, Copy)]
struct BinaryFrame {
    population_size: usize,
    ones: usize,
    n: usize,
}

impl BinaryFrame {
    fn new(pop: &Population, n: usize) -> Result<Self> {
        pop.require_binary()?;
        let population_size = pop.len();
        if n == 0 || n >= population_size {
            return Err(Error::NoSamplingVariation {
                n,
                population: population_size,
            });
        }
        let ones = pop.count_ones();
        if ones == 0 || ones == population_size {
            return Err(Error::ConstantStudyVariable);
        }
        Ok(Self {
            population_size,
            ones,
            n,
        })
    }

    fn zeros(&self) -> usize {
        self.population_size - self.ones
    }

    fn scale(&self) -> f64 {
        let big_n = self.population_size as f64;
        let f = self.n as f64 / big_n;
        let p = self.ones as f64 / big_n;
        (f * (1.0 - f)).sqrt() * (p * (1.0 - p)).sqrt()
    }

    /// Exact numerator `n1 N - n N1` keeps the cancellation in integers.
    fn rho(&self, sampled_ones: usize) -> f64 {
        let big_n = self.population_size as i128;
        let num = sampled_ones as i128 * big_n - self.n as i128 * self.ones as i128;
        num as f64 / (big_n * big_n) as f64 / self.scale()
    }

    fn ones_bounds(&self) -> (usize, usize) {
        (self.n.saturating_sub(self.zeros()), self.n.min(self.ones))
    }

    fn range(&self) -> RhoRange {
        let (lo, hi) = self.ones_bounds();
        RhoRange {
            min: self.rho(lo),
            max: self.rho(hi),
        }
    }

    fn allocation(&self, target_rho: f64) -> Result<Allocation> {
        let big_n = self.population_size as f64;
        let ideal = self.n as f64 * self.ones as f64 / big_n + target_rho * big_n * self.scale();
        let rounded = ideal.round_ties_even();
        let (lo, hi) = self.ones_bounds();
        if !(rounded >= lo as f64 && rounded <= hi as f64) {
            let range = self.range();
            return Err(Error::InfeasibleTarget {
                target: target_rho,
                n: self.n,
                rho_min: range.min,
                rho_max: range.max,
            });
        }
        let ones = rounded as usize;
        Ok(Allocation {
            ones,
            zeros: self.n - ones,
        })
    }
}

/// Attainable correlations for samples of size `n`.
pub fn feasible_rho_range(pop: &Population, n: usize) -> Result<RhoRange> {
    Ok(BinaryFrame::new(pop, n)?.range())
}

/// The `(ones, zeros)` split the targeted sampler will draw.
pub fn targeted_allocation(pop: &Population, n: usize, target_rho: f64) -> Result<Allocation> {
    if !(target_rho.abs() <= 1.0) {
        return Err(Error::invalid(format!(
            "target_rho {target_rho} outside [-1, 1]"
        )));
    }
    BinaryFrame::new(pop, n)?.allocation(target_rho)
}

/// Correlation realized by drawing `sampled_ones` ones in a sample of `n`.
pub fn allocation_rho(pop: &Population, n: usize, sampled_ones: usize) -> Result<f64> {
    Ok(BinaryFrame::new(pop, n)?.rho(sampled_ones))
}

/// Worst-case distance between realized and target rho: `1 / (N sigma_R sigma_Y)`.
pub fn rounding_bound(pop: &Population, n: usize) -> Result<f64> {
    let frame = BinaryFrame::new(pop, n)?;
    Ok(1.0 / (frame.population_size as f64 * frame.scale()))
}

/// A sampler with its per-population preprocessing done, for repeated draws.
#[derive(Debug, Clone)]
pub enum PreparedSampler {
    Srs {
        population_size: usize,
        n: usize,
    },
    Stratified {
        ones: Vec<usize>,
        zeros: Vec<usize>,
        allocation: Allocation,
    },
}

impl PreparedSampler {
    pub fn new(pop: &Population, spec: &SamplerSpec) -> Result<Self> {
        spec.validate()?;
        match *spec {
            SamplerSpec::Srs { n, .. } => {
                if n > pop.len() {
                    return Err(Error::invalid(format!(
                        "sample size {n} exceeds population size {}",
                        pop.len()
                    )));
                }
                Ok(PreparedSampler::Srs {
                    population_size: pop.len(),
                    n,
                })
            }
            SamplerSpec::TargetedRho { n, target_rho, .. } => {
                let allocation = targeted_allocation(pop, n, target_rho)?;
                let (ones, zeros): (Vec<usize>, Vec<usize>) =
                    (0..pop.len()).partition(|&i| pop.y(i) == 1.0);
                Ok(PreparedSampler::Stratified {
                    ones,
                    zeros,
                    allocation,
                })
            }
        }
    }

    pub fn n(&self) -> usize {
        match self {
            PreparedSampler::Srs { n, .. } => *n,
            PreparedSampler::Stratified { allocation, .. } => allocation.ones + allocation.zeros,
        }
    }

    pub fn population_size(&self) -> usize {
        match self {
            PreparedSampler::Srs {
                population_size, ..
            } => *population_size,
            PreparedSampler::Stratified { ones, zeros, .. } => ones.len() + zeros.len(),
        }
    }

    /// Indices of the sampled units, in draw order.
    pub fn draw_indices(&self, seed: u64) -> Vec<usize> {
        let mut rng = rng_from_seed(seed);
        match self {
            PreparedSampler::Srs { population_size, n } => {
                index::sample(&mut rng, *population_size, *n).into_vec()
            }
            PreparedSampler::Stratified {
                ones,
                zeros,
                allocation,
            } => {
                let mut out = Vec::with_capacity(allocation.ones + allocation.zeros);
                out.extend(
                    index::sample(&mut rng, ones.len(), allocation.ones)
                        .into_iter()
                        .map(|k| ones[k]),
                );
                out.extend(
                    index::sample(&mut rng, zeros.len(), allocation.zeros)
                        .into_iter()
                        .map(|k| zeros[k]),
                );
                out
            }
        }
    }

    pub fn draw(&self, seed: u64) -> SampleMembership {
        SampleMembership::from_indices(self.population_size(), &self.draw_indices(seed))
            .expect("sampler indices are distinct and in range")
    }
}

/// Uniform without-replacement sample of exactly `n` units.
pub fn srs(pop: &Population, n: usize, seed: u64) -> Result<SampleMembership> {
    Ok(PreparedSampler::new(pop, &SamplerSpec::Srs { n, seed })?.draw(seed))
}

/// Fixed-size sample of a binary population whose defect correlation is the
/// closest attainable to `target_rho` (up to half-even rounding of the
/// sampled-ones count).
pub fn targeted_rho_sample(
    pop: &Population,
    n: usize,
    target_rho: f64,
    seed: u64,
) -> Result<SampleMembership> {
    let spec = SamplerSpec::TargetedRho {
        n,
        target_rho,
        seed,
    };
    Ok(PreparedSampler::new(pop, &spec)?.draw(seed))
}

/// Draws a membership as described by `spec`, using the spec's own seed.
pub fn sample(pop: &Population, spec: &SamplerSpec) -> Result<SampleMembership> {
    Ok(PreparedSampler::new(pop, spec)?.draw(spec.seed()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::defect_correlation;

    fn four() -> Population {
        Population::from_values(&[1.0, 1.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn srs_of_full_size_is_census() {
        let m = srs(&four(), 4, 3).unwrap();
        assert_eq!(m, SampleMembership::census(4));
        assert!(srs(&four(), 5, 3).is_err());
        assert!(srs(&four(), 0, 3).is_err());
    }

    #[test]
    fn srs_inclusion_frequency_is_half() {
        let pop = four();
        let sampler = PreparedSampler::new(&pop, &SamplerSpec::Srs { n: 2, seed: 0 }).unwrap();
        let draws = 10_000u64;
        let mut counts = [0usize; 4];
        for r in 0..draws {
            for i in sampler.draw_indices(crate::rng::replicate_seed(99, r)) {
                counts[i] += 1;
            }
        }
        for c in counts {
            let freq = c as f64 / draws as f64;
            assert!((freq - 0.5).abs() <= 0.02, "{freq}");
        }
    }

    #[test]
    fn target_one_picks_the_two_ones() {
        let m = targeted_rho_sample(&four(), 2, 1.0, 11).unwrap();
        assert_eq!(m.flags(), &[true, true, false, false]);
        assert!((defect_correlation(&four(), &m).unwrap() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn zero_target_is_proportionate() {
        let pop = Population::from_values(
            &(0..100)
                .map(|i| if i < 30 { 1.0 } else { 0.0 })
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let alloc = targeted_allocation(&pop, 20, 0.0).unwrap();
        assert_eq!(alloc, Allocation { ones: 6, zeros: 14 });
        let m = targeted_rho_sample(&pop, 20, 0.0, 5).unwrap();
        assert_eq!(m.n(), 20);
        assert!(defect_correlation(&pop, &m).unwrap().abs() < 1e-12);
    }

    #[test]
    fn half_even_rounding_of_sampled_ones() {
        // n p = 1.5 with target 0 -> rounds to 2.
        let pop = Population::from_values(&[1.0, 1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(targeted_allocation(&pop, 3, 0.0).unwrap().ones, 2);
        // 8 units, 3 ones, n = 4: n p = 1.5 -> 2.
        let pop = Population::from_values(&[1.0, 1.0, 1.0, 0.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(targeted_allocation(&pop, 4, 0.0).unwrap().ones, 2);
        // 8 units, 5 ones, n = 4: n p = 2.5 -> 2.
        let pop = Population::from_values(&[1.0, 1.0, 1.0, 1.0, 1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!(targeted_allocation(&pop, 4, 0.0).unwrap().ones, 2);
    }

    #[test]
    fn infeasible_target_names_the_range() {
        let pop = Population::from_values(&[1.0, 0.0, 0.0, 0.0, 0.0]).unwrap();
        let err = targeted_rho_sample(&pop, 4, 0.9, 1).unwrap_err();
        match err {
            Error::InfeasibleTarget {
                rho_min, rho_max, ..
            } => {
                assert!(rho_min < rho_max);
                assert!(rho_max < 0.9);
            }
            other => panic!("unexpected {other}"),
        }
        assert!(err_msg(&pop).contains("attainable range"));
    }

    fn err_msg(pop: &Population) -> String {
        targeted_rho_sample(pop, 4, 0.9, 1).unwrap_err().to_string()
    }

    #[test]
    fn non_binary_and_constant_populations_are_rejected() {
        let pop = Population::from_values(&[1.0, 0.5, 0.0]).unwrap();
        assert!(matches!(
            targeted_rho_sample(&pop, 1, 0.0, 0),
            Err(Error::NonBinary { .. })
        ));
        let zeros = Population::from_values(&[0.0; 4]).unwrap();
        assert!(matches!(
            feasible_rho_range(&zeros, 2),
            Err(Error::ConstantStudyVariable)
        ));
    }

    #[test]
    fn feasible_range_of_four_unit_fixture() {
        let r = feasible_rho_range(&four(), 2).unwrap();
        assert!((r.min + 1.0).abs() < 1e-15);
        assert!((r.max - 1.0).abs() < 1e-15);
    }

    #[test]
    fn draws_are_deterministic_given_seed() {
        let pop = Population::from_values(
            &(0..1000)
                .map(|i| (i % 3 == 0) as u8 as f64)
                .collect::<Vec<_>>(),
        )
        .unwrap();
        let a = targeted_rho_sample(&pop, 100, -0.1, 42).unwrap();
        let b = targeted_rho_sample(&pop, 100, -0.1, 42).unwrap();
        let c = targeted_rho_sample(&pop, 100, -0.1, 43).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
        assert_eq!(a.n(), 100);
    }

    #[test]
    fn sampler_spec_json_shape() {
        let spec = SamplerSpec::TargetedRho {
            n: 19_419,
            target_rho: -0.058,
            seed: 7,
        };
        let text = serde_json::to_string(&spec).unwrap();
        assert_eq!(
            text,
            r#"{"kind":"targeted_rho","n":19419,"target_rho":-0.058,"seed":7}"#
        );
        let srs: SamplerSpec = serde_json::from_str(r#"{"kind":"srs","n":28}"#).unwrap();
        assert_eq!(srs, SamplerSpec::Srs { n: 28, seed: 0 });
        assert!(serde_json::from_str::<SamplerSpec>(r#"{"kind":"bernoulli","n":3}"#).is_err());
    }
}
