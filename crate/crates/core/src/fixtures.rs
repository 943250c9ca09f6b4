//! Synthetic populations that match published summary statistics.
//!
//! The heather-occupancy fixture reproduces the British example: 229,772
//! land-containing 1 km cells, of which 68,702 are occupied (mean 0.29900),
//! and 19,419 recorded cells whose defect correlation is -0.058. The cell
//! count of occupied cells is a reconstruction chosen to give the reported
//! mean to three decimals.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::population::{Population, SampleMembership, Unit};
use crate::rng::{mix64, rng_from_seed};
use crate::sampler::{self, targeted_allocation};

pub const CALLUNA_CELLS: usize = 229_772;
pub const CALLUNA_OCCUPIED: usize = 68_702;
pub const CALLUNA_SAMPLED: usize = 19_419;
pub const CALLUNA_RHO: f64 = -0.058;
pub const GRID_COLS: u32 = 480;

/// Fixed seed for the population itself; sampling seeds are separate.
const LANDSCAPE_SEED: u64 = 0x00C0_FFEE_2019;

/// Side length of the coarse blocks recorders are confined to.
const HOTSPOT_BLOCK: u32 = 10;
/// Share of blocks (in percent) that receive any recording effort.
const HOTSPOT_PERCENT: u64 = 45;

/// The gridded heather population. Covariates: `elevation` (tracks the
/// occupancy gradient) and `noise` (independent of everything).
pub fn calluna_population() -> Population {
    let mut rng = rng_from_seed(LANDSCAPE_SEED);
    let rows = CALLUNA_CELLS.div_ceil(GRID_COLS as usize) as f64;
    let mut scored: Vec<(f64, usize)> = Vec::with_capacity(CALLUNA_CELLS);
    let mut elevation = Vec::with_capacity(CALLUNA_CELLS);
    let mut noise = Vec::with_capacity(CALLUNA_CELLS);
    for i in 0..CALLUNA_CELLS {
        let row = (i / GRID_COLS as usize) as f64;
        let col = (i % GRID_COLS as usize) as f64;
        // Uplands in the north (low row index) and along a western ridge.
        let relief = 1.0 - row / rows + 0.3 * (col / 55.0).sin() * (row / 80.0).cos();
        let e = relief + 0.15 * rng.sample::<f64, _>(StandardNormal);
        let score = e + 0.35 * rng.sample::<f64, _>(StandardNormal);
        scored.push((score, i));
        elevation.push(e);
        noise.push(rng.sample::<f64, _>(StandardNormal));
    }
    scored.sort_by(|a, b| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1)));
    let mut occupied = vec![false; CALLUNA_CELLS];
    for &(_, i) in &scored[..CALLUNA_OCCUPIED] {
        occupied[i] = true;
    }
    let units = (0..CALLUNA_CELLS)
        .map(|i| {
            let row = (i / GRID_COLS as usize) as u32;
            let col = (i % GRID_COLS as usize) as u32;
            Unit::new(format!("c{i}"), occupied[i] as u8 as f64)
                .with_cell(row, col)
                .with_covariates(vec![elevation[i], noise[i]])
        })
        .collect();
    Population::new(units, vec!["elevation".into(), "noise".into()])
        .expect("fixture construction is valid")
}

/// Recorded cells drawn by the targeted sampler: n = 19,419, rho = -0.058.
pub fn calluna_sample(pop: &Population, seed: u64) -> Result<SampleMembership> {
    sampler::targeted_rho_sample(pop, CALLUNA_SAMPLED, CALLUNA_RHO, seed)
}

/// Same size and correlation as [`calluna_sample`], but recording is
/// confined to a fixed subset of 10 km blocks, the way volunteer effort
/// clusters around where recorders live.
pub fn calluna_clustered_sample(pop: &Population, seed: u64) -> Result<SampleMembership> {
    let alloc = targeted_allocation(pop, CALLUNA_SAMPLED, CALLUNA_RHO)?;
    let mut ones = Vec::new();
    let mut zeros = Vec::new();
    for (i, unit) in pop.units().iter().enumerate() {
        let Some(cell) = unit.cell else { continue };
        let block = ((cell.row / HOTSPOT_BLOCK) as u64) << 32 | (cell.col / HOTSPOT_BLOCK) as u64;
        if mix64(block ^ LANDSCAPE_SEED) % 100 >= HOTSPOT_PERCENT {
            continue;
        }
        if unit.y == 1.0 {
            ones.push(i);
        } else {
            zeros.push(i);
        }
    }
    let mut rng = rng_from_seed(seed);
    let mut picked: Vec<usize> = rand::seq::index::sample(&mut rng, ones.len(), alloc.ones)
        .into_iter()
        .map(|k| ones[k])
        .collect();
    picked.extend(
        rand::seq::index::sample(&mut rng, zeros.len(), alloc.zeros)
            .into_iter()
            .map(|k| zeros[k]),
    );
    SampleMembership::from_indices(pop.len(), &picked)
}

/// Parameters of a population whose inclusion follows a known logistic
/// model in one covariate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LogisticSelection {
    pub size: usize,
    /// Inclusion: `logit P(R = 1) = selection.0 + selection.1 * x`.
    pub selection: (f64, f64),
    /// Outcome: `logit P(Y = 1) = outcome.0 + outcome.1 * x`.
    pub outcome: (f64, f64),
    pub seed: u64,
}

impl LogisticSelection {
    /// N = 50,000 with inclusion coefficients (-2, 1.5).
    pub fn standard(seed: u64) -> Self {
        Self {
            size: 50_000,
            selection: (-2.0, 1.5),
            outcome: (-1.0, -1.2),
            seed,
        }
    }

    /// Heather-scale: about 19,400 of 229,772 units included, occupancy near
    /// 0.3, and the covariate alone drives selection.
    pub fn calluna_scale(seed: u64) -> Self {
        Self {
            size: CALLUNA_CELLS,
            selection: (-2.77, 1.0),
            outcome: (-1.05, -1.2),
            seed,
        }
    }

    /// Population with covariate `x` and binary outcome, plus the
    /// Bernoulli-drawn membership.
    pub fn generate(&self) -> (Population, SampleMembership) {
        let mut rng = rng_from_seed(self.seed);
        let logistic = crate::mitigation::logistic;
        let mut units = Vec::with_capacity(self.size);
        let mut flags = Vec::with_capacity(self.size);
        for i in 0..self.size {
            let x: f64 = rng.sample(StandardNormal);
            let p_sel = logistic(self.selection.0 + self.selection.1 * x);
            let p_y = logistic(self.outcome.0 + self.outcome.1 * x);
            let r = rng.random::<f64>() < p_sel;
            let y = (rng.random::<f64>() < p_y) as u8 as f64;
            units.push(Unit::new(format!("u{i}"), y).with_covariates(vec![x]));
            flags.push(r);
        }
        (
            Population::new(units, vec!["x".into()]).expect("fixture construction is valid"),
            SampleMembership::from_flags(flags),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::population::population_stats;

    #[test]
    fn logistic_fixture_is_deterministic() {
        let spec = LogisticSelection {
            size: 500,
            ..LogisticSelection::standard(3)
        };
        let (a, ma) = spec.generate();
        let (b, mb) = spec.generate();
        assert_eq!(a, b);
        assert_eq!(ma, mb);
        assert!(ma.n() > 0 && ma.n() < 500);
        let stats = population_stats(&a);
        assert!(stats.mean > 0.1 && stats.mean < 0.6);
    }
}
