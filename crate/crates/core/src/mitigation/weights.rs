use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::summation::{self, NeumaierSum};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Normalization {
    /// Weights rescaled to mean 1; the weighted mean is the ratio estimator.
    #[default]
    Hajek,
    /// Raw inverse probabilities.
    HorvitzThompson,
}

/// Design weights over the sampled units, in sample order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightSet {
    pub weights: Vec<f64>,
    pub normalization: Normalization,
    pub cap: Option<f64>,
    /// How many raw weights the cap truncated.
    pub capped: usize,
}

impl WeightSet {
    pub fn len(&self) -> usize {
        self.weights.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weights.is_empty()
    }

    pub fn summary(&self) -> WeightSummary {
        WeightSummary::from_weights(&self.weights)
    }
}

/// `w_i = 1 / p_i`, truncated at `cap` when given, then normalized.
pub fn weights_from_propensities(
    probs: &[f64],
    normalization: Normalization,
    cap: Option<f64>,
) -> Result<WeightSet> {
    if probs.is_empty() {
        return Err(Error::EmptySample);
    }
    if let Some(c) = cap {
        if !(c > 0.0 && c.is_finite()) {
            return Err(Error::invalid(format!("weight cap {c} must be positive")));
        }
    }
    let mut capped = 0;
    let mut weights = Vec::with_capacity(probs.len());
    for &p in probs {
        if !(p > 0.0 && p <= 1.0) {
            return Err(Error::InvalidProbability(p));
        }
        let mut w = 1.0 / p;
        if let Some(c) = cap {
            if w > c {
                w = c;
                capped += 1;
            }
        }
        weights.push(w);
    }
    if normalization == Normalization::Hajek {
        let mean = summation::sum(weights.iter().copied()) / weights.len() as f64;
        for w in &mut weights {
            *w /= mean;
        }
    }
    Ok(WeightSet {
        weights,
        normalization,
        cap,
        capped,
    })
}

fn check_lengths(y: &[f64], w: &WeightSet) -> Result<()> {
    if y.len() != w.len() {
        return Err(Error::LengthMismatch {
            expected: w.len(),
            found: y.len(),
        });
    }
    if y.is_empty() {
        return Err(Error::EmptySample);
    }
    Ok(())
}

/// `sum w y / sum w`.
pub fn weighted_mean(y: &[f64], w: &WeightSet) -> Result<f64> {
    check_lengths(y, w)?;
    let mut num = NeumaierSum::new();
    let mut den = NeumaierSum::new();
    for (&yi, &wi) in y.iter().zip(&w.weights) {
        num.add(wi * yi);
        den.add(wi);
    }
    let den = den.total();
    if !(den > 0.0) {
        return Err(Error::invalid("weights sum to zero"));
    }
    Ok(num.total() / den)
}

/// `sum w y`: the Horvitz-Thompson total when `w` holds raw inverse
/// probabilities.
pub fn weighted_total(y: &[f64], w: &WeightSet) -> Result<f64> {
    check_lengths(y, w)?;
    Ok(summation::sum(y.iter().zip(&w.weights).map(|(a, b)| a * b)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightSummary {
    pub count: usize,
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    /// Coefficient of variation, population convention.
    pub cv: f64,
}

impl WeightSummary {
    pub fn from_weights(weights: &[f64]) -> Self {
        let count = weights.len();
        let mean = summation::mean(weights).unwrap_or(f64::NAN);
        let sd = summation::std_dev(weights, 0).unwrap_or(f64::NAN);
        Self {
            count,
            min: weights.iter().copied().fold(f64::INFINITY, f64::min),
            max: weights.iter().copied().fold(f64::NEG_INFINITY, f64::max),
            mean,
            cv: sd / mean,
        }
    }
}
