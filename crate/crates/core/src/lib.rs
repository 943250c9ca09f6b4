//! Diagnostics for nonprobability samples drawn from a known finite
//! population.
//!
//! * [`population`]: populations and memberships with their CSV encoding.
//! * [`metrics`]: data-defect correlation, the error identity, effective
//!   sample size and the z a naive interval would need.
//! * [`sampler`]: simple random samples and fixed-size samples with a
//!   targeted defect correlation.
//! * [`montecarlo`]: replicated coverage and MSE experiments.
//! * [`mitigation`]: propensity models and inverse-probability weighting.
//! * [`grid`]: coarsening gridded occupancy data.
//! * [`fixtures`]: synthetic populations matching published summaries.

pub mod error;
pub mod fixtures;
pub mod grid;
pub mod metrics;
pub mod mitigation;
pub mod montecarlo;
pub mod population;
pub mod rng;
pub mod sampler;
pub mod summation;

pub use error::{Error, ErrorClass, Result};
pub use metrics::{
    defect_correlation, diagnose, effective_sample_size, error_decomposition, relative_reduction,
    required_z, DefectDiagnostics, EffectiveSampleSize, ErrorDecomposition,
};
pub use population::{
    load_population, population_stats, sample_stats, Cell, Population, SampleMembership, Schema,
    Unit,
};
pub use sampler::{feasible_rho_range, srs, targeted_rho_sample, SamplerSpec};
