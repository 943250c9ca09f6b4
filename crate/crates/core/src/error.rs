use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Broad failure classes, used by front ends to choose exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    /// Malformed input, bad configuration or an impossible request.
    Input,
    /// The statistics are undefined for the given data.
    Degenerate,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("empty table: no data rows")]
    EmptyTable,

    #[error("missing required column `{0}`")]
    MissingColumn(String),

    #[error("duplicate unit id `{0}`")]
    DuplicateId(String),

    #[error("line {line}: column `{column}`: {message}")]
    Parse {
        line: u64,
        column: String,
        message: String,
    },

    #[error("line {line}: ragged row, expected {expected} fields but found {found}")]
    RaggedRow {
        line: u64,
        expected: usize,
        found: usize,
    },

    #[error("unit `{id}` has {found} covariates, expected {expected}")]
    CovariateDimension {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("unit `{id}` has a non-finite value {value}")]
    NonFinite { id: String, value: f64 },

    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("empty sample")]
    EmptySample,

    #[error("empty population")]
    EmptyPopulation,

    #[error("correlation undefined: no sampling variation (n = {n}, N = {population})")]
    NoSamplingVariation { n: usize, population: usize },

    #[error("correlation undefined: constant study variable")]
    ConstantStudyVariable,

    #[error("study variable must be binary (0/1); unit `{id}` has y = {value}")]
    NonBinary { id: String, value: f64 },

    #[error(
        "target rho {target} is infeasible for n = {n}; attainable range is [{rho_min}, {rho_max}]"
    )]
    InfeasibleTarget {
        target: f64,
        n: usize,
        rho_min: f64,
        rho_max: f64,
    },

    #[error("population has no covariates")]
    MissingCovariates,

    #[error("unit `{0}` has no grid coordinates")]
    NotGridded(String),

    #[error("duplicate grid cell ({row}, {col})")]
    DuplicateCell { row: u32, col: u32 },

    #[error("inclusion probability {0} is outside (0, 1]")]
    InvalidProbability(f64),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::NoSamplingVariation { .. } | Error::ConstantStudyVariable => {
                ErrorClass::Degenerate
            }
            _ => ErrorClass::Input,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
