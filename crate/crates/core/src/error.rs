use thiserror::Error;

/// Errors raised by fitting, inference and data plumbing.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid family parameters: {0}")]
    InvalidFamily(String),

    #[error("non-finite loss contribution at observation {index}")]
    NumericOverflow { index: usize },

    #[error("domain error at observation {index}: {reason}")]
    Domain { index: usize, reason: String },

    #[error("{0} residuals are only defined for the tweedie family")]
    UnsupportedFamily(&'static str),

    #[error("insufficient degrees of freedom: n = {n}, df used = {df}")]
    InsufficientDf { n: usize, df: usize },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("column {0} has zero variance")]
    ConstantColumn(usize),

    #[error("response has zero variance")]
    DegenerateResponse,

    #[error("penalized objective increased at IRLS iteration {iteration}: {before:.17e} -> {after:.17e}")]
    ObjectiveIncrease {
        iteration: usize,
        before: f64,
        after: f64,
    },

    #[error("cross-validation fold {fold} is degenerate: {reason}")]
    FoldDegenerate { fold: usize, reason: String },

    #[error("constraint slack mu = {mu} is infeasible for column {column}; try a larger mu")]
    Infeasible { column: usize, mu: f64 },

    #[error("singular design: column {0} is collinear with the others")]
    Singular(usize),

    #[error("ill-conditioned hessian (condition estimate {0:.3e})")]
    IllConditioned(f64),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("bootstrap replicate {replicate} failed after {attempts} attempts: {reason}")]
    ReplicateFailure {
        replicate: usize,
        attempts: usize,
        reason: String,
    },

    #[error("repetition {repetition}: {source}")]
    Repetition {
        repetition: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("{0}")]
    Io(String),

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("column `{0}` has no observed values")]
    AllMissing(String),

    #[error("cannot parse `{value}` at row {row}, column `{column}`")]
    Parse {
        row: usize,
        column: String,
        value: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl Error {
    /// Stable snake_case name of the variant, for machine-readable reports.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::InvalidFamily(_) => "invalid_family",
            Error::NumericOverflow { .. } => "numeric_overflow",
            Error::Domain { .. } => "domain",
            Error::UnsupportedFamily(_) => "unsupported_family",
            Error::InsufficientDf { .. } => "insufficient_df",
            Error::Dimension(_) => "dimension",
            Error::InvalidInput(_) => "invalid_input",
            Error::ConstantColumn(_) => "constant_column",
            Error::DegenerateResponse => "degenerate_response",
            Error::ObjectiveIncrease { .. } => "objective_increase",
            Error::FoldDegenerate { .. } => "fold_degenerate",
            Error::Infeasible { .. } => "infeasible",
            Error::Singular(_) => "singular",
            Error::IllConditioned(_) => "ill_conditioned",
            Error::Config(_) => "config",
            Error::ReplicateFailure { .. } => "replicate_failure",
            Error::Repetition { .. } => "repetition",
            Error::Io(_) => "io",
            Error::MissingColumn(_) => "missing_column",
            Error::AllMissing(_) => "all_missing",
            Error::Parse { .. } => "parse",
        }
    }
}
