use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("coordinate {index} = {value} lies outside [{lower}, {upper}]")]
    OutOfBounds {
        index: usize,
        value: f64,
        lower: f64,
        upper: f64,
    },

    #[error("unknown function `{0}`")]
    UnknownFunction(String),

    #[error("{function} requires dimension >= {min}, got {dimension}")]
    InvalidDimension {
        function: &'static str,
        dimension: usize,
        min: usize,
    },

    #[error("invalid bounds: lower {lower} must be below upper {upper}")]
    InvalidBounds { lower: f64, upper: f64 },

    #[error("analytic minimizer of {0} lies outside the configured bounds")]
    MinimizerOutsideBounds(String),

    #[error("suite needs at least one dimension")]
    EmptyDims,

    #[error("invalid size: {0}")]
    InvalidSize(String),

    #[error("grid with {points_per_axis}^{dimension} points exceeds cap {cap}")]
    GridTooLarge {
        points_per_axis: usize,
        dimension: usize,
        cap: usize,
    },

    #[error("trust-region side length {0} outside (0, 1.6]")]
    InvalidSideLength(f64),

    #[error("training diverged at epoch {epoch} (learning rate {learning_rate})")]
    NonFiniteLoss { epoch: usize, learning_rate: f64 },

    #[error("kernel matrix not positive definite even with jitter {jitter}")]
    SingularKernel { jitter: f64 },

    #[error("{n} training points exceeds the GP cap of {cap}")]
    TooManyPoints { n: usize, cap: usize },

    #[error("posterior sample covariance is not positive definite")]
    SampleCovarianceSingular,

    #[error("acquisition `{acquisition}` cannot be used with the {surrogate} surrogate")]
    IncompatibleSurrogateAcquisition {
        surrogate: &'static str,
        acquisition: &'static str,
    },

    #[error("good-enough size {g} must lie in 1..={m}")]
    InvalidG { g: usize, m: usize },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("need at least {min} values, got {n}")]
    TooShort { n: usize, min: usize },

    #[error("input vector has zero variance")]
    ZeroVariance,

    #[error("need at least {min} points, got {n}")]
    TooFewPoints { n: usize, min: usize },

    #[error("missing result for problem `{problem}`, algorithm `{algorithm}`")]
    MissingCell { problem: String, algorithm: String },

    #[error("invalid config at `{path}`: {message}")]
    ConfigInvalid { path: String, message: String },

    #[error("trial {trial} failed: {message}")]
    TrialFailed { trial: String, message: String },

    #[error("iteration {iteration}: {source}")]
    Iteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::ConfigInvalid {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::Iteration {
            iteration,
            source: Box::new(self),
        }
    }
}
