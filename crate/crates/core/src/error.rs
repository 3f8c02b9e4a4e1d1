use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found} ({context})")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: &'static str,
    },

    #[error("matrix is not positive definite ({0})")]
    NotPositiveDefinite(&'static str),

    #[error("design is rank deficient: sum of x_j x_j^T is singular")]
    RankDeficientDesign,

    #[error("scatter matrix S is singular; residuals do not span {0} dimensions")]
    SingularScatter(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("posterior is improper: need k > p + m + 1, got k={k}, p={p}, m={m}")]
    ImproperPosterior { k: usize, p: usize, m: usize },

    #[error("effective sample size undefined for a constant chain")]
    DegenerateChain,

    #[error("rectangle probabilities are not implemented for dimension {0}")]
    UnsupportedDimension(usize),

    #[error("sampler failed at iteration {iteration}: {source}")]
    Sampler {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("simulation {index} failed: {source}")]
    Simulation {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("group {group}: {message}")]
    InvalidGroup { group: usize, message: String },

    #[error("invalid config: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures of the numerical machinery, as opposed to bad input.
    pub fn is_numeric(&self) -> bool {
        match self {
            Error::Sampler { source, .. } | Error::Simulation { source, .. } => source.is_numeric(),
            e => matches!(
                e,
                Error::NotPositiveDefinite(_) | Error::RankDeficientDesign | Error::SingularScatter(_) | Error::DegenerateChain
            ),
        }
    }

    pub(crate) fn at_iteration(self, iteration: usize) -> Error {
        Error::Sampler {
            iteration,
            source: Box::new(self),
        }
    }
}
