use thiserror::Error;

/// Errors raised anywhere in the toolkit.
///
/// Validation-type failures (`Parameter`, `Model`, `Normalization`, `Config`)
/// map to CLI exit status 2; numeric failures map to 3.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid model: {0}")]
    Model(String),

    #[error("cannot normalize measure: {0}")]
    Normalization(String),

    #[error("non-finite integrand value at abscissa {abscissa}")]
    Evaluation { abscissa: f64 },

    #[error(
        "degenerate point configuration: covariance not factorizable at jitter {jitter:e} \
         (closest pair {pair:?}, separation {separation:e})"
    )]
    DegenerateConfiguration {
        pair: (usize, usize),
        separation: f64,
        jitter: f64,
    },

    #[error("pair separation underflow ({separation:e}) in pair {pair}")]
    Underflow { pair: usize, separation: f64 },

    #[error("flow diverged to non-finite positions at t = {time}")]
    Divergence { time: f64 },

    #[error("path {path}: {source}")]
    Path {
        path: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("config field `{field}`: {constraint}")]
    Config { field: String, constraint: String },

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }

    pub(crate) fn model(msg: impl Into<String>) -> Self {
        Error::Model(msg.into())
    }

    pub(crate) fn config(field: impl Into<String>, constraint: impl Into<String>) -> Self {
        Error::Config {
            field: field.into(),
            constraint: constraint.into(),
        }
    }

    /// Attach a Monte-Carlo path index.
    pub fn in_path(self, path: usize) -> Self {
        match self {
            e @ Error::Path { .. } => e,
            e => Error::Path {
                path,
                source: Box::new(e),
            },
        }
    }

    /// True for failures caused by bad input rather than by the numerics.
    pub fn is_validation(&self) -> bool {
        match self {
            Error::Parameter(_)
            | Error::Model(_)
            | Error::Normalization(_)
            | Error::Config { .. } => true,
            Error::Path { source, .. } => source.is_validation(),
            _ => false,
        }
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
