use thiserror::Error;

/// Algorithm step at which an estimator pipeline failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    FirstStage,
    ResidualCovariance,
    CovarianceRegression,
    Eigenspace,
    ProjectedRegression,
}

impl Stage {
    pub fn step(self) -> u8 {
        match self {
            Stage::FirstStage => 1,
            Stage::ResidualCovariance => 2,
            Stage::CovarianceRegression => 3,
            Stage::Eigenspace => 4,
            Stage::ProjectedRegression => 5,
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Stage::FirstStage => "first-stage regression",
            Stage::ResidualCovariance => "residual covariance",
            Stage::CovarianceRegression => "covariance regression",
            Stage::Eigenspace => "eigenspace extraction",
            Stage::ProjectedRegression => "projected regression",
        };
        write!(f, "step {} ({})", self.step(), name)
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("non-finite entry in {matrix} at row {row}, column {col}")]
    NonFiniteEntry {
        matrix: &'static str,
        row: usize,
        col: usize,
    },

    #[error("rank-deficient design: smallest singular value {smallest:e} below {cutoff:e}")]
    RankDeficientDesign { smallest: f64, cutoff: f64 },

    #[error("insufficient samples: {0}")]
    InsufficientSamples(String),

    #[error("invalid rank: {0}")]
    InvalidRank(String),

    #[error("nonpositive eigenvalue {value:e} at position {position} of spectrum {spectrum}")]
    NonpositiveEigenvalue {
        spectrum: usize,
        position: usize,
        value: f64,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{stage} failed: {source}")]
    Stage {
        stage: Stage,
        #[source]
        source: Box<Error>,
    },

    #[error("{context}: {source}")]
    Context {
        context: String,
        #[source]
        source: Box<Error>,
    },

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn at(stage: Stage) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage {
            stage,
            source: Box::new(e),
        }
    }

    pub fn context(self, context: impl Into<String>) -> Error {
        Error::Context {
            context: context.into(),
            source: Box::new(self),
        }
    }

    /// Strips stage and context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::Stage { source, .. } | Error::Context { source, .. } => source.root(),
            e => e,
        }
    }

    /// True for malformed or unreadable input data.
    pub fn is_data(&self) -> bool {
        matches!(
            self.root(),
            Error::DimensionMismatch(_)
                | Error::NonFiniteEntry { .. }
                | Error::Parse { .. }
                | Error::Io { .. }
                | Error::Json(_)
        )
    }

    /// True for failures caused by the numbers rather than the input files.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self.root(),
            Error::RankDeficientDesign { .. }
                | Error::InsufficientSamples(_)
                | Error::InvalidRank(_)
                | Error::NonpositiveEigenvalue { .. }
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
