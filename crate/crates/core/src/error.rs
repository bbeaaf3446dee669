use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("x = {x} cm is outside the profile domain [{lo}, {hi}]")]
    Domain { x: f64, lo: f64, hi: f64 },

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("only {hits} ray(s) reflected, at least 2 are required")]
    InsufficientHits { hits: usize },

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("normal equations could not be solved at any damping level")]
    SingularJacobian,

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("fit of {target} failed: {reason}")]
    FitFailed { target: String, reason: String },

    #[error("search grid is empty")]
    EmptyGrid,

    #[error("estimate {index} carries no ground truth")]
    MissingTruth { index: usize },

    #[error("reports do not share a distance grid: {0}")]
    GridMismatch(String),

    #[error("{stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("malformed input: {0}")]
    Parse(String),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn at_stage(self, stage: &'static str) -> Self {
        Error::Stage {
            stage,
            source: Box::new(self),
        }
    }

    /// True for failures of the numerical machinery rather than of the input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::SingularJacobian | Error::FitFailed { .. } | Error::InsufficientHits { .. } => {
                true
            }
            Error::Stage { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
