//! Error types, one family per subsystem.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum SplineError {
    #[error("invalid spline configuration: {0}")]
    InvalidConfiguration(String),
    #[error("parameter {u} outside spline domain [{lo}, {hi}]")]
    OutOfDomain { u: f64, lo: f64, hi: f64 },
    #[error("loop closure rejected: {0}")]
    ClosureRejected(String),
}

#[derive(Debug, Error)]
pub enum UncertaintyError {
    #[error("invalid belief: {0}")]
    InvalidConfiguration(String),
    #[error("covariance not factorizable after jitter escalation")]
    NotFactorizable,
    #[error("map failed on sigma point {point_index}: {reason}")]
    Propagation { point_index: usize, reason: String },
}

#[derive(Debug, Error)]
pub enum FilterError {
    #[error(transparent)]
    Spline(#[from] SplineError),
    #[error(transparent)]
    Uncertainty(#[from] UncertaintyError),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid state: {0}")]
    InvalidState(String),
    #[error("numeric failure: {0}")]
    Numeric(String),
    #[error("frame {frame}: {source}")]
    Frame {
        frame: u64,
        #[source]
        source: Box<FilterError>,
    },
}

impl FilterError {
    pub fn at_frame(self, frame: u64) -> Self {
        FilterError::Frame { frame, source: Box::new(self) }
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid track spec: {0}")]
    InvalidSpec(String),
    #[error("track elements do not close the loop: residual gap {gap:.6} m, heading residual {heading_gap:.6} rad")]
    NotClosed { gap: f64, heading_gap: f64 },
}

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config error: {0}")]
    Config(String),
    #[error("refusing to emit empty results")]
    EmptyResults,
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error("backend {backend} failed: {source}")]
    Backend {
        backend: String,
        #[source]
        source: FilterError,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
