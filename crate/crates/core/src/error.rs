use std::path::PathBuf;

/// Errors raised by the numerical core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("non-smooth profile at node {node}: indicator {indicator:.3e} exceeds bound {bound:.3e}")]
    NonSmoothProfile {
        node: usize,
        indicator: f64,
        bound: f64,
    },

    #[error("time {time} outside achieved interval [{start}, {end}]")]
    OutOfInterval { time: f64, start: f64, end: f64 },

    #[error("unsupported point pair: {0}")]
    UnsupportedPoints(String),

    #[error("negative density {value:.3e} at node {node}")]
    NegativeDensity { node: usize, value: f64 },

    #[error("mass drift {drift:.3e} at t = {time} exceeds tolerance {tolerance:.1e}")]
    MassDrift {
        time: f64,
        drift: f64,
        tolerance: f64,
    },

    #[error("density is below the floor on every node")]
    EmptyMask,

    #[error("measures live on different slices (t = {0} vs t = {1})")]
    MismatchedSlices(f64, f64),

    #[error("linear solver did not converge: residual {residual:.3e} after {iterations} iterations")]
    SolverStalled { iterations: usize, residual: f64 },

    #[error("transport solver failed: {0}")]
    Transport(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("config error: {0}")]
    Config(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
