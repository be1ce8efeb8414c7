use thiserror::Error;

/// Library-wide error type. Variants carry enough context to diagnose a
/// failure from a log line without re-running the job.
#[derive(Debug, Error)]
pub enum MsleError {
    #[error("domain build failed: {0}")]
    DomainBuild(String),

    #[error("invalid curve step: {0}")]
    CurveStep(String),

    #[error("mass parameters out of range: {0}")]
    MassParams(String),

    #[error("linear solve failed: {0}")]
    Solve(String),

    #[error("kernel evaluation failed: {0}")]
    Kernel(String),

    #[error("conformal map construction failed: {0}")]
    Chart(String),

    #[error("observable evaluation failed: {0}")]
    Observable(String),

    #[error("sampler failed: {0}")]
    Sampler(String),

    #[error("evolution halted: {0}")]
    Evolution(String),

    #[error("lattice resolution exhausted: {0}")]
    Resolution(String),

    #[error("verification setup failed: {0}")]
    Verify(String),

    #[error("statistics error: {0}")]
    Stats(String),

    #[error("manifest error: {0}")]
    Manifest(String),

    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, MsleError>;
