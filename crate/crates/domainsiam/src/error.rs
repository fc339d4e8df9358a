use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("gradient in alpha is undefined on the {0} branch")]
    UnsupportedBranch(&'static str),
    #[error("empty batch")]
    EmptyBatch,
    #[error("singular system: X'X + lambda*I is not invertible")]
    SingularSystem,
    #[error("training diverged at iteration {iteration} (loss = {loss})")]
    Divergence { iteration: usize, loss: f64 },
    #[error("target lost: search region has no overlap with the frame")]
    LostTarget,
    #[error("invalid config: {0}")]
    InvalidConfig(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("malformed file: {0}")]
    Format(String),
}

pub type Result<T> = std::result::Result<T, Error>;
