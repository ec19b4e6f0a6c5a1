use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("could not place AP {ap} at {min_sep} m spacing after {rounds} draws")]
    Placement {
        ap: usize,
        min_sep: f64,
        rounds: usize,
    },
    #[error("non-finite objective after {iter} iterations (chi = {chi})")]
    NonFinite { iter: usize, chi: f64 },
    #[error("subproblem solver failed: {0}")]
    Subproblem(String),
    #[error("empty input")]
    Empty,
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
