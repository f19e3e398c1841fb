use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("invalid truncated-normal parameters: {0}")]
    Distribution(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("k = {k} exceeds the number of points ({points})")]
    TooFewPoints { k: usize, points: usize },

    #[error("code {code} out of range for {ks} centroids")]
    CodeOutOfRange { code: u32, ks: usize },

    #[error("bit budget of {budget} bits cannot hold even a single centroid per subspace")]
    BudgetTooSmall { budget: u64 },

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("checksum mismatch: header says {expected:#010x}, payload hashes to {actual:#010x}")]
    Checksum { expected: u32, actual: u32 },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}
