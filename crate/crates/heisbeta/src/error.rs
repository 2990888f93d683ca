use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("parameter error: {0}")]
    Parameter(String),
    #[error("point ({x}, {z}) outside graph domain")]
    OutOfDomain { x: f64, z: f64 },
    #[error("coverage error: {0}")]
    Coverage(String),
    #[error("characteristic curve through ({x}, {z}) leaves the domain immediately")]
    EmptyCurve { x: f64, z: f64 },
    #[error("certification failure: empirical L = {empirical} exceeds {bound} (witness {p:?} / {q:?})")]
    Certification {
        empirical: f64,
        bound: f64,
        p: [f64; 3],
        q: [f64; 3],
    },
    #[error("slice underflow: {0}")]
    Underflow(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::Parameter(_) => 2,
            Error::OutOfDomain { .. }
            | Error::Coverage(_)
            | Error::EmptyCurve { .. }
            | Error::Underflow(_) => 3,
            Error::Certification { .. } => 4,
            Error::Internal(_) | Error::Io(_) | Error::Csv(_) => 1,
        }
    }
}
