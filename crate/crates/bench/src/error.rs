use thiserror::Error;

#[derive(Debug, Error)]
pub enum BenchError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] dpq_core::Error),
}

impl BenchError {
    /// 2 for bad configuration, 3 for bad or unusable data, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use dpq_core::Error as E;
        match self {
            BenchError::Config(_) => 2,
            BenchError::Data(_) => 3,
            BenchError::Io { .. } => 1,
            BenchError::Core(e) => match e {
                E::InvalidUniverse(_)
                | E::InvalidParameter(_)
                | E::SensitivityUndefined { .. }
                | E::InsufficientHorizon { .. } => 2,
                E::NotANumber | E::EmptyInput | E::OutOfRange { .. } => 3,
                _ => 1,
            },
        }
    }
}

pub type Result<T> = std::result::Result<T, BenchError>;
