use thiserror::Error;

pub type Result<T> = std::result::Result<T, CliError>;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Invalid(String),

    #[error("{0}")]
    NotConverged(String),

    #[error(transparent)]
    Core(loewner_core::Error),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Csv {
        path: String,
        #[source]
        source: csv::Error,
    },

    #[error("{path}: line {line}: {message}")]
    Format { path: String, line: u64, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl CliError {
    /// 2 for bad input, 3 when a cap tripped or an iteration failed to
    /// converge, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) | CliError::Format { .. } => 2,
            CliError::NotConverged(_) => 3,
            CliError::Core(e) => core_exit_code(e),
            CliError::Io { .. } | CliError::Csv { .. } | CliError::Json(_) => 1,
        }
    }
}

fn core_exit_code(e: &loewner_core::Error) -> i32 {
    use loewner_core::Error as E;
    match e {
        E::AtStep { source, .. } => core_exit_code(source),
        E::NoConvergence { .. } | E::BracketNotFound { .. } => 3,
        E::GateMisuse { .. } => 1,
        _ => 2,
    }
}

impl From<loewner_core::Error> for CliError {
    fn from(e: loewner_core::Error) -> Self {
        CliError::Core(e)
    }
}
