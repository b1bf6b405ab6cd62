use respicast::Error;

/// Process exit codes.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const FAILURE: i32 = 1;
    pub const USAGE: i32 = 2;
    pub const NON_CONVERGENCE: i32 = 3;
    pub const DATA: i32 = 4;
    pub const DEGENERATE: i32 = 5;
}

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
    #[error(transparent)]
    Core(#[from] Error),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.display().to_string(), source }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => exit::USAGE,
            CliError::Data(_) | CliError::Io { .. } => exit::DATA,
            CliError::Json(_) => exit::FAILURE,
            CliError::Core(e) => match e {
                Error::Parameter(_) | Error::Config(_) => exit::USAGE,
                Error::Data(_)
                | Error::DateParse { .. }
                | Error::Range(_)
                | Error::InsufficientData(_)
                | Error::Io(_)
                | Error::Csv(_) => exit::DATA,
                Error::NonConvergence(_) => exit::NON_CONVERGENCE,
                Error::Degenerate { .. } => exit::DEGENERATE,
                Error::Numerical(_) => exit::FAILURE,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
