use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),

    #[error("{path}: {source}")]
    Read { path: String, source: std::io::Error },

    #[error("{path}: {source}")]
    Write { path: String, source: std::io::Error },

    #[error("{path}: invalid configuration: {source}")]
    ConfigParse { path: String, source: serde_json::Error },

    #[error(transparent)]
    Core(#[from] xsrp::Error),
}

impl CliError {
    /// 0 ok, 1 usage or configuration, 2 I/O, 3 numerical failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) | CliError::ConfigParse { .. } => 1,
            CliError::Read { .. } | CliError::Write { .. } => 2,
            CliError::Core(e) => match e {
                xsrp::Error::InvalidArgument(_) | xsrp::Error::Config(_) | xsrp::Error::Json(_) => 1,
                xsrp::Error::Io(_) | xsrp::Error::Wav(_) => 2,
                xsrp::Error::Numerical(_) => 3,
            },
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}
