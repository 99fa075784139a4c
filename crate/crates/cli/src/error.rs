use slrr::io::IoError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Input(#[from] IoError),
    #[error(transparent)]
    Core(#[from] slrr::Error),
    #[error("{0}")]
    Invalid(String),
}

impl CliError {
    /// 1 for I/O, 2 for invalid input or flags, 4 for degenerate results.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io(_) | CliError::Input(IoError::Io(_)) => 1,
            CliError::Input(IoError::Format(_)) | CliError::Invalid(_) => 2,
            CliError::Core(e) => match e {
                slrr::Error::DegenerateAffinity | slrr::Error::SvdFailure | slrr::Error::EigenFailure => 4,
                _ => 2,
            },
        }
    }
}

pub fn invalid(msg: impl Into<String>) -> CliError {
    CliError::Invalid(msg.into())
}
