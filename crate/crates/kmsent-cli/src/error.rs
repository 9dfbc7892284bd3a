use std::fmt;

/// Failure modes of a run, sorted by exit code: unusable input (2) or
/// numbers that refused to certify (3).
#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Tolerance(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Tolerance(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(msg) | CliError::Tolerance(msg) => write!(f, "{msg}"),
        }
    }
}

impl From<kmsent::Error> for CliError {
    fn from(err: kmsent::Error) -> Self {
        if err.is_validation() {
            CliError::Invalid(err.to_string())
        } else {
            CliError::Tolerance(err.to_string())
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
