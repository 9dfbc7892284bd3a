use thiserror::Error;

/// Failure modes shared across the crate.
///
/// `Domain` and `Config` mean the caller handed us something outside the
/// contract (bad parameter, mismatched profiles, unsupported order) and map to
/// validation failures at the CLI boundary. `Resolution` and `Diagnostic` mean
/// the inputs were formally fine but the numerics refused to certify the
/// result (grid too coarse, non-convergent sequence, tolerance exceeded).
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("unsupported order: {0}")]
    UnsupportedOrder(String),
    #[error("resolution error: {0}")]
    Resolution(String),
    #[error("diagnostic failure: {0}")]
    Diagnostic(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// True for errors that indicate invalid input rather than numerical trouble.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Domain(_) | Error::Config(_) | Error::UnsupportedOrder(_)
        )
    }
}
