use thiserror::Error;

pub type Result<T> = std::result::Result<T, LabError>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LabError {
    /// An argument lies outside the domain of the operation (including the
    /// branch cut of the Boole map at 0).
    #[error("domain error: {0}")]
    Domain(String),
    /// The caller asked for something the operation does not support.
    #[error("usage error: {0}")]
    Usage(String),
    /// A computational budget (recursion depth, subdivision count) was exceeded.
    #[error("budget exceeded: {what} = {requested} exceeds limit {limit}")]
    Budget {
        what: &'static str,
        requested: usize,
        limit: usize,
    },
}

impl LabError {
    pub fn domain(msg: impl Into<String>) -> Self {
        LabError::Domain(msg.into())
    }

    pub fn usage(msg: impl Into<String>) -> Self {
        LabError::Usage(msg.into())
    }
}
