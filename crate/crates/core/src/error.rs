use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The multiplier search for one user could not meet its power budget.
    #[error(
        "lambda calibration failed for user {user}: last lambda {lambda}, \
         achieved average power {achieved} against budget {target}"
    )]
    Calibration {
        user: usize,
        lambda: f64,
        achieved: f64,
        target: f64,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}
