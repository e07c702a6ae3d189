use thiserror::Error;

/// Errors raised by model construction, bound evaluation, and the
/// exhaustive dimension searches.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter `{name}` = {value}: {reason}")]
    InvalidParameter {
        name: &'static str,
        value: f64,
        reason: &'static str,
    },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("value {0} is not covered by the interval partition")]
    ValueNotCovered(f64),

    #[error("{what} has size {size}, above the brute-force limit of {limit}")]
    LimitExceeded {
        what: &'static str,
        size: usize,
        limit: usize,
    },

    #[error("subpopulation `{0}` has zero probability")]
    EmptySubpopulation(String),

    #[error("no epsilon in (0, 1] is achievable with {m} samples")]
    Infeasible { m: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_unit_open(name: &'static str, value: f64) -> Result<()> {
    if value > 0.0 && value <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie in (0, 1]",
        })
    }
}

pub(crate) fn check_unit_closed(name: &'static str, value: f64) -> Result<()> {
    if (0.0..=1.0).contains(&value) {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            reason: "must lie in [0, 1]",
        })
    }
}
