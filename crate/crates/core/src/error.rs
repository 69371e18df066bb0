use thiserror::Error;

use crate::model::Arm;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite argument `{0}`")]
    NonFinite(&'static str),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("arm {0} has no subjects")]
    EmptyArm(Arm),

    #[error("no non-rescued subjects in arm {0}")]
    NoNonRescued(Arm),

    #[error("arm {arm} has {found} subjects, at least {needed} required")]
    UndersizedArm { arm: Arm, needed: usize, found: usize },

    #[error("arm {arm} has {found} non-rescued subjects, at least {needed} required")]
    UndersizedCell { arm: Arm, needed: usize, found: usize },

    #[error("visit-1 outcomes in arm {0} have zero spread")]
    ZeroSpread(Arm),

    #[error("degenerate truncation in arm {arm}: variance factor {factor:e} too small")]
    DegenerateTruncation { arm: Arm, factor: f64 },

    #[error("oracle mode requires the generating scenario")]
    MissingOracle,

    #[error("{failures} of {resamples} bootstrap resamples failed; result unreliable")]
    Unreliable { failures: usize, resamples: usize },

    #[error("empty scenario grid")]
    EmptyGrid,

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },
}

impl Error {
    /// True for errors caused by a dataset that is too degenerate to estimate from.
    pub fn is_degeneracy(&self) -> bool {
        matches!(
            self,
            Error::EmptyArm(_)
                | Error::NoNonRescued(_)
                | Error::UndersizedArm { .. }
                | Error::UndersizedCell { .. }
                | Error::ZeroSpread(_)
                | Error::DegenerateTruncation { .. }
                | Error::Unreliable { .. }
        )
    }
}
