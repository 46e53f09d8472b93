use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid potential: {0}")]
    InvalidPotential(String),

    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("no self-coupling exists at site {site}")]
    SelfCoupling { site: i64 },

    #[error(
        "truncation failed at t = {t}: bound {achieved_bound:e} after {max_terms} terms \
         exceeds tolerance {tolerance:e}"
    )]
    TruncationFailure {
        t: f64,
        achieved_bound: f64,
        max_terms: u64,
        tolerance: f64,
    },

    #[error("site {i0} lies outside the volume [-{n}, {n}]")]
    SiteOutsideVolume { i0: i64, n: u64 },

    #[error("volume half-width {n} exceeds the enumeration limit {n_max}")]
    VolumeTooLarge { n: u64, n_max: u64 },

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("envelope is not eventually decreasing")]
    NonDecayingInput,

    #[error("curve is empty")]
    EmptyCurve,
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
