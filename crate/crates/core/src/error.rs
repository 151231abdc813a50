use core::fmt;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq)]
pub enum Error {
    /// A label that has no fixed matrix (e.g. `Custom` passed to `pauli`).
    UnknownLabel,
    /// State vector whose norm deviates from one.
    NotNormalized {
        norm: f64,
    },
    /// Walk configuration that leaks amplitude out of the OAM window.
    Configuration(&'static str),
    /// Reachable-subspace norm loss detected while building the walk.
    NormLoss {
        loss: f64,
    },
    NegativeProbability {
        index: usize,
        value: f64,
    },
    InvalidShots(f64),
    /// Probability vector that sums above one or has no mass to sample from.
    InvalidProbabilities(&'static str),
    /// Conditional features requested for a record with zero total counts.
    DegenerateSample,
    EmptyTrainingSet,
    DimensionMismatch {
        expected: usize,
        found: usize,
    },
    FeatureModeMismatch,
    NonFinite,
}

impl fmt::Display for Error {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Error::UnknownLabel => write!(f, "observable label has no Pauli matrix"),
            Error::NotNormalized { norm } => write!(f, "state is not normalized (norm {norm})"),
            Error::Configuration(msg) => write!(f, "invalid walk configuration: {msg}"),
            Error::NormLoss { loss } => write!(
                f,
                "walk loses norm {loss:e} on the reachable subspace; q-plate count exceeds the OAM window"
            ),
            Error::NegativeProbability { index, value } => {
                write!(f, "probability {index} is negative ({value})")
            }
            Error::InvalidShots(s) => write!(f, "shots must be positive and finite, got {s}"),
            Error::InvalidProbabilities(msg) => write!(f, "invalid probability vector: {msg}"),
            Error::DegenerateSample => write!(f, "zero total counts, conditional features undefined"),
            Error::EmptyTrainingSet => write!(f, "training set is empty"),
            Error::DimensionMismatch { expected, found } => {
                write!(f, "dimension mismatch: expected {expected}, found {found}")
            }
            Error::FeatureModeMismatch => write!(f, "feature mode or intercept differs from training"),
            Error::NonFinite => write!(f, "non-finite value"),
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for Error {}
