use crate::sequence::SequenceKind;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid sequence geometry: {0}")]
    InvalidGeometry(String),

    #[error("{operation} requires {expected}; got {kind} with N = {n_pulses}")]
    WrongSequenceKind {
        operation: &'static str,
        expected: &'static str,
        kind: SequenceKind,
        n_pulses: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("integration failed: {0}")]
    IntegrationFailure(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("fit did not converge within {iterations} iterations")]
    NonConvergence { iterations: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("AC phase is not identifiable (B_ac = {b_ac:e} T, sigma_phi = {sigma_phi:.3} rad)")]
    AmbiguousPhase { b_ac: f64, sigma_phi: f64 },

    #[error("missing metadata: {0}")]
    MissingMetadata(String),

    #[error("no peak: {0}")]
    NoPeak(String),

    #[error("unresolved width: {0}")]
    UnresolvedWidth(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    /// `true` for failures of the numerics rather than of the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::IntegrationFailure(_)
                | Error::NonConvergence { .. }
                | Error::DegenerateData(_)
                | Error::AmbiguousPhase { .. }
                | Error::NoPeak(_)
                | Error::UnresolvedWidth(_)
        )
    }
}

pub type Result<T> = std::result::Result<T, Error>;
