use thiserror::Error;

/// Errors produced by the sampling and detection library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {what} (expected {expected}, got {got})")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("unknown constellation `{0}` (supported: QPSK, QAM16, QAM64)")]
    UnknownConstellation(String),

    #[error("unknown scheme `{0}` (supported: ULA, ABO, BAOAB, BCOABC, BACOCAB)")]
    UnknownScheme(String),

    #[error("scheme `{scheme}` cannot drive order-{order} dynamics")]
    SchemeOrderMismatch { scheme: String, order: u8 },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("noise level sigma0 is zero; the pre-conditioner is undefined in this regime")]
    DegenerateNoise,

    #[error("trajectory diverged at level {level}, iteration {iter}")]
    Divergence { level: usize, iter: usize },

    #[error("every trajectory in the ensemble diverged ({0} attempted)")]
    EnsembleDiverged(usize),

    #[error("no candidates to select from")]
    EmptyCandidates,

    #[error("exhaustive search over {size} candidates exceeds the limit of {limit}")]
    SearchSpaceTooLarge { size: u128, limit: u128 },

    #[error("matrix is singular or rank deficient: {0}")]
    Singular(&'static str),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch {
            what,
            expected,
            got,
        })
    }
}
