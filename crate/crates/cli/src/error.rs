use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] langevin_core::Error),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    /// 2 for bad configuration, 3 for divergence, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        use langevin_core::Error as E;
        match self {
            Self::Config(_) => 2,
            Self::Core(E::Divergence { .. } | E::EnsembleDiverged(_)) => 3,
            Self::Core(
                E::InvalidParameter(_)
                | E::UnknownConstellation(_)
                | E::UnknownScheme(_)
                | E::SchemeOrderMismatch { .. }
                | E::SearchSpaceTooLarge { .. }
                | E::DegenerateNoise,
            ) => 2,
            _ => 1,
        }
    }
}
