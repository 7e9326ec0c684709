//! Command-line errors and their exit codes.

use thiserror::Error;

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_VIOLATION: i32 = 3;
pub const EXIT_BUDGET: i32 = 4;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Core(#[from] cobound::Error),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        use cobound::Error as E;
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Io { .. } => EXIT_IO,
            CliError::Core(e) => match e {
                E::ResourceBudget { .. } | E::CutoffTooLarge { .. } => EXIT_BUDGET,
                E::InsufficientMargin => EXIT_VIOLATION,
                E::DimensionMismatch { .. }
                | E::AxisOutOfRange { .. }
                | E::InvalidRule(_)
                | E::NotAdapted(_)
                | E::InvalidInput(_)
                | E::Parse { .. } => EXIT_CONFIG,
            },
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;
