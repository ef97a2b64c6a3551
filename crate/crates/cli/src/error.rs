use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("solver did not converge on {failed} of {total} grid points")]
    NonConvergence { failed: usize, total: usize },

    #[error(transparent)]
    Core(#[from] banditpath::Error),
}

impl CliError {
    pub fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.display().to_string(),
            source,
        }
    }

    /// Process exit status for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Core(banditpath::Error::InvalidSpec(_) | banditpath::Error::Domain(_) | banditpath::Error::Bracket(_)) => 2,
            CliError::Io { .. } => 3,
            CliError::NonConvergence { .. } => 4,
            CliError::Core(_) => 1,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io {
            path: "csv output".into(),
            source: std::io::Error::other(e.to_string()),
        }
    }
}
