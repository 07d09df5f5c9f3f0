use std::path::Path;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] fracfb::Error),

    #[error("{0}")]
    Usage(String),

    #[error("cannot read artifact {path}: {source}")]
    MissingArtifact {
        path: String,
        source: std::io::Error,
    },

    #[error("self-test failed: {0} checks")]
    SelftestFailed(usize),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub fn artifact(path: &Path, source: std::io::Error) -> Self {
        CliError::MissingArtifact {
            path: path.display().to_string(),
            source,
        }
    }

    /// `2` for bad input or an infeasible problem, `1` for everything else.
    pub fn exit_code(&self) -> i32 {
        use fracfb::Error as E;
        match self {
            CliError::Usage(_) | CliError::MissingArtifact { .. } | CliError::Json(_) => 2,
            CliError::Core(e) => match e {
                E::InvalidParameter(_)
                | E::InfeasibleBoundary { .. }
                | E::RadiusOutOfDomain { .. }
                | E::CenterOutsideGrid(_)
                | E::NotInContinuation(_)
                | E::MissingContactMask
                | E::ZeroPaths
                | E::SchemaMismatch { .. }
                | E::Format(_)
                | E::Json(_) => 2,
                E::Io(io) if io.kind() == std::io::ErrorKind::NotFound => 2,
                _ => 1,
            },
            CliError::SelftestFailed(_) | CliError::Io(_) => 1,
        }
    }
}
