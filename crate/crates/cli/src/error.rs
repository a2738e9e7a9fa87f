use std::path::{Path, PathBuf};

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("{path}{}: {message}", line.map(|l| format!(", line {l}")).unwrap_or_default())]
    Config {
        path: PathBuf,
        line: Option<usize>,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Core(#[from] kawasaki_core::Error),
}

impl CliError {
    pub fn config(path: &Path, line: Option<usize>, message: String) -> Self {
        CliError::Config {
            path: path.to_path_buf(),
            line,
            message,
        }
    }

    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 1 for usage and configuration problems, 3 for numerical failures.
    pub fn exit_code(&self) -> i32 {
        use kawasaki_core::Error as E;
        match self {
            CliError::Core(
                E::BlowUp { .. } | E::Divergence { .. } | E::PathologicalAcceptance { .. },
            ) => 3,
            _ => 1,
        }
    }
}
