use std::path::PathBuf;

/// Errors produced anywhere in the pipeline.
///
/// Each variant maps onto one process exit code through [`Error::exit_code`].
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("data error: {0}")]
    Data(String),

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("backend error: {message}")]
    Backend {
        message: String,
        /// Captured stderr/stdout of the external process, if any.
        diagnostics: String,
    },

    #[error("backend contract violated, missing outputs: {}", missing.join(", "))]
    ContractViolation { missing: Vec<String> },

    #[error("training diverged at epoch {epoch}, batch {batch}: {detail}")]
    TrainingDiverged {
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("I/O error on {}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 data, 4 backend, 5 training diverged.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::InvalidInput(_)
            | Error::Data(_)
            | Error::Numeric(_)
            | Error::Checkpoint(_)
            | Error::Io { .. } => 3,
            Error::Backend { .. } | Error::ContractViolation { .. } => 4,
            Error::TrainingDiverged { .. } => 5,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exit_codes_follow_the_table() {
        assert_eq!(Error::Config("x".into()).exit_code(), 2);
        assert_eq!(Error::Data("x".into()).exit_code(), 3);
        assert_eq!(
            Error::Backend {
                message: "x".into(),
                diagnostics: String::new()
            }
            .exit_code(),
            4
        );
        assert_eq!(
            Error::TrainingDiverged {
                epoch: 0,
                batch: 0,
                detail: "nan".into()
            }
            .exit_code(),
            5
        );
    }

    #[test]
    fn contract_violation_names_missing_files() {
        let e = Error::ContractViolation {
            missing: vec!["a".into(), "b".into()],
        };
        assert!(e.to_string().contains("a, b"));
    }
}
