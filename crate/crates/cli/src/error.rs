use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("physics violation: {0}")]
    Physics(String),
    #[error("numerical failure: {0}")]
    Numerical(String),
    #[error("cannot write {}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{0} validation check(s) failed")]
    Validation(usize),
}

impl CliError {
    /// 2 config, 3 physics, 4 numerical, 1 anything else.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Physics(_) => 3,
            CliError::Numerical(_) => 4,
            CliError::Io { .. } | CliError::Validation(_) => 1,
        }
    }
}

impl From<qpo_core::Error> for CliError {
    fn from(e: qpo_core::Error) -> Self {
        match e {
            qpo_core::Error::Physics(v) => CliError::Physics(v.join("; ")),
            qpo_core::Error::Input(m) => CliError::Config(m),
            other => CliError::Numerical(other.to_string()),
        }
    }
}
