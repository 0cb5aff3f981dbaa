use std::fmt;

use canard_core::CanardError;

/// Failure of a CLI run, mapped onto the process exit code.
#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// Bad config, bad flag, or an output location that cannot be written.
    Validation(String),
    /// The integrator or a controller failed.
    Integration(String),
    /// An MMO loop came out with the wrong label.
    Pattern { achieved: String, requested: String },
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 2,
            CliError::Integration(_) => 3,
            CliError::Pattern { .. } => 4,
        }
    }

    pub fn io(path: &std::path::Path, e: std::io::Error) -> Self {
        CliError::Validation(format!("cannot write {}: {e}", path.display()))
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Validation(m) => write!(f, "invalid input: {m}"),
            CliError::Integration(m) => write!(f, "integration failed: {m}"),
            CliError::Pattern { achieved, requested } => write!(f, "pattern deviation: achieved {achieved}, requested {requested}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CanardError> for CliError {
    fn from(e: CanardError) -> Self {
        match e {
            CanardError::Domain(_) | CanardError::Usage(_) | CanardError::Singular(_) => CliError::Validation(e.to_string()),
            CanardError::PatternDeviation { achieved } => CliError::Pattern { achieved, requested: String::new() },
            CanardError::Overflow { .. } | CanardError::NonConvergent(_) | CanardError::Stiffness { .. } => CliError::Integration(e.to_string()),
        }
    }
}
