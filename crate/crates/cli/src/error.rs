use std::fmt;

/// Exit code for schema and parameter errors.
pub const EXIT_CONFIG: u8 = 2;
/// Exit code for numerical failure where convergence was required.
pub const EXIT_NUMERICAL: u8 = 3;
pub const EXIT_IO: u8 = 1;

#[derive(Debug, Clone)]
pub struct CliError {
    pub code: u8,
    pub kind: &'static str,
    pub message: String,
}

impl CliError {
    pub fn config(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_CONFIG, kind: "config", message: msg.into() }
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_NUMERICAL, kind: "numerical", message: msg.into() }
    }

    pub fn io(msg: impl Into<String>) -> Self {
        CliError { code: EXIT_IO, kind: "io", message: msg.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{} error: {}", self.kind, self.message)
    }
}

impl From<bnslab::Error> for CliError {
    fn from(e: bnslab::Error) -> Self {
        use bnslab::Error::*;
        match e {
            Config(_) | Argument(_) | GridMismatch(_) | Unresolvable(_) | Format(_) => CliError::config(e.to_string()),
            Inversion(_) | Iteration { .. } => CliError::numerical(e.to_string()),
            Io(_) => CliError::io(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::io(e.to_string())
    }
}
