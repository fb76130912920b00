use std::fmt;

/// Failure of a subcommand, mapped to the process exit code.
#[derive(Debug)]
pub enum CliError {
    /// Malformed or invalid configuration (exit 2).
    Config(String),
    /// Cutoff, grid or quadrature range too small (exit 3).
    Numerical(String),
    /// Output could not be written (exit 1).
    Io(String),
}

impl CliError {
    pub fn from_core(e: cvtele::Error) -> Self {
        if e.is_numerical_range() {
            CliError::Numerical(e.to_string())
        } else {
            CliError::Config(e.to_string())
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numerical(_) => 3,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical range error: {m}"),
            CliError::Io(m) => write!(f, "output error: {m}"),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
