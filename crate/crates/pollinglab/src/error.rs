use std::fmt;
use std::io;

use pollinglab_core::ErrorKind;

/// Everything a command can fail with. Each variant maps to a stable exit
/// code through [`CliError::exit_code`].
#[derive(Debug)]
pub enum CliError {
    /// Reading or writing a file or stream failed.
    Io {
        path: String,
        source: io::Error,
    },
    /// The config is not a valid model document.
    Config(String),
    /// A flag value is out of range or inconsistent with the config.
    Usage(String),
    Core(pollinglab_core::Error),
}

pub type CliResult<T> = std::result::Result<T, CliError>;

impl CliError {
    pub const EXIT_VALIDATION: i32 = 2;
    pub const EXIT_NUMERIC: i32 = 3;
    pub const EXIT_IO: i32 = 4;

    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Io { .. } => Self::EXIT_IO,
            CliError::Config(_) | CliError::Usage(_) => Self::EXIT_VALIDATION,
            CliError::Core(e) => match e.kind() {
                ErrorKind::Validation => Self::EXIT_VALIDATION,
                ErrorKind::Numeric => Self::EXIT_NUMERIC,
            },
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn usage(msg: impl Into<String>) -> Self {
        CliError::Usage(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io { path, source } => write!(f, "{path}: {source}"),
            CliError::Config(msg) => write!(f, "invalid config: {msg}"),
            CliError::Usage(msg) => f.write_str(msg),
            CliError::Core(e) => write!(f, "{e}"),
        }
    }
}

impl std::error::Error for CliError {
    fn source(&self) -> Option<&(dyn std::error::Error + 'static)> {
        match self {
            CliError::Io { source, .. } => Some(source),
            _ => None,
        }
    }
}

impl From<pollinglab_core::Error> for CliError {
    fn from(e: pollinglab_core::Error) -> Self {
        CliError::Core(e)
    }
}
