use std::fmt;
use std::path::Path;

/// Failure classes, each with its own exit code.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    /// The pipeline ran but produced no acceptable result.
    Failure,
    Usage,
    Config,
    Io,
}

impl Kind {
    pub fn code(self) -> i32 {
        match self {
            Kind::Failure => 1,
            Kind::Usage | Kind::Config => 2,
            Kind::Io => 3,
        }
    }

    fn name(self) -> &'static str {
        match self {
            Kind::Failure => "failure",
            Kind::Usage => "usage",
            Kind::Config => "config",
            Kind::Io => "io",
        }
    }
}

#[derive(Debug)]
pub struct CliError {
    pub kind: Kind,
    pub message: String,
}

impl CliError {
    pub fn new(kind: Kind, message: impl Into<String>) -> Self {
        CliError { kind, message: message.into() }
    }

    pub fn failure(message: impl fmt::Display) -> Self {
        Self::new(Kind::Failure, message.to_string())
    }

    pub fn usage(message: impl fmt::Display) -> Self {
        Self::new(Kind::Usage, message.to_string())
    }

    pub fn config(message: impl fmt::Display) -> Self {
        Self::new(Kind::Config, message.to_string())
    }

    pub fn io(path: &Path, message: impl fmt::Display) -> Self {
        Self::new(Kind::Io, format!("{}: {message}", path.display()))
    }

    /// Single JSON object for the last line of stderr.
    pub fn machine_line(&self) -> String {
        serde_json::json!({
            "error": self.kind.name(),
            "code": self.kind.code(),
            "message": self.message,
        })
        .to_string()
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.kind.name(), self.message)
    }
}

impl std::error::Error for CliError {}

pub type Result<T> = std::result::Result<T, CliError>;

/// Attaches a path to I/O-ish failures.
pub trait AtPath<T> {
    fn at(self, path: &Path) -> Result<T>;
}

impl<T, E: fmt::Display> AtPath<T> for std::result::Result<T, E> {
    fn at(self, path: &Path) -> Result<T> {
        self.map_err(|e| CliError::io(path, e))
    }
}
