use std::io;
use std::path::Path;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{context}: {source}")]
    Io { context: String, source: io::Error },

    /// Bad magic, version or layout in a binary or CSV file.
    #[error("{0}")]
    Format(String),

    /// Declared sizes that cannot be addressed on this machine.
    #[error("{0}")]
    Capacity(String),

    #[error("{context}{}{source}", if context.is_empty() { "" } else { ": " })]
    Core { context: String, source: pcood_core::Error },

    #[error("{0}")]
    Usage(String),
}

impl Error {
    pub fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io { context: context.into(), source }
    }

    /// Prefix the error with a location such as a file path.
    pub fn context(self, what: impl std::fmt::Display) -> Self {
        let join = |c: String| if c.is_empty() { what.to_string() } else { format!("{what}: {c}") };
        match self {
            Error::Io { context, source } => Error::Io { context: join(context), source },
            Error::Core { context, source } => Error::Core { context: join(context), source },
            Error::Format(m) => Error::Format(join(m)),
            Error::Capacity(m) => Error::Capacity(join(m)),
            Error::Usage(m) => Error::Usage(join(m)),
        }
    }

    pub fn at(self, path: &Path) -> Self {
        self.context(path.display())
    }

    /// 0 success, 1 validation/format error, 2 I/O error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. } => 2,
            _ => 1,
        }
    }
}

impl From<pcood_core::Error> for Error {
    fn from(source: pcood_core::Error) -> Self {
        Error::Core { context: String::new(), source }
    }
}

impl From<io::Error> for Error {
    fn from(source: io::Error) -> Self {
        Error::io("", source)
    }
}
