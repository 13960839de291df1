use std::io;
use std::path::{Path, PathBuf};

/// Failure category; each maps to a process exit code.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ErrorClass {
    Config,
    Data,
    Checkpoint,
    Internal,
}

impl ErrorClass {
    pub fn exit_code(self) -> i32 {
        match self {
            ErrorClass::Config => 2,
            ErrorClass::Data => 3,
            ErrorClass::Checkpoint => 4,
            ErrorClass::Internal => 5,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorClass::Config => "config",
            ErrorClass::Data => "data",
            ErrorClass::Checkpoint => "checkpoint",
            ErrorClass::Internal => "internal",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{}{source}", prefix(path))]
    Io {
        path: PathBuf,
        class: ErrorClass,
        #[source]
        source: io::Error,
    },
    #[error("{}line {line}: {message}", prefix(path))]
    Parse { path: PathBuf, line: usize, message: String },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("invalid data: {0}")]
    Data(String),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Model(#[from] segrep_core::Error),
}

fn prefix(path: &Path) -> String {
    if path.as_os_str().is_empty() {
        String::new()
    } else {
        format!("{}: ", path.display())
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub fn class(&self) -> ErrorClass {
        use segrep_core::Error as M;
        match self {
            Error::Io { class, .. } => *class,
            Error::Parse { .. } | Error::Data(_) => ErrorClass::Data,
            Error::Config(_) => ErrorClass::Config,
            Error::Checkpoint(_) => ErrorClass::Checkpoint,
            Error::Model(e) => match e {
                M::Config(_) => ErrorClass::Config,
                M::Validation(_) | M::InvalidSegmentation(_) => ErrorClass::Data,
                _ => ErrorClass::Internal,
            },
        }
    }

    pub(crate) fn io(path: &Path, class: ErrorClass, source: io::Error) -> Self {
        Error::Io {
            path: path.to_path_buf(),
            class,
            source,
        }
    }

    /// Attaches a file name to a parse error produced from a reader.
    pub(crate) fn at(self, path: &Path) -> Self {
        match self {
            Error::Parse { line, message, .. } => Error::Parse {
                path: path.to_path_buf(),
                line,
                message,
            },
            Error::Io { class, source, .. } => Error::Io {
                path: path.to_path_buf(),
                class,
                source,
            },
            other => other,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: PathBuf::new(),
            line,
            message: message.into(),
        }
    }
}
