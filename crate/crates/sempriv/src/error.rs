use std::path::PathBuf;

/// Failures of the file-backed tooling layered on top of the core.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] sempriv_core::Error),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
    #[error("{}: malformed CSV: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    /// Dataset files are absent; the message tells the user how to obtain them.
    #[error("{dataset} files not found under {}\n{instructions}", root.display())]
    MissingDataset { dataset: &'static str, root: PathBuf, instructions: String },
    #[error("{}: malformed dataset file: {message}", path.display())]
    Format { path: PathBuf, message: String },
    #[error("plot error: {0}")]
    Plot(String),
    /// Bad command-line usage. Reported with exit code 2.
    #[error("{0}")]
    Usage(String),
}

/// Broad class of a failure, printed in front of CLI error messages.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    Config,
    Data,
    Divergence,
    Io,
    Usage,
    Runtime,
}

impl Category {
    pub fn as_str(self) -> &'static str {
        match self {
            Category::Config => "config",
            Category::Data => "data",
            Category::Divergence => "training-divergence",
            Category::Io => "io",
            Category::Usage => "usage",
            Category::Runtime => "runtime",
        }
    }
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub fn category(&self) -> Category {
        use sempriv_core::Error as C;
        match self {
            Error::Core(C::Config { .. } | C::Validation(_)) => Category::Config,
            Error::Core(C::Data(_)) | Error::MissingDataset { .. } | Error::Format { .. } => Category::Data,
            Error::Core(C::Divergence { .. }) => Category::Divergence,
            Error::Core(C::Checkpoint(_)) | Error::Io { .. } | Error::Csv { .. } | Error::Plot(_) => Category::Io,
            Error::Usage(_) => Category::Usage,
            Error::Core(_) => Category::Runtime,
        }
    }

    /// Process exit code: 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        if self.category() == Category::Usage {
            2
        } else {
            1
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
