use std::path::PathBuf;

/// Errors raised by the runner and the file formats.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),
    #[error("{path}: row {row}: {msg}")]
    Parse { path: PathBuf, row: usize, msg: String },
    #[error("{path}: no rows")]
    NoRows { path: PathBuf },
    #[error("infeasible data spec: {0}")]
    Infeasible(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Core(#[from] ntmp_core::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Process exit status: 2 config or input format, 3 infeasible tuple
    /// layout, 4 ill-conditioned mixing system, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        use ntmp_core::Error as C;
        match self {
            Error::Config(_) | Error::Parse { .. } | Error::NoRows { .. } => 2,
            Error::Infeasible(_) => 3,
            Error::Core(C::InsufficientClass { .. }) => 3,
            Error::Core(C::IllConditioned { .. }) | Error::Core(C::UnsplittableDegenerate) => 4,
            Error::Core(C::InvalidArgument(_)) | Error::Core(C::DimensionMismatch { .. }) => 2,
            _ => 1,
        }
    }
}

pub(crate) fn io_err(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Error {
    let path = path.into();
    move |source| Error::Io { path, source }
}
