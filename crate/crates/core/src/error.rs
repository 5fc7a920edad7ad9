use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("item `{0}` has no category mapping")]
    MissingCategory(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("dataset is empty after k-core filtering (k = {0})")]
    EmptyAfterKCore(usize),

    #[error("node {0} is not in the graph")]
    UnknownNode(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("non-finite gradient in {0}")]
    NonFinite(String),

    #[error("index {index} out of range for {what} (len {len})")]
    OutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    /// Attach the path being read or written.
    pub fn at(self, path: impl Into<PathBuf>) -> Self {
        Error::File {
            path: path.into(),
            source: Box::new(self),
        }
    }
}

pub(crate) trait WithPath<T> {
    fn with_path(self, path: &std::path::Path) -> Result<T>;
}

impl<T, E: Into<Error>> WithPath<T> for std::result::Result<T, E> {
    fn with_path(self, path: &std::path::Path) -> Result<T> {
        self.map_err(|e| e.into().at(path))
    }
}
