use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected:?}, found {found:?}")]
    DimensionMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("non-positive depth {value} at pixel ({x}, {y})")]
    NonPositiveDepth { x: usize, y: usize, value: f64 },

    #[error("no seeds: the sparse depth map has no valid pixel")]
    NoSeeds,

    #[error("need at least {needed} valid depth pixels, found {found}")]
    NotEnoughPoints { needed: usize, found: usize },

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("non-finite value in {variable} at iteration {iteration}")]
    NonFinite {
        variable: &'static str,
        iteration: usize,
    },

    #[error("sweep value {value}: {source}")]
    Sweep {
        value: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
