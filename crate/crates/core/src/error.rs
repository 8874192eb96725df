use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("mesh contains no triangles")]
    EmptyModel,

    #[error("invalid scene: {0}")]
    InvalidScene(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("pose ({x}, {y}) lies outside the area of interest")]
    OutOfBounds { x: f64, y: f64 },

    #[error("label quaternion has zero norm")]
    DegenerateLabel,

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("referenced file is missing: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("predictions do not cover {} sample(s): {}", .missing.len(), preview(.missing))]
    Coverage { missing: Vec<u64> },

    #[error("sample id {0} is not among the candidate training poses")]
    Lookup(u64),

    #[error("{}: {source}", .path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: image codec: {message}", .path.display())]
    Image { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for this error: 1 usage, 2 data integrity, 3 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 1,
            Error::Io { .. } | Error::Image { .. } => 3,
            _ => 2,
        }
    }
}

fn preview(ids: &[u64]) -> String {
    const SHOWN: usize = 20;
    let mut s = ids
        .iter()
        .take(SHOWN)
        .map(|id| id.to_string())
        .collect::<Vec<_>>()
        .join(", ");
    if ids.len() > SHOWN {
        s.push_str(&format!(", ... ({} more)", ids.len() - SHOWN));
    }
    s
}
