use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Format {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("invalid {what}: {msg}")]
    Validation { what: &'static str, msg: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: unsupported image: {msg}")]
    UnsupportedImage { path: PathBuf, msg: String },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("mesh is not watertight ({boundary_edges} boundary edges); sign is undefined")]
    NotWatertight { boundary_edges: usize },

    #[error("no sign change in the SDF field; extracted surface is empty")]
    EmptySurface,

    #[error("edge ({0}, {1}) has no sign change")]
    NoCrossing(u32, u32),

    #[error("sample {index} at ({x}, {y}, {z}) lies outside the grid bounds")]
    OutOfBounds { index: usize, x: f64, y: f64, z: f64 },

    #[error("joint '{0}' is behind the camera")]
    JointBehindCamera(String),

    #[error("part {0} is empty")]
    EmptyPart(u32),

    #[error("surface vanished at sculpt iteration {0}")]
    SurfaceVanished(usize),

    #[error("{0}")]
    Config(String),

    #[error("stage '{stage}' failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn validation(what: &'static str, msg: impl Into<String>) -> Self {
        Error::Validation {
            what,
            msg: msg.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, line: usize, msg: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            line,
            msg: msg.into(),
        }
    }

    /// Name of the pipeline stage this error was raised in, if any.
    pub fn stage(&self) -> Option<&'static str> {
        match self {
            Error::Stage { stage, .. } => Some(stage),
            _ => None,
        }
    }
}
