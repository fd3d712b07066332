use thiserror::Error;

/// Errors produced by batching, geometry, rendering and I/O routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error(
        "mesh {mesh}: face {face} references vertex {index}, but the mesh has {num_verts} vertices"
    )]
    FaceIndex {
        mesh: usize,
        face: usize,
        index: usize,
        num_verts: usize,
    },

    #[error("{context}: index {index} out of range for length {len}")]
    IndexOutOfRange {
        context: &'static str,
        index: usize,
        len: usize,
    },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("mesh {0} has no face with nonzero area")]
    DegenerateMesh(usize),

    #[error("mesh {mesh}: vertex {vertex} has no neighbors")]
    IsolatedVertex { mesh: usize, vertex: usize },

    #[error("{what} = {value} is outside {allowed}")]
    Range {
        what: &'static str,
        value: f64,
        allowed: &'static str,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("{0}")]
    Usage(String),

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("image codec: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    /// Process exit code for the command-line front end: 2 for usage errors,
    /// 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn shape(msg: impl Into<String>) -> Self {
        Error::Shape(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
