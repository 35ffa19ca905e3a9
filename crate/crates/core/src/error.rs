use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("quaternion norm {norm} is too far from 1")]
    NonUnitQuaternion { norm: f32 },

    #[error("rotation is not orthonormal (deviation {deviation:e})")]
    NonOrthonormal { deviation: f32 },

    #[error("degenerate face {face}")]
    DegenerateFace { face: usize },

    #[error("index {index} out of range (len {len}) in {what}")]
    IndexOutOfRange {
        what: &'static str,
        index: usize,
        len: usize,
    },

    #[error("splat {index} has no triangle binding")]
    MissingBinding { index: usize },

    #[error("mesh is empty")]
    EmptyMesh,

    #[error("mesh is not watertight: {bad_edges} edges are not shared by exactly two faces")]
    NotWatertight { bad_edges: usize },

    #[error("missing joint {0:?} in motion frame")]
    MissingJoint(String),

    #[error("unknown joint {0:?} in motion frame")]
    UnknownJoint(String),

    #[error("{what}: expected {expected}, got {got}")]
    CountMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("skin weights of vertex {vertex} sum to {sum}")]
    BadSkinWeights { vertex: usize, sum: f32 },

    #[error("exterior point")]
    ExteriorPoint,

    #[error("{} splats have tracked points outside the cage (first: {:?})", .splats.len(), .splats.first())]
    ExteriorSplats { splats: Vec<usize> },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("invalid value for {name}: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("disconnected occupancy: {components} components")]
    DisconnectedOccupancy { components: usize },

    #[error("no roots found within the given radius")]
    NoRootsFound,

    #[error("mesh has no scalp faces")]
    NoScalpFaces,

    #[error("no interior hair")]
    NoInteriorHair,

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn invalid(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
