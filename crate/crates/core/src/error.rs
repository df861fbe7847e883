use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("degree of polarization undefined for s0 = {0}")]
    UndefinedDop(f64),
    #[error("image of {width}x{height} is not a multiple of {multiple} in both dimensions")]
    Dimension {
        width: usize,
        height: usize,
        multiple: usize,
    },
    #[error("image planes disagree in size: expected {expected:?}, found {found:?}")]
    PlaneMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("unknown or unsupported mosaic pattern: {0}")]
    UnknownPattern(String),
    #[error("face {0} is degenerate (zero area)")]
    DegenerateFace(usize),
    #[error("vertex {0} has no adjacent non-degenerate face")]
    IsolatedVertex(usize),
    #[error("face {face} is invalid: {reason}")]
    InvalidFace { face: usize, reason: &'static str },
    #[error("non-manifold edge ({0}, {1}) shared by {2} faces")]
    NonManifoldEdge(usize, usize, usize),
    #[error("inconsistently oriented edge ({0}, {1})")]
    InconsistentOrientation(usize, usize),
    #[error("point is behind the camera (depth {0})")]
    BehindCamera(f64),
    #[error("invalid camera: {0}")]
    InvalidCamera(String),
    #[error("point set is empty")]
    EmptyPointSet,
    #[error("cost is not finite: {0}")]
    NonFiniteCost(String),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}
