use alloc::string::String;

/// Errors produced by the numerical core.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("electrodes do not fit: {count} electrodes of width {width} mm on a {side} mm side")]
    ElectrodeOverlap { count: usize, width: f64, side: f64 },

    #[error("electrode {electrode} does not cover any mesh node; increase divisions")]
    MeshResolution { electrode: usize },

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("non-positive conductivity {value} at element {element}")]
    NonPositiveConductivity { element: usize, value: f64 },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("problem is ill-posed: zero regularization with a rank-deficient sensitivity matrix")]
    IllPosed,

    #[error("lattice disconnects electrode {electrode} from the conductive network")]
    LatticeDisconnected { electrode: usize },

    #[error("count mismatch: {blobs} blobs vs {truth} true centers")]
    CountMismatch { blobs: usize, truth: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
