use thiserror::Error;

/// Errors produced by the core estimators and geometry kernels.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("matrix is not skew-symmetric: |S + S^T|_F = {0:e}")]
    NotSkewSymmetric(f64),
    #[error("matrix is not a rotation: |R^T R - I|_F = {orthogonality:e}, det = {det}")]
    NotRotation { orthogonality: f64, det: f64 },
    #[error("matrix is rank deficient (smallest singular value {0:e}); projection is not unique")]
    DegenerateMatrix(f64),
    #[error("input is empty")]
    EmptyInput,
    #[error("index subset is empty")]
    EmptySubset,
    #[error("index {index} out of range for {len} samples")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(&'static str),
    #[error("invalid scenario: {0}")]
    InvalidScenario(&'static str),
    #[error("point cloud has {have} points, {need} required")]
    TooFewPoints { have: usize, need: usize },
    #[error("point cloud contains a non-finite coordinate")]
    NonFinitePoint,
    #[error("point cloud has zero extent")]
    DegenerateCloud,
    #[error("triangle has a side shorter than the minimum length")]
    DegenerateTriangle,
    #[error("points are collinear")]
    CollinearPoints,
    #[error("point clouds differ in length ({src} vs {dst})")]
    CloudLengthMismatch { src: usize, dst: usize },
    #[error("collected {collected} hypotheses after {attempts} attempts (cap reached)")]
    AttemptCapExceeded { collected: usize, attempts: usize },
}

pub type Result<T> = core::result::Result<T, Error>;
