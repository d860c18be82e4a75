use thiserror::Error;

/// Errors raised by the geometric constructions and checks.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid model parameters: {0}")]
    InvalidParams(String),
    #[error("operation requires c < 0, got c = {0}")]
    RequiresNegativeCurvature(f64),
    #[error("tangent vectors live at different base points")]
    MismatchedBasePoints,
    #[error("integration step must be positive, got {0}")]
    NonPositiveStep(f64),
    #[error("subspace of odd dimension {k} cannot have constant Kähler angle {phi} < π/2")]
    OddDimensionNonReal { k: usize, phi: f64 },
    #[error("normal rank k = {k} exceeds n - 1 = {max}")]
    DimensionTooLarge { k: usize, max: usize },
    #[error("Kähler angle {0} outside (0, π/2]")]
    AngleOutOfRange(f64),
    #[error("vector is not contained in the subspace (distance {0:e})")]
    NotInSubspace(f64),
    #[error("vector is numerically zero")]
    ZeroVector,
    #[error("no real solution: {0}")]
    NoRealSolution(String),
    #[error("value out of range: {0}")]
    OutOfRange(String),
    #[error("not applicable: {0}")]
    NotApplicable(String),
    #[error("singular matrix: {0}")]
    Singular(String),
    #[error("invalid germ: {0}")]
    InvalidGerm(String),
    #[error("chart is not an immersion at the sampled point: {0}")]
    RankDeficient(String),
    #[error("verification failed: {0}")]
    VerificationFailed(String),
}

pub type Result<T> = std::result::Result<T, Error>;
