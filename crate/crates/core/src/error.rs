use thiserror::Error;

/// Errors raised by jet arithmetic, bundle maps, integration and the
/// Jacobi-tensor machinery.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GeomError {
    #[error("jet order mismatch: {left} vs {right}")]
    OrderMismatch { left: usize, right: usize },

    #[error("division by a jet with zero real part")]
    SingularJet,

    #[error("domain error: {0}")]
    DomainError(String),

    #[error("jet order {order} exceeds the configured cap {cap}")]
    OrderCap { order: usize, cap: usize },

    #[error("involution level {level} invalid for bundle order {order}")]
    BadLevel { level: usize, order: usize },

    #[error("bundle order {order} too small (need at least {needed})")]
    BadOrder { order: usize, needed: usize },

    #[error("projection index {index} out of range 1..={order}")]
    BadIndex { index: usize, order: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("fiber operation on points over different bases (gap {gap:e})")]
    BaseMismatch { gap: f64 },

    #[error("point lies outside the slashed bundle")]
    OutsideSlashed,

    #[error("trajectory truncated at t = {t}: {reason}")]
    Truncated { t: f64, reason: String },

    #[error("variation geodesic at s = {s:?} truncated: {reason}")]
    TruncatedVariation { s: Vec<f64>, reason: String },

    #[error("mixed derivative depth {depth} exceeds cap {cap}")]
    DepthCap { depth: usize, cap: usize },

    #[error("no admissible variation width down to eps = {eps:e}")]
    ShrinkEpsilon { eps: f64 },

    #[error("grid has {len} points, need at least {needed}")]
    GridTooShort { len: usize, needed: usize },

    #[error("frame {{c', e_a}} is degenerate at t = {t}")]
    SingularFrame { t: f64 },

    #[error("tensor is not transversal (|J c'| = {tangent:e}, |Im J off W| = {image:e})")]
    NotTransversal { tangent: f64, image: f64 },

    #[error("transverse part singular at t = {0:?}")]
    SingularAt(Vec<f64>),

    #[error("variation is not a local diffeomorphism at t = {t}")]
    NotDiffeo { t: f64 },

    #[error("base geodesic self-intersects near t = {t1} and t = {t2}")]
    NotEmbeddable { t1: f64, t2: f64 },

    #[error("chart construction failed: {0}")]
    ChartFailed(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("configuration error: {0}")]
    Config(String),
}

pub type Result<T, E = GeomError> = std::result::Result<T, E>;
