use thiserror::Error;

/// Structural defects detected by [`crate::trees::validate_tree`].
#[derive(Debug, Clone, PartialEq, Error)]
pub enum TreeError {
    #[error("tree has no nodes")]
    Empty,
    #[error("duplicate node id {0}")]
    DuplicateId(i64),
    #[error("edge references unknown node {0}")]
    UnknownNode(i64),
    #[error("self-loop on node {0}")]
    SelfLoop(i64),
    #[error("duplicate edge {0}-{1}")]
    DuplicateEdge(i64, i64),
    #[error("edge {u}-{v} has non-positive or non-finite weight {w}")]
    NonPositiveWeight { u: i64, v: i64, w: f64 },
    #[error("graph contains a cycle ({edges} edges on {nodes} nodes)")]
    Cycle { nodes: usize, edges: usize },
    #[error("graph is disconnected ({components} components)")]
    Disconnected { components: usize },
    #[error("node {id} has {found} coordinates, expected {expected}")]
    CoordinateDim { id: i64, expected: usize, found: usize },
}

impl TreeError {
    /// Stable machine-readable code for each defect class.
    pub fn code(&self) -> &'static str {
        match self {
            TreeError::Empty => "empty",
            TreeError::DuplicateId(_) => "duplicate_id",
            TreeError::UnknownNode(_) => "unknown_node",
            TreeError::SelfLoop(_) => "self_loop",
            TreeError::DuplicateEdge(..) => "duplicate_edge",
            TreeError::NonPositiveWeight { .. } => "non_positive_weight",
            TreeError::Cycle { .. } => "cycle",
            TreeError::Disconnected { .. } => "disconnected",
            TreeError::CoordinateDim { .. } => "coordinate_dim",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid hyperboloid point: {0}")]
    InvalidPoint(String),
    #[error("vector is not tangent to the base point (residual {0:e})")]
    NotTangent(f64),
    #[error("tangent vector is not based at the basepoint")]
    NotAtBasepoint,
    #[error("tangent vector is timelike (Minkowski square {0:e})")]
    NonSpacelike(f64),
    #[error("hyperbolic function argument {0} exceeds the overflow cap")]
    Overflow(f64),
    #[error("non-finite value: {0}")]
    NonFinite(String),
    #[error("invalid curvature {0}: must be finite and negative")]
    InvalidCurvature(f64),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error(transparent)]
    Tree(#[from] TreeError),
    #[error("input points {0} and {1} coincide")]
    DuplicatePoints(usize, usize),
    #[error("no direction separating the projections was found after {0} attempts")]
    NoSeparatingDirection(usize),
    #[error("empty batch")]
    EmptyBatch,
    #[error("training diverged at epoch {epoch}: {reason}")]
    Divergence { epoch: usize, reason: String },
    #[error("distortion target {lambda} unreachable on the scale grid (best distortion {best_dist})")]
    TargetUnreachable { lambda: f64, best_dist: f64 },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(expected: usize, found: usize) -> Result<()> {
    if expected != found {
        return Err(Error::DimensionMismatch { expected, found });
    }
    Ok(())
}
