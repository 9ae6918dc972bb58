use thiserror::Error;

/// Crate-wide error type. Variants map onto the failure classes of the
/// public operations: invalid inputs, domain violations, depth/budget
/// exhaustion and degenerate conditioning.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid tree spec: {0}")]
    InvalidSpec(String),

    #[error("invalid density: {0}")]
    InvalidDensity(String),

    #[error("radius {radius} exceeds stored depth {depth}")]
    RadiusExceedsDepth { radius: u32, depth: u32 },

    #[error("vertex {0} outside the configuration domain")]
    OutsideDomain(u32),

    #[error("vertex {vertex} outside the tree (size {size})")]
    OutsideTree { vertex: u32, size: u32 },

    #[error("domain is not a ball around the root")]
    NotABall,

    #[error("region escapes the required volume: {0}")]
    RegionEscapes(String),

    #[error("tree too shallow: need stored depth >= {need}, have {have}")]
    TreeTooShallow { need: u32, have: u32 },

    #[error("pushout steps past the stored depth at vertex {0}")]
    DepthBudget(u32),

    #[error("merge precondition violated at vertex {0}")]
    MergePrecondition(u32),

    #[error("not a type-changing cutset interior: {0}")]
    InvalidCutset(String),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("conditioning event has probability zero")]
    ZeroConditioning,

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
