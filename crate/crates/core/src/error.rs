use thiserror::Error;

#[derive(Debug, Error)]
pub enum LabError {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("depth {depth} exceeds the {available} subdivision levels available")]
    DepthOutOfRange { depth: usize, available: usize },

    #[error("integer overflow computing {0}")]
    Overflow(&'static str),

    #[error("resource cap exceeded: {0}")]
    ResourceCap(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("structural error: {0}")]
    Structural(String),

    #[error("traced form is not proportional to the base form (relative residual {residual:e})")]
    NotProportional { residual: f64 },

    #[error("resistance scale {0} lies outside (0, 1)")]
    ScaleOutOfRange(f64),

    #[error("walk dimension {0} is not above 2")]
    WalkDimension(f64),

    #[error("{solver} did not converge: residual {residual:e} after {iterations} iterations")]
    NonConvergence {
        solver: &'static str,
        residual: f64,
        iterations: usize,
    },

    #[error("refinement mismatch: {0}")]
    Refinement(String),

    #[error("empty ball around vertex {center} with radius {radius}")]
    EmptyBall { center: usize, radius: f64 },

    #[error("no finite {epsilon}-chain between {x} and {y}")]
    NoChain { epsilon: f64, x: usize, y: usize },

    #[error("partition of unity denominator {0} fell below 1/2; the net is not maximal")]
    NetNotMaximal(f64),

    #[error("function is not harmonic on the ball: residual {0:e}")]
    NotHarmonic(f64),

    #[error("regularity violated at r = {r}, R = {big_r}")]
    Regularity { r: f64, big_r: f64 },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LabError>;
