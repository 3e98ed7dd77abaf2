use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("edge {edge} is a loop at vertex {vertex}")]
    Loop { edge: usize, vertex: usize },

    #[error("vertex {vertex} has degree {found}, expected {expected}")]
    DegreeMismatch {
        vertex: usize,
        expected: usize,
        found: usize,
    },

    #[error("graph needs at least 2 vertices and degree at least 2")]
    TooFewVertices,

    #[error("{what}: size {size} exceeds cap {cap}")]
    TooLarge { what: &'static str, size: f64, cap: f64 },

    #[error("search budget of {nodes} nodes exhausted")]
    BudgetExhausted { nodes: u64 },

    #[error("value outside the hypothesis range: {0}")]
    OutOfRange(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("series diverges: ratio {ratio} >= 1")]
    DivergentSeries { ratio: f64 },

    #[error("numeric instability: {0}")]
    NumericInstability(String),

    #[error("degenerate edge {edge}: endpoint rows are fully correlated")]
    DegenerateEdge { edge: usize },

    #[error("basis matrix is rank deficient")]
    RankDeficient,

    #[error("restricted Hessian is singular or not negative definite")]
    SingularHessian,

    #[error("ratio undefined: denominator sums to zero")]
    UndefinedRatio,

    #[error("all {samples} samples were censored")]
    AllCensored { samples: u64 },

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
