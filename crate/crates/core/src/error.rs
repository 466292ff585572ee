use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: empty edge")]
    EmptyEdge { line: usize },

    #[error("line {line}: node `{node}` appears more than once in the same edge")]
    DuplicateNode { line: usize, node: String },

    #[error("input contains no edges")]
    NoEdges,

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// The requested quantity diverges or the closed form is outside its region of validity.
    #[error("divergent quantity: {0}")]
    Divergent(String),

    #[error("unsupported regime: {0}")]
    Unsupported(String),

    #[error("power iteration did not converge after {iterations} iterations (residual {residual:e})")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("rejection budget of {budget} draws exhausted while sampling negative {index}")]
    RejectionBudget { budget: usize, index: usize },

    #[error("candidate has {sources} possible source edges, above the cap of {cap}")]
    SourceCap { sources: usize, cap: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
