use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid graph: {0}")]
    Graph(String),

    #[error("invalid protocol configuration: {0}")]
    Config(String),

    #[error("random regular graph generation failed after {attempts} attempts (n={n}, d={d}); try a different seed")]
    RejectionBudget { n: usize, d: usize, attempts: usize },

    #[error("edge-process analysis requires regular graph with degree >= 2: {0}")]
    NotRegular(String),

    #[error("linear solver did not converge: {0}")]
    Solver(String),

    #[error("Cesàro limit did not converge within {steps} terms (last increment {last_increment:e})")]
    CesaroBudget { steps: usize, last_increment: f64 },

    #[error("mixing time supremum not certified within {steps} steps (partial max {partial_max})")]
    MixingBudget { steps: usize, partial_max: f64 },

    #[error("pairwise averaging matrix is not mixing: lambda2 = {0}")]
    NotMixing(f64),

    #[error("config error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("{0}")]
    Invalid(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
