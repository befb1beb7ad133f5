use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch in {context}: expected {expected}, got {found}")]
    ShapeMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("linear system is singular or not positive definite ({0})")]
    SingularSystem(String),

    #[error("SVD iteration failed to converge")]
    ConvergenceFailure,

    #[error("requested {requested} modes but the data has numerical rank {rank}")]
    RankDeficient { requested: usize, rank: usize },

    #[error("energy criterion cannot be met for tolerance {0}")]
    Unreachable(f64),

    #[error("zero denominator in error metric{}", column.map(|c| format!(" (column {c})")).unwrap_or_default())]
    ZeroDenominator { column: Option<usize> },

    #[error("solver diverged at step {step}: state norm {norm:e}")]
    SolverDiverged { step: usize, norm: f64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn shape(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        Error::ShapeMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }
}
