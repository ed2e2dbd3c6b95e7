//! Crate-wide error type.

/// Errors produced by mesh construction, assembly, solvers, and estimators.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("mesh needs at least 2 cells per side, got {nx}x{ny}")]
    MeshTooSmall { nx: usize, ny: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cg did not converge within {iters} iterations (relative residual {residual:.3e})")]
    CgNoConvergence { iters: usize, residual: f64 },

    #[error(
        "newton did not converge within {iters} iterations (residual norms {history:?})"
    )]
    NewtonNoConvergence { iters: usize, history: Vec<f64> },

    #[error("newton line search stalled at iteration {iter} (residual {residual:.3e})")]
    NewtonStalled { iter: usize, residual: f64 },

    #[error("eigensolver rank deficiency: requested {requested}, achieved {achieved}")]
    RankDeficient { requested: usize, achieved: usize },

    #[error("training diverged (loss not finite) at stage {stage}, epoch {epoch}")]
    TrainingDiverged { stage: usize, epoch: usize },

    #[error("chain aborted after {failures} failed potential evaluations at step {step}")]
    ChainAborted { failures: usize, step: usize },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }
}
