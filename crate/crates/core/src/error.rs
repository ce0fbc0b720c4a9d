use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Clone, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    /// A scalar field was evaluated outside the region where it is defined
    /// (e.g. the logarithm in the Kida Hamiltonian).
    #[error("`{name}` evaluated outside its domain: {reason}")]
    Domain { name: String, reason: String },

    #[error("Killing form is degenerate (rank {rank} < {dim}): the algebra is not semisimple")]
    NotSemisimple { rank: usize, dim: usize },

    #[error(
        "fixed q cannot reach the target momentum (residual {residual:.3e}); \
         B(q) is singular along the target, choose a different q"
    )]
    SingularPinning { residual: f64 },

    #[error(
        "initial-point solve did not converge in {iterations} iterations \
         (residual {residual:.3e}); the target may lie outside the image of the momentum map"
    )]
    PinningDiverged { iterations: usize, residual: f64 },

    #[error("stage equations did not converge in {iterations} iterations (residual {residual:.3e})")]
    StageSolve { iterations: usize, residual: f64 },

    #[error("step {step} (t = {time}): {source}")]
    Step {
        step: usize,
        time: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("chart: {0}")]
    Chart(String),

    #[error("parse error on line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

impl Error {
    pub(crate) fn domain(name: impl Into<String>, reason: impl Into<String>) -> Self {
        Error::Domain {
            name: name.into(),
            reason: reason.into(),
        }
    }

    pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
        if expected == found {
            Ok(())
        } else {
            Err(Error::DimensionMismatch { expected, found })
        }
    }
}
