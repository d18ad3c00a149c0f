use thiserror::Error;

/// Errors surfaced by samplers, the oracle and model construction.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid distribution: {0}")]
    InvalidDist(String),

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("slice sampler exhausted {max_shrink} shrinkage steps (start {start}, theta {theta})")]
    SliceExhausted {
        start: f64,
        theta: f64,
        max_shrink: u32,
    },

    #[error("quadrature did not converge: error estimate {achieved:.3e} after {subdivisions} subdivisions (tolerance {requested:.3e})")]
    QuadratureNonConvergence {
        achieved: f64,
        requested: f64,
        subdivisions: usize,
    },

    #[error("improper integral: {0}")]
    ImproperIntegral(String),

    #[error("covariance factorization failed")]
    Factorization,

    #[error("non-finite gradient in Langevin update at x = {0:?}")]
    NonFiniteGradient(Vec<f64>),

    #[error("kernel `{kernel}` failed: {source}")]
    Kernel {
        kernel: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{0} is not covered by the stability table")]
    NotTabulated(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Wrap an error with the kernel that produced it.
    pub fn in_kernel(self, kernel: impl Into<String>) -> Self {
        Error::Kernel {
            kernel: kernel.into(),
            source: Box::new(self),
        }
    }
}
