use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    /// The diffusion coefficient is not strictly positive at some quadrature point.
    #[error("coefficient {value:e} is not positive at quadrature point ({x}, {y}) of element {element}")]
    CoercivityViolation {
        element: usize,
        x: f64,
        y: f64,
        value: f64,
    },

    #[error("non-finite field value at ({x}, {y}) of element {element}")]
    FieldEvaluation { element: usize, x: f64, y: f64 },

    #[error("shape mismatch: expected length {expected}, found {found}")]
    Shape { expected: usize, found: usize },

    #[error("matrix is not positive definite: pivot {pivot:e} at row {row}")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("kernel error: {0}")]
    Kernel(String),

    #[error("degenerate random field: {0}")]
    DegenerateField(String),

    #[error("unsupported field specification: {0}")]
    UnsupportedSpec(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// Failure raised while processing one Monte Carlo sample.
    #[error("{stage} failed for sample {sample}: {source}")]
    InSample {
        stage: &'static str,
        sample: usize,
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn in_sample(self, stage: &'static str, sample: usize) -> Self {
        Error::InSample {
            stage,
            sample,
            source: Box::new(self),
        }
    }

    /// Innermost error, skipping sample context wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::InSample { source, .. } => source.root(),
            e => e,
        }
    }
}
