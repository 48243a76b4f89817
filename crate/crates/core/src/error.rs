use thiserror::Error;

/// Errors raised across assembly, solvers, reduced models and persistence.
#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter outside the problem domain: {0}")]
    Domain(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("operator is not symmetric positive definite: {0}")]
    NotSpd(String),

    #[error("solver did not converge: {0}")]
    Stalled(String),

    #[error("zero diagonal entry in row {row}")]
    ZeroDiagonal { row: usize },

    #[error("degenerate reduced basis: {0}")]
    DegenerateBasis(String),

    #[error("snapshot is numerically dependent on the current basis (max residual {residual:e})")]
    DependentSnapshot { residual: f64 },

    #[error("ill-conditioned reduced model: {0}")]
    IllConditioned(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("model file error: {0}")]
    Format(String),

    #[error("checksum mismatch: stored {stored:#018x}, computed {computed:#018x}")]
    Checksum { stored: u64, computed: u64 },

    #[error("{stage} failed at mu = {mu:?}: {source}")]
    Stage {
        stage: String,
        mu: Vec<f64>,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn at_stage(self, stage: &str, mu: &[f64]) -> Self {
        Error::Stage { stage: stage.to_string(), mu: mu.to_vec(), source: Box::new(self) }
    }

    /// True for failures that originate from the configuration rather than a solver.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) | Error::Domain(_) | Error::InvalidInput(_) => true,
            Error::Stage { source, .. } => source.is_config(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
