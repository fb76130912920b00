use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid basis: {0}")]
    InvalidBasis(String),

    #[error("basis mismatch: {0}")]
    BasisMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The state does not fit below the Fock cutoff.
    #[error(
        "cutoff too small: weight {tail:.3e} above the cutoff exceeds {tolerance:.1e}; \
         increase the cutoff to N >= {required}"
    )]
    CutoffTooSmall {
        tail: f64,
        tolerance: f64,
        required: usize,
    },

    #[error("truncation loss {loss:.3e} exceeds {tolerance:.1e} in {context}; increase the cutoff")]
    Truncation {
        loss: f64,
        tolerance: f64,
        context: String,
    },

    #[error("quadrature value {chi} outside the reliable range |chi| <= {max:.3} for cutoff {cutoff}")]
    QuadratureRange { chi: f64, max: f64, cutoff: usize },

    #[error(
        "outcome grid too small: normalization deficit {deficit:.3e} exceeds {tolerance:.1e} \
         (half-width {half_width}); widen the grid"
    )]
    GridTooSmall {
        deficit: f64,
        tolerance: f64,
        half_width: f64,
    },

    #[error("physical regime check failed: {0}")]
    Regime(String),

    #[error("singular conditioning variance {0:e}")]
    SingularConditioning(f64),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    /// Errors caused by cutoffs, grids or quadrature ranges that a larger
    /// numerical budget would fix.
    pub fn is_numerical_range(&self) -> bool {
        matches!(
            self,
            Error::CutoffTooSmall { .. }
                | Error::Truncation { .. }
                | Error::QuadratureRange { .. }
                | Error::GridTooSmall { .. }
        )
    }
}
