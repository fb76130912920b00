//! Truncated Fock-space states and operators.

mod basis;
mod linalg;
mod operator;
mod ops;
mod state;

pub use basis::{BasisSpec, MAX_MODES};
pub use linalg::{expm, hermitian_eigenvalues, unitarity_defect, C64, EXPM_TOLERANCE};
pub use operator::{Block, ModeOperator, OperatorKind, UNITARITY_TOLERANCE};
pub use ops::{
    beamsplitter, cat, coherent, coherent_amplitudes, displace, displaced_overlap, displacement_matrix,
    epr_required_cutoff, epr_state, epr_state_truncated, epr_tail_weight, fock_state, squeezed_vacuum,
    thermal_populations, two_mode_squeeze, vacuum, DISPLACE_LOSS_TOLERANCE, EPR_TAIL_TOLERANCE,
    SQUEEZE_LOSS_TOLERANCE,
};
pub use state::{DensityOperator, FockVector, Ladder, Moments, Normalization, Truncated, NORM_TOLERANCE};

pub(crate) use linalg::ZERO;
pub(crate) use operator::PhotonImages;
