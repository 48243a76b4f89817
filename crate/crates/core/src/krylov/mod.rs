//! Conjugate gradients with pluggable preconditioners, and point smoothers.

mod pcg;
mod smoother;

pub use pcg::{
    cg_solve, initial_residual, pcg_solve, IdentityPreconditioner, PcgState, Preconditioner, SmootherPreconditioner, SolveReport,
};
pub use smoother::{smooth, Smoother, SmootherKind};
