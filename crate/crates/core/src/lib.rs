//! Reduced-basis warm-started iterative solvers for parametrized symmetric
//! positive-definite systems `A(mu) u = f(mu)`.
//!
//! The crate assembles two 3D parametrized diffusion problems on structured
//! hexahedral grids, solves them with multigrid-preconditioned conjugate
//! gradients (MGCG), and accelerates repeated solves either by a reduced-basis
//! initial guess (L1ROC warm start, RBI-MGCG) or by an iteration-indexed
//! reduced-basis preconditioner (RBI-MSRBCG). The [`bench`] module drives the
//! comparison experiments.

pub mod bench;
pub mod error;
pub mod grid_fem;
pub mod krylov;
pub mod linalg;
pub mod msrb;
pub mod multigrid;
pub mod reduced_basis;
pub mod warmstart;

pub use error::{Error, Result};
