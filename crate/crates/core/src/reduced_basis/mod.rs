//! POD and L1ROC reduced bases, DEIM point selection and the L1 indicator.

mod deim;
mod l1roc;
mod pod;

pub use deim::{deim_coefficients, deim_extend, deim_extend_excluding, DeimBasis};
pub use l1roc::{l1_indicator, l1roc_offline, l1roc_online, L1rocModel, OnlineSolution};
pub use pod::{pod_build, rbm_pod_solve, GalerkinSolver, PodBasis};

pub use pod::correlation_eigen;
