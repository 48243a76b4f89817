//! Structured unit-cube grids and the parametrized diffusion systems built on them.

mod assembly;
mod mesh;
mod problem;

pub use assembly::{assemble_system, galerkin_coarsen, AssembledSystem, Discretization, SampledRows};
pub use mesh::{Coarsening, DofMap, GridLevel, MeshHierarchy};
pub use problem::{BoundaryPartition, ParamPoint, ProblemId, ProblemSpec};
