//! Geometric multigrid V-cycle with Galerkin coarse operators, used on its
//! own or as the preconditioner of MGCG.

use nalgebra::{Cholesky, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::grid_fem::{galerkin_coarsen, Discretization};
use crate::krylov::{pcg_solve, Preconditioner, Smoother, SmootherKind, SolveReport};
use crate::linalg::{axpy, CsrMatrix};

/// Smoothing schedule of the V-cycle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MgConfig {
    pub sweeps: usize,
    pub pre: SmootherKind,
    pub post: SmootherKind,
    pub jacobi_weight: f64,
}

impl Default for MgConfig {
    /// One damped Jacobi sweep before and after the coarse correction.
    fn default() -> Self {
        Self { sweeps: 1, pre: SmootherKind::Jacobi, post: SmootherKind::Jacobi, jacobi_weight: 2.0 / 3.0 }
    }
}

impl MgConfig {
    /// Forward Gauss-Seidel before and backward after keeps the cycle symmetric.
    pub fn gauss_seidel(sweeps: usize) -> Self {
        Self { sweeps, pre: SmootherKind::GaussSeidelForward, post: SmootherKind::GaussSeidelBackward, jacobi_weight: 1.0 }
    }

    pub fn jacobi(sweeps: usize, weight: f64) -> Self {
        Self { sweeps, pre: SmootherKind::Jacobi, post: SmootherKind::Jacobi, jacobi_weight: weight }
    }

    pub fn label(&self) -> String {
        if self.pre == SmootherKind::Jacobi || self.post == SmootherKind::Jacobi {
            format!("mg-v({0},{0};{1}/{2};w={3})", self.sweeps, self.pre, self.post, self.jacobi_weight)
        } else {
            format!("mg-v({0},{0};{1}/{2})", self.sweeps, self.pre, self.post)
        }
    }
}

/// Per-parameter multigrid hierarchy: operators on every level, transfers
/// and a factorized coarsest operator. Immutable after construction.
pub struct MgContext {
    /// `operators[0]` is the coarsest level, the last one the finest.
    operators: Vec<CsrMatrix>,
    smoothers: Vec<Smoother>,
    prolongations: Vec<CsrMatrix>,
    restrictions: Vec<CsrMatrix>,
    coarse: Cholesky<f64, Dyn>,
    config: MgConfig,
}

impl std::fmt::Debug for MgContext {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MgContext")
            .field("levels", &self.operators.len())
            .field("sizes", &self.operators.iter().map(CsrMatrix::nrows).collect::<Vec<_>>())
            .field("config", &self.config)
            .finish()
    }
}

impl MgContext {
    /// Builds all coarse operators `A_i = P_i^T A_{i+1} P_i` from the finest
    /// operator. With no prolongations the context has a single level and the
    /// cycle is a direct solve.
    pub fn build(a_fine: &CsrMatrix, prolongations: &[CsrMatrix], config: MgConfig) -> Result<Self> {
        if let Some(p) = prolongations.last() {
            if p.nrows() != a_fine.nrows() {
                return Err(Error::DimensionMismatch(format!(
                    "finest prolongation has {} rows, operator has {}",
                    p.nrows(),
                    a_fine.nrows()
                )));
            }
        }
        let mut ops = vec![a_fine.clone()];
        for p in prolongations.iter().rev() {
            let coarse = galerkin_coarsen(ops.last().unwrap(), p)?;
            ops.push(coarse);
        }
        ops.reverse();

        let coarse = ops[0]
            .to_dense()
            .cholesky()
            .ok_or_else(|| Error::NotSpd(format!("coarsest operator ({0}x{0}) failed to factor", ops[0].nrows())))?;
        let smoothers =
            ops.iter().map(|op| Smoother::new(op).map(|s| s.with_jacobi_weight(config.jacobi_weight))).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            smoothers,
            prolongations: prolongations.to_vec(),
            restrictions: prolongations.iter().map(CsrMatrix::transpose).collect(),
            operators: ops,
            coarse,
            config,
        })
    }

    pub fn levels(&self) -> usize {
        self.operators.len()
    }

    pub fn finest_level(&self) -> usize {
        self.operators.len() - 1
    }

    pub fn operator(&self, level: usize) -> &CsrMatrix {
        &self.operators[level]
    }

    pub fn config(&self) -> MgConfig {
        self.config
    }

    fn coarse_solve(&self, b: &[f64]) -> Vec<f64> {
        let x = self.coarse.solve(&DVector::from_column_slice(b));
        x.as_slice().to_vec()
    }

    /// One V-cycle for `A_level u = b` starting from zero.
    pub fn vcycle(&self, b: &[f64], level: usize) -> Result<Vec<f64>> {
        if level >= self.levels() {
            return Err(Error::InvalidInput(format!("level {level} not in a {}-level context", self.levels())));
        }
        if b.len() != self.operators[level].nrows() {
            return Err(Error::DimensionMismatch(format!(
                "rhs of length {} at level {level} of size {}",
                b.len(),
                self.operators[level].nrows()
            )));
        }
        Ok(self.cycle(b, level))
    }

    fn cycle(&self, b: &[f64], level: usize) -> Vec<f64> {
        if level == 0 {
            return self.coarse_solve(b);
        }
        let a = &self.operators[level];
        let smoother = &self.smoothers[level];
        let mut u = vec![0.0; b.len()];
        smoother.apply(a, &mut u, b, self.config.sweeps, self.config.pre);

        let r = a.residual(b, &u);
        let rc = self.restrictions[level - 1].matvec(&r);
        let ec = if level == 1 { self.coarse_solve(&rc) } else { self.cycle(&rc, level - 1) };
        let correction = self.prolongations[level - 1].matvec(&ec);
        axpy(1.0, &correction, &mut u);

        smoother.apply(a, &mut u, b, self.config.sweeps, self.config.post);
        u
    }
}

impl Preconditioner for MgContext {
    fn apply(&self, r: &[f64], _k: usize) -> Result<Vec<f64>> {
        self.vcycle(r, self.finest_level())
    }

    fn is_symmetric(&self) -> bool {
        matches!(
            (self.config.pre, self.config.post),
            (SmootherKind::GaussSeidelForward, SmootherKind::GaussSeidelBackward)
                | (SmootherKind::GaussSeidelSymmetric, SmootherKind::GaussSeidelSymmetric)
                | (SmootherKind::Jacobi, SmootherKind::Jacobi)
        )
    }

    fn label(&self) -> String {
        self.config.label()
    }
}

/// Multigrid context for `A(mu)` on a discretization's hierarchy.
pub fn mg_build(a_fine: &CsrMatrix, disc: &Discretization, config: MgConfig) -> Result<MgContext> {
    MgContext::build(a_fine, disc.prolongations(), config)
}

/// `MGCG`: PCG preconditioned by one V-cycle on the finest level.
pub fn mgcg_solve(a: &CsrMatrix, f: &[f64], x0: &[f64], ctx: &MgContext, tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
    let (x, mut report) = pcg_solve(a, f, x0, ctx, tol, max_iter)?;
    report.method = format!("mgcg[{}]", ctx.label());
    Ok((x, report))
}

/// Tight-tolerance MGCG producing the training snapshots of the reduced models.
#[derive(Debug, Clone, Copy)]
pub struct HighFidelity<'a> {
    disc: &'a Discretization,
    config: MgConfig,
    tol: f64,
    max_iter: usize,
}

impl<'a> HighFidelity<'a> {
    pub fn new(disc: &'a Discretization, config: MgConfig, tol: f64, max_iter: usize) -> Self {
        Self { disc, config, tol, max_iter }
    }

    pub fn discretization(&self) -> &'a Discretization {
        self.disc
    }

    pub fn tolerance(&self) -> f64 {
        self.tol
    }

    pub fn context(&self, a: &CsrMatrix) -> Result<MgContext> {
        mg_build(a, self.disc, self.config)
    }

    /// Solves `A x = rhs` from zero. Running into the iteration cap is accepted
    /// once the true residual is within `sqrt(tol)`, since very tight
    /// tolerances stagnate at round-off.
    pub fn solve_with(&self, a: &CsrMatrix, ctx: &MgContext, rhs: &[f64]) -> Result<Vec<f64>> {
        let (x, report) = mgcg_solve(a, rhs, &vec![0.0; rhs.len()], ctx, self.tol, self.max_iter)?;
        if !report.converged && report.true_residual > self.tol.sqrt() {
            return Err(Error::Stalled(format!(
                "high-fidelity solve stalled at relative residual {:e} after {} iterations",
                report.true_residual, report.iterations
            )));
        }
        Ok(x)
    }

    pub fn solve(&self, a: &CsrMatrix, rhs: &[f64]) -> Result<Vec<f64>> {
        let ctx = self.context(a)?;
        self.solve_with(a, &ctx, rhs)
    }
}
