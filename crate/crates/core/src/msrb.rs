//! Multispace reduced-basis (MSRB) preconditioning: one symmetric
//! Gauss-Seidel sweep followed by a POD-RB correction from a space trained
//! for the current iteration index.

use std::sync::OnceLock;
use std::time::Instant;

use log::debug;

use crate::error::{Error, Result};
use crate::grid_fem::ParamPoint;
use crate::krylov::{PcgState, Preconditioner, Smoother, SmootherKind, SolveReport};
use crate::linalg::{axpy, norm2, CsrMatrix};
use crate::multigrid::HighFidelity;
use crate::reduced_basis::{pod_build, GalerkinSolver, PodBasis};

pub const DEFAULT_K_MAX: usize = 8;
const SMOOTHER: SmootherKind = SmootherKind::GaussSeidelSymmetric;

/// Initial POD space for the warm start and one error space per iteration index.
#[derive(Debug, Clone, PartialEq)]
pub struct MsrbHierarchy {
    pub(crate) initial: PodBasis,
    /// `bases[k - 1]` serves preconditioner applications with index `k`.
    pub(crate) bases: Vec<PodBasis>,
    pub(crate) rb_dim: usize,
}

impl MsrbHierarchy {
    pub fn new(initial: PodBasis, bases: Vec<PodBasis>, rb_dim: usize) -> Result<Self> {
        let dim = initial.dim();
        if bases.iter().any(|b| b.dim() != dim) {
            return Err(Error::DimensionMismatch("MSRB bases live on different spaces".into()));
        }
        Ok(Self { initial, bases, rb_dim })
    }

    pub fn dim(&self) -> usize {
        self.initial.dim()
    }

    pub fn rb_dim(&self) -> usize {
        self.rb_dim
    }

    pub fn k_max(&self) -> usize {
        self.bases.len()
    }

    pub fn initial(&self) -> &PodBasis {
        &self.initial
    }

    pub fn bases(&self) -> &[PodBasis] {
        &self.bases
    }

    /// Space used by the `j`-th preconditioner application of PCG (`j = 0`
    /// is the initial one): `W^(min(j + 1, K_max))`, none when `K_max = 0`.
    pub fn basis_for_application(&self, j: usize) -> Option<&PodBasis> {
        if self.bases.is_empty() {
            None
        } else {
            Some(&self.bases[j.min(self.bases.len() - 1)])
        }
    }
}

/// Trained hierarchy plus the half-step residuals `r^(k - 1/2)(mu_i)` seen
/// during training, `half_step_residuals[k - 1][i]`.
#[derive(Debug, Clone)]
pub struct MsrbTraining {
    pub hierarchy: MsrbHierarchy,
    pub half_step_residuals: Vec<Vec<Vec<f64>>>,
    pub offline_time: f64,
}

/// One MSRB application: `s = S(0, A, b, 1)`, then the RB solve of the
/// remaining residual `b - A s` is added.
pub fn msrb_apply(b: &[f64], a: &CsrMatrix, basis: &[Vec<f64>]) -> Result<Vec<f64>> {
    let smoother = Smoother::new(a)?;
    msrb_apply_with(b, a, &smoother, &GalerkinSolver::new(a, basis)?)
}

fn half_step(b: &[f64], a: &CsrMatrix, smoother: &Smoother) -> (Vec<f64>, Vec<f64>) {
    let mut s = vec![0.0; b.len()];
    smoother.apply(a, &mut s, b, 1, SMOOTHER);
    let r = a.residual(b, &s);
    (s, r)
}

fn msrb_apply_with(b: &[f64], a: &CsrMatrix, smoother: &Smoother, rb: &GalerkinSolver) -> Result<Vec<f64>> {
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!("rhs of length {} for {} rows", b.len(), a.nrows())));
    }
    let (mut s, r) = half_step(b, a, smoother);
    axpy(1.0, &rb.solve(&r), &mut s);
    Ok(s)
}

/// Iteration-indexed MSRB preconditioner bound to one operator. Reduced
/// operators are formed the first time their space is needed.
pub struct MsrbPreconditioner<'a> {
    a: &'a CsrMatrix,
    hier: &'a MsrbHierarchy,
    smoother: Smoother,
    reduced: Vec<OnceLock<GalerkinSolver>>,
}

impl<'a> MsrbPreconditioner<'a> {
    pub fn new(a: &'a CsrMatrix, hier: &'a MsrbHierarchy) -> Result<Self> {
        if a.nrows() != hier.dim() {
            return Err(Error::DimensionMismatch(format!(
                "hierarchy of size {} applied to a {}x{} operator",
                hier.dim(),
                a.nrows(),
                a.ncols()
            )));
        }
        Ok(Self { a, hier, smoother: Smoother::new(a)?, reduced: (0..hier.k_max()).map(|_| OnceLock::new()).collect() })
    }

    fn reduced(&self, j: usize) -> Result<Option<&GalerkinSolver>> {
        let Some(basis) = self.hier.basis_for_application(j) else {
            return Ok(None);
        };
        let slot = &self.reduced[j.min(self.reduced.len() - 1)];
        if let Some(g) = slot.get() {
            return Ok(Some(g));
        }
        let g = GalerkinSolver::new(self.a, basis.columns())?;
        Ok(Some(slot.get_or_init(|| g)))
    }
}

impl Preconditioner for MsrbPreconditioner<'_> {
    fn apply(&self, r: &[f64], k: usize) -> Result<Vec<f64>> {
        match self.reduced(k)? {
            Some(g) => msrb_apply_with(r, self.a, &self.smoother, g),
            None => Ok(half_step(r, self.a, &self.smoother).0),
        }
    }

    /// Symmetric for each fixed `k`, but the operator changes with `k`.
    fn is_symmetric(&self) -> bool {
        true
    }

    fn label(&self) -> String {
        format!("msrb(N={},K={})", self.hier.rb_dim(), self.hier.k_max())
    }
}

/// PCG with the MSRB preconditioner.
pub fn msrbcg_solve(
    a: &CsrMatrix,
    f: &[f64],
    x0: &[f64],
    hier: &MsrbHierarchy,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let precond = MsrbPreconditioner::new(a, hier)?;
    let (x, mut report) = crate::krylov::pcg_solve(a, f, x0, &precond, tol, max_iter)?;
    report.method = format!("msrbcg[{}]", precond.label());
    Ok((x, report))
}

/// Trains the hierarchy by running RBI-MSRBCG on every training parameter.
/// Before the `k`-th preconditioner application the error equation
/// `A e^(k) = r^(k)` is solved with `hf` for the current PCG residual of each
/// parameter, and POD of those errors gives `W^(k)`; the runs then advance one
/// step with the new space. The half-step residuals `r^(k) - A S(0, A, r^(k), 1)`
/// are kept for spectrum studies.
pub fn msrb_train(train: &[ParamPoint], rb_dim: usize, k_max: usize, hf: &HighFidelity) -> Result<MsrbTraining> {
    if train.is_empty() {
        return Err(Error::InvalidInput("MSRB training needs at least one parameter".into()));
    }
    let disc = hf.discretization();
    let start = Instant::now();

    let mut snapshots = Vec::with_capacity(train.len());
    for mu in train {
        let sys = disc.assemble(mu).map_err(|e| e.at_stage("msrb snapshot", &mu.0))?;
        snapshots.push(hf.solve(&sys.matrix, &sys.rhs).map_err(|e| e.at_stage("msrb snapshot", &mu.0))?);
    }
    let initial = pod_build(&snapshots, rb_dim)?;
    drop(snapshots);

    let mut states: Vec<Option<PcgState>> = vec![None; train.len()];
    let mut bases: Vec<PodBasis> = Vec::with_capacity(k_max);
    let mut half_step_residuals = Vec::with_capacity(k_max);
    for k in 1..=k_max {
        let mut errors = Vec::with_capacity(train.len());
        let mut residuals = Vec::with_capacity(train.len());
        for (mu, state) in train.iter().zip(states.iter_mut()) {
            let stage = |e: Error| e.at_stage(&format!("msrb training k={k}"), &mu.0);
            let sys = disc.assemble(mu).map_err(stage)?;
            let a = &sys.matrix;
            let smoother = Smoother::new(a).map_err(stage)?;
            match state {
                None => {
                    let u0 = GalerkinSolver::new(a, initial.columns()).map_err(stage)?.solve(&sys.rhs);
                    *state = Some(PcgState::new(a, &sys.rhs, &u0).map_err(stage)?);
                }
                Some(st) => {
                    let g = GalerkinSolver::new(a, bases[k - 2].columns()).map_err(stage)?;
                    let s = msrb_apply_with(st.residual(), a, &smoother, &g).map_err(stage)?;
                    st.step(a, &s).map_err(stage)?;
                }
            }
            let st = state.as_ref().unwrap();
            let r = st.residual();
            if norm2(r) == 0.0 {
                errors.push(vec![0.0; r.len()]);
            } else {
                errors.push(hf.solve(a, r).map_err(stage)?);
            }
            residuals.push(half_step(r, a, &smoother).1);
        }
        let basis = pod_build(&errors, rb_dim)?;
        debug!("MSRB k = {k}: {} vectors, leading eigenvalue {:e}", basis.len(), basis.eigenvalues()[0]);
        bases.push(basis);
        half_step_residuals.push(residuals);
    }

    Ok(MsrbTraining {
        hierarchy: MsrbHierarchy { initial, bases, rb_dim },
        half_step_residuals,
        offline_time: start.elapsed().as_secs_f64(),
    })
}

/// Outcome of the MSRB Richardson iteration.
#[derive(Debug, Clone)]
pub struct RichardsonRun {
    pub solution: Vec<f64>,
    pub report: SolveReport,
    /// `r^(k - 1/2)` for `k = 1..=L`.
    pub half_step_residuals: Vec<Vec<f64>>,
}

/// MSRB-preconditioned Richardson: RB initialization, then alternating smoother
/// half-steps and RB corrections of the half-step residual with `W^(k)`.
pub fn msrb_richardson(a: &CsrMatrix, f: &[f64], hier: &MsrbHierarchy, tol: f64, max_iter: usize) -> Result<RichardsonRun> {
    if f.len() != a.nrows() || a.nrows() != hier.dim() {
        return Err(Error::DimensionMismatch(format!("system of size {} for a hierarchy of size {}", f.len(), hier.dim())));
    }
    let start = Instant::now();
    let smoother = Smoother::new(a)?;
    let nf = match norm2(f) {
        n if n > 0.0 => n,
        _ => 1.0,
    };
    let mut u = GalerkinSolver::new(a, hier.initial.columns())?.solve(f);
    let mut r = a.residual(f, &u);
    let mut history = vec![norm2(&r) / nf];
    let mut half_step_residuals = Vec::new();
    let mut reduced: Vec<Option<GalerkinSolver>> = vec![None; hier.k_max()];
    let mut k = 0;
    while history[k] > tol && k < max_iter {
        let mut s = vec![0.0; f.len()];
        smoother.apply(a, &mut s, &r, 1, SMOOTHER);
        axpy(1.0, &s, &mut u);
        let r_half = a.residual(f, &u);
        if let Some(basis) = hier.basis_for_application(k) {
            let slot = k.min(reduced.len() - 1);
            if reduced[slot].is_none() {
                reduced[slot] = Some(GalerkinSolver::new(a, basis.columns())?);
            }
            axpy(1.0, &reduced[slot].as_ref().unwrap().solve(&r_half), &mut u);
        }
        half_step_residuals.push(r_half);
        r = a.residual(f, &u);
        k += 1;
        history.push(norm2(&r) / nf);
    }
    let true_residual = history[k];
    let report = SolveReport {
        iterations: k,
        converged: history[k] <= tol,
        history,
        true_residual,
        absolute: norm2(f) == 0.0,
        wall_time: start.elapsed().as_secs_f64(),
        method: format!("msrb-richardson(N={},K={})", hier.rb_dim(), hier.k_max()),
        mu: Vec::new(),
    };
    Ok(RichardsonRun { solution: u, report, half_step_residuals })
}
