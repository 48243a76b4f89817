use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::krylov::smoother::{Smoother, SmootherKind};
use crate::linalg::{axpy, dot, norm2, CsrMatrix};

/// Preconditioner contract for PCG: maps a residual to a correction.
///
/// The iteration index lets a preconditioner change from step to step
/// (iteration-indexed reduced-basis spaces). Implementations must be linear
/// in `r` for fixed `k`.
pub trait Preconditioner: Sync {
    fn apply(&self, r: &[f64], k: usize) -> Result<Vec<f64>>;

    /// Whether `<P x, y> = <x, P y>` for every fixed `k`.
    fn is_symmetric(&self) -> bool;

    fn label(&self) -> String;
}

#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityPreconditioner;

impl Preconditioner for IdentityPreconditioner {
    fn apply(&self, r: &[f64], _k: usize) -> Result<Vec<f64>> {
        Ok(r.to_vec())
    }

    fn is_symmetric(&self) -> bool {
        true
    }

    fn label(&self) -> String {
        "identity".into()
    }
}

/// `P(r) = S(0, A, r, sweeps)`.
#[derive(Debug, Clone)]
pub struct SmootherPreconditioner<'a> {
    a: &'a CsrMatrix,
    smoother: Smoother,
    kind: SmootherKind,
    sweeps: usize,
}

impl<'a> SmootherPreconditioner<'a> {
    pub fn new(a: &'a CsrMatrix, kind: SmootherKind, sweeps: usize) -> Result<Self> {
        Ok(Self { a, smoother: Smoother::new(a)?, kind, sweeps })
    }
}

impl Preconditioner for SmootherPreconditioner<'_> {
    fn apply(&self, r: &[f64], _k: usize) -> Result<Vec<f64>> {
        let mut s = vec![0.0; r.len()];
        self.smoother.apply(self.a, &mut s, r, self.sweeps, self.kind);
        Ok(s)
    }

    fn is_symmetric(&self) -> bool {
        matches!(self.kind, SmootherKind::Jacobi | SmootherKind::GaussSeidelSymmetric)
    }

    fn label(&self) -> String {
        format!("{}x{}", self.kind, self.sweeps)
    }
}

/// Outcome of one iterative solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolveReport {
    /// Iterations performed, `L`.
    pub iterations: usize,
    /// Relative residuals `|r_k| / |f|` for `k = 0..=L`. Entry 0 is the true
    /// residual of the initial guess; later entries follow the recurrence.
    pub history: Vec<f64>,
    /// The loop stopped because the residual fell to the tolerance.
    pub converged: bool,
    /// `|f - A x| / |f|` recomputed for the returned iterate.
    pub true_residual: f64,
    /// Residuals are absolute because `|f| = 0`.
    pub absolute: bool,
    pub wall_time: f64,
    pub method: String,
    pub mu: Vec<f64>,
}

impl SolveReport {
    pub fn final_residual(&self) -> f64 {
        *self.history.last().unwrap()
    }

    /// History entry `k`, carrying the last value forward past the end.
    pub fn residual_at(&self, k: usize) -> f64 {
        self.history.get(k).copied().unwrap_or_else(|| self.final_residual())
    }

    /// First `k` with `history[k] <= tol`.
    pub fn iterations_to(&self, tol: f64) -> Option<usize> {
        self.history.iter().position(|&r| r <= tol)
    }
}

fn reference_norm(f: &[f64]) -> (f64, bool) {
    let nf = norm2(f);
    if nf > 0.0 {
        (nf, false)
    } else {
        (1.0, true)
    }
}

fn check_sizes(a: &CsrMatrix, f: &[f64], x0: &[f64]) -> Result<()> {
    if a.nrows() != a.ncols() || f.len() != a.nrows() || x0.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!("operator {}x{}, rhs {}, initial guess {}", a.nrows(), a.ncols(), f.len(), x0.len())));
    }
    Ok(())
}

/// Relative initial residual `|f - A u0| / |f|`; the flag is set when `|f| = 0`
/// and the absolute norm is returned instead.
pub fn initial_residual(a: &CsrMatrix, f: &[f64], u0: &[f64]) -> Result<(f64, bool)> {
    check_sizes(a, f, u0)?;
    let (nf, absolute) = reference_norm(f);
    Ok((norm2(&a.residual(f, u0)) / nf, absolute))
}

/// PCG iterate that advances one step at a time. The caller supplies the
/// preconditioned residual for every step, which lets a preconditioner be
/// built between steps (iteration-indexed spaces trained on the fly).
#[derive(Debug, Clone)]
pub struct PcgState {
    x: Vec<f64>,
    r: Vec<f64>,
    p: Vec<f64>,
    ap: Vec<f64>,
    rs: f64,
    k: usize,
    reference: f64,
    absolute: bool,
    history: Vec<f64>,
}

impl PcgState {
    pub fn new(a: &CsrMatrix, f: &[f64], x0: &[f64]) -> Result<Self> {
        check_sizes(a, f, x0)?;
        let (reference, absolute) = reference_norm(f);
        let r = a.residual(f, x0);
        let history = vec![norm2(&r) / reference];
        Ok(Self { x: x0.to_vec(), p: vec![0.0; r.len()], ap: vec![0.0; r.len()], r, rs: 0.0, k: 0, reference, absolute, history })
    }

    pub fn solution(&self) -> &[f64] {
        &self.x
    }

    /// Recurrence residual of the current iterate.
    pub fn residual(&self) -> &[f64] {
        &self.r
    }

    pub fn relative_residual(&self) -> f64 {
        self.history[self.k]
    }

    pub fn iterations(&self) -> usize {
        self.k
    }

    pub fn history(&self) -> &[f64] {
        &self.history
    }

    /// One CG step with `s = P(r_k)`.
    pub fn step(&mut self, a: &CsrMatrix, s: &[f64]) -> Result<()> {
        if s.len() != self.r.len() {
            return Err(Error::DimensionMismatch(format!(
                "preconditioned residual of length {} for a system of size {}",
                s.len(),
                self.r.len()
            )));
        }
        let rs_next = dot(&self.r, s);
        if self.k == 0 {
            self.p.copy_from_slice(s);
        } else {
            if self.rs == 0.0 {
                return Err(Error::NotSpd(format!("preconditioner breakdown (r^T s = 0) at iteration {}", self.k)));
            }
            let beta = rs_next / self.rs;
            for (pi, si) in self.p.iter_mut().zip(s) {
                *pi = si + beta * *pi;
            }
        }
        self.rs = rs_next;
        a.matvec_into(&self.p, &mut self.ap);
        let pap = dot(&self.p, &self.ap);
        if !(pap > 0.0) {
            return Err(Error::NotSpd(format!("p^T A p = {pap:e} at iteration {}", self.k)));
        }
        let alpha = self.rs / pap;
        axpy(alpha, &self.p, &mut self.x);
        axpy(-alpha, &self.ap, &mut self.r);
        self.k += 1;
        self.history.push(norm2(&self.r) / self.reference);
        Ok(())
    }

    /// Final report; the residual is recomputed from `f - A x`.
    pub fn finish(self, a: &CsrMatrix, f: &[f64], tol: f64, method: String, wall_time: f64) -> (Vec<f64>, SolveReport) {
        let true_residual = norm2(&a.residual(f, &self.x)) / self.reference;
        let report = SolveReport {
            iterations: self.k,
            converged: self.history[self.k] <= tol,
            history: self.history,
            true_residual,
            absolute: self.absolute,
            wall_time,
            method,
            mu: Vec::new(),
        };
        (self.x, report)
    }
}

/// Preconditioned conjugate gradients with a generic, possibly iteration-indexed
/// preconditioner. Iterates while the relative residual exceeds `tol` and
/// fewer than `max_iter` steps were taken.
pub fn pcg_solve(
    a: &CsrMatrix,
    f: &[f64],
    x0: &[f64],
    precond: &dyn Preconditioner,
    tol: f64,
    max_iter: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidInput(format!("tolerance must be positive, got {tol}")));
    }
    let start = Instant::now();
    let mut state = PcgState::new(a, f, x0)?;
    while state.relative_residual() > tol && state.iterations() < max_iter {
        let s = precond.apply(state.residual(), state.iterations())?;
        state.step(a, &s)?;
    }
    Ok(state.finish(a, f, tol, format!("pcg[{}]", precond.label()), start.elapsed().as_secs_f64()))
}

/// Unpreconditioned conjugate gradients, written out independently of
/// [`pcg_solve`] so the two can be cross-checked.
pub fn cg_solve(a: &CsrMatrix, f: &[f64], x0: &[f64], tol: f64, max_iter: usize) -> Result<(Vec<f64>, SolveReport)> {
    check_sizes(a, f, x0)?;
    let start = Instant::now();
    let (nf, absolute) = reference_norm(f);
    let mut x = x0.to_vec();
    let mut r = a.residual(f, &x);
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let mut history = vec![rr.sqrt() / nf];
    let mut k = 0;
    while history[k] > tol && k < max_iter {
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return Err(Error::NotSpd(format!("p^T A p = {pap:e} at iteration {k}")));
        }
        let alpha = rr / pap;
        axpy(alpha, &p, &mut x);
        axpy(-alpha, &ap, &mut r);
        let rr_next = dot(&r, &r);
        let beta = rr_next / rr;
        for (pi, ri) in p.iter_mut().zip(&r) {
            *pi = ri + beta * *pi;
        }
        rr = rr_next;
        k += 1;
        history.push(rr.sqrt() / nf);
    }
    let true_residual = norm2(&a.residual(f, &x)) / nf;
    let report = SolveReport {
        iterations: k,
        converged: history[k] <= tol,
        history,
        true_residual,
        absolute,
        wall_time: start.elapsed().as_secs_f64(),
        method: "cg".into(),
        mu: Vec::new(),
    };
    Ok((x, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag(values: &[f64]) -> CsrMatrix {
        let t: Vec<_> = values.iter().enumerate().map(|(i, &v)| (i, i, v)).collect();
        CsrMatrix::from_triplets(values.len(), values.len(), &t)
    }

    #[test]
    fn identity_operator_converges_in_one_step() {
        let a = CsrMatrix::identity(7);
        let f: Vec<f64> = (0..7).map(|i| i as f64 - 2.5).collect();
        let (x, rep) = pcg_solve(&a, &f, &[0.3; 7], &IdentityPreconditioner, 1e-14, 40).unwrap();
        assert_eq!(rep.iterations, 1);
        assert!(rep.converged);
        for (xi, fi) in x.iter().zip(&f) {
            assert!((xi - fi).abs() < 1e-14);
        }
    }

    #[test]
    fn three_distinct_eigenvalues_terminate_in_three_steps() {
        let a = diag(&[1.0, 2.0, 3.0]);
        let (x, rep) = pcg_solve(&a, &[1.0, 2.0, 3.0], &[0.0; 3], &IdentityPreconditioner, 1e-14, 40).unwrap();
        assert!(rep.iterations <= 3);
        for xi in x {
            assert!((xi - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn exact_initial_guess_takes_zero_steps() {
        let a = diag(&[1.0, 2.0, 3.0]);
        let (_, rep) = pcg_solve(&a, &[1.0, 2.0, 3.0], &[1.0; 3], &IdentityPreconditioner, 1e-16, 40).unwrap();
        assert_eq!(rep.iterations, 0);
        assert_eq!(rep.history.len(), 1);
        assert!(rep.history[0] <= 1e-15);
    }

    #[test]
    fn zero_rhs_uses_absolute_residual() {
        let a = diag(&[2.0, 2.0]);
        let (x, rep) = pcg_solve(&a, &[0.0, 0.0], &[1.0, -1.0], &IdentityPreconditioner, 1e-12, 10).unwrap();
        assert!(rep.absolute);
        assert!((rep.history[0] - 8f64.sqrt()).abs() < 1e-15);
        assert!(x.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn indefinite_operator_breaks_down() {
        let a = diag(&[1.0, -1.0]);
        assert!(matches!(pcg_solve(&a, &[0.0, 1.0], &[0.0; 2], &IdentityPreconditioner, 1e-12, 10), Err(Error::NotSpd(_))));
    }

    #[test]
    fn iteration_cap_is_respected() {
        let a = diag(&[1.0, 2.0, 3.0, 4.0, 5.0]);
        let (_, rep) = pcg_solve(&a, &[1.0; 5], &[0.0; 5], &IdentityPreconditioner, 1e-16, 2).unwrap();
        assert_eq!(rep.iterations, 2);
        assert_eq!(rep.history.len(), 3);
        assert!(!rep.converged);
    }

    #[test]
    fn smoother_preconditioner_helps() {
        let n = 30;
        let mut t = Vec::new();
        for i in 0..n {
            t.push((i, i, 2.0 + i as f64 * 0.1));
            if i + 1 < n {
                t.push((i, i + 1, -1.0));
                t.push((i + 1, i, -1.0));
            }
        }
        let a = CsrMatrix::from_triplets(n, n, &t);
        let f = vec![1.0; n];
        let sgs = SmootherPreconditioner::new(&a, SmootherKind::GaussSeidelSymmetric, 1).unwrap();
        assert!(sgs.is_symmetric());
        let (_, plain) = pcg_solve(&a, &f, &vec![0.0; n], &IdentityPreconditioner, 1e-10, 100).unwrap();
        let (_, pre) = pcg_solve(&a, &f, &vec![0.0; n], &sgs, 1e-10, 100).unwrap();
        assert!(pre.iterations <= plain.iterations);
    }
}
