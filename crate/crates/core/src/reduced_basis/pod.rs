use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};
use crate::linalg::{axpy, dot, norm2, CsrMatrix};

/// Eigenvalues below this fraction of the largest are treated as round-off
/// when choosing basis vectors.
const RANK_TOL: f64 = 1e-13;

/// Orthonormal POD basis together with the full correlation spectrum.
#[derive(Debug, Clone, PartialEq)]
pub struct PodBasis {
    dim: usize,
    columns: Vec<Vec<f64>>,
    eigenvalues: Vec<f64>,
    n_snapshots: usize,
}

impl PodBasis {
    /// Basis without vectors on a space of dimension `dim`.
    pub fn empty(dim: usize) -> Self {
        Self { dim, columns: Vec::new(), eigenvalues: Vec::new(), n_snapshots: 0 }
    }

    pub(crate) fn from_parts(dim: usize, columns: Vec<Vec<f64>>, eigenvalues: Vec<f64>, n_snapshots: usize) -> Result<Self> {
        if columns.iter().any(|c| c.len() != dim) {
            return Err(Error::DimensionMismatch(format!("basis columns must have length {dim}")));
        }
        Ok(Self { dim, columns, eigenvalues, n_snapshots })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of basis vectors `N`.
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    /// Correlation eigenvalues, non-increasing, one per snapshot.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn n_snapshots(&self) -> usize {
        self.n_snapshots
    }

    /// The first `n` vectors.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n > self.len() {
            return Err(Error::InvalidInput(format!("cannot truncate a {}-vector basis to {n}", self.len())));
        }
        Ok(Self { columns: self.columns[..n].to_vec(), ..self.clone() })
    }

    /// `W^T v`.
    pub fn coefficients(&self, v: &[f64]) -> Vec<f64> {
        self.columns.iter().map(|w| dot(w, v)).collect()
    }

    /// `W c`.
    pub fn combine(&self, c: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        for (w, &ci) in self.columns.iter().zip(c) {
            axpy(ci, w, &mut out);
        }
        out
    }

    /// `W W^T v`.
    pub fn project(&self, v: &[f64]) -> Vec<f64> {
        self.combine(&self.coefficients(v))
    }
}

/// Eigenpairs of the snapshot correlation matrix `S^T S`, sorted by
/// decreasing eigenvalue; negative round-off is clamped to zero.
pub fn correlation_eigen(snapshots: &[Vec<f64>]) -> (Vec<f64>, DMatrix<f64>) {
    let n = snapshots.len();
    let mut c = DMatrix::zeros(n, n);
    for i in 0..n {
        for j in 0..=i {
            let v = dot(&snapshots[i], &snapshots[j]);
            c[(i, j)] = v;
            c[(j, i)] = v;
        }
    }
    let eig = SymmetricEigen::new(c);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
    let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Orthogonalizes `v` against orthonormal `basis` (two Gram-Schmidt passes).
/// Returns the projection coefficients and the norm of what remains.
pub(crate) fn orthogonalize(basis: &[Vec<f64>], v: &mut [f64]) -> (Vec<f64>, f64) {
    let mut coeffs = vec![0.0; basis.len()];
    for _ in 0..2 {
        for (w, c) in basis.iter().zip(coeffs.iter_mut()) {
            let h = dot(w, v);
            axpy(-h, w, v);
            *c += h;
        }
    }
    (coeffs, norm2(v))
}

/// POD by the method of snapshots: at most `n` vectors, fewer when the
/// snapshots have lower numerical rank.
pub fn pod_build(snapshots: &[Vec<f64>], n: usize) -> Result<PodBasis> {
    let Some(first) = snapshots.first() else {
        return Err(Error::InvalidInput("POD needs at least one snapshot".into()));
    };
    let dim = first.len();
    if snapshots.iter().any(|s| s.len() != dim) {
        return Err(Error::DimensionMismatch("snapshots of different lengths".into()));
    }
    let (eigenvalues, vectors) = correlation_eigen(snapshots);
    let top = eigenvalues[0];
    let mut columns: Vec<Vec<f64>> = Vec::with_capacity(n);
    for (i, &lambda) in eigenvalues.iter().enumerate() {
        if columns.len() == n || !(lambda > RANK_TOL * top) {
            break;
        }
        let mut w = vec![0.0; dim];
        for (s, &vi) in snapshots.iter().zip(vectors.column(i).iter()) {
            axpy(vi, s, &mut w);
        }
        let before = lambda.sqrt();
        let (_, after) = orthogonalize(&columns, &mut w);
        if after <= 1e-8 * before {
            break;
        }
        w.iter_mut().for_each(|x| *x /= after);
        columns.push(w);
    }
    Ok(PodBasis { dim, columns, eigenvalues, n_snapshots: snapshots.len() })
}

/// Galerkin reduced operator `W^T A W`, factorized once for repeated solves.
#[derive(Debug, Clone)]
pub struct GalerkinSolver {
    columns: Vec<Vec<f64>>,
    factor: Option<Cholesky<f64, Dyn>>,
}

impl GalerkinSolver {
    pub fn new(a: &CsrMatrix, basis: &[Vec<f64>]) -> Result<Self> {
        if basis.is_empty() {
            return Ok(Self { columns: Vec::new(), factor: None });
        }
        if basis.iter().any(|w| w.len() != a.ncols()) {
            return Err(Error::DimensionMismatch(format!("basis vectors must have length {}", a.ncols())));
        }
        let aw: Vec<Vec<f64>> = basis.iter().map(|w| a.matvec(w)).collect();
        let n = basis.len();
        let an = DMatrix::from_fn(n, n, |i, j| dot(&basis[i], &aw[j]));
        let an = (&an + an.transpose()) * 0.5;
        let factor = an.cholesky().ok_or_else(|| Error::DegenerateBasis(format!("reduced {n}x{n} operator is not positive definite")))?;
        Ok(Self { columns: basis.to_vec(), factor: Some(factor) })
    }

    /// `W A_N^{-1} W^T b`.
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; b.len()];
        if let Some(factor) = &self.factor {
            let bn = DVector::from_iterator(self.columns.len(), self.columns.iter().map(|w| dot(w, b)));
            let un = factor.solve(&bn);
            for (w, &c) in self.columns.iter().zip(un.iter()) {
                axpy(c, w, &mut out);
            }
        }
        out
    }
}

/// POD-based RB solve `W_N A_N^{-1} b_N` with `A_N = W^T A W`, `b_N = W^T b`.
pub fn rbm_pod_solve(a: &CsrMatrix, b: &[f64], basis: &[Vec<f64>]) -> Result<Vec<f64>> {
    if b.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!("rhs of length {} for {} rows", b.len(), a.nrows())));
    }
    Ok(GalerkinSolver::new(a, basis)?.solve(b))
}
