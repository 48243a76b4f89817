use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::CsrMatrix;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SmootherKind {
    Jacobi,
    GaussSeidelForward,
    GaussSeidelBackward,
    GaussSeidelSymmetric,
}

impl SmootherKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SmootherKind::Jacobi => "jacobi",
            SmootherKind::GaussSeidelForward => "gauss-seidel-forward",
            SmootherKind::GaussSeidelBackward => "gauss-seidel-backward",
            SmootherKind::GaussSeidelSymmetric => "gauss-seidel-symmetric",
        }
    }
}

impl fmt::Display for SmootherKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SmootherKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "jacobi" => Ok(Self::Jacobi),
            "gauss-seidel-forward" => Ok(Self::GaussSeidelForward),
            "gauss-seidel-backward" => Ok(Self::GaussSeidelBackward),
            "gauss-seidel-symmetric" => Ok(Self::GaussSeidelSymmetric),
            other => Err(Error::Config(format!("unknown smoother '{other}'"))),
        }
    }
}

/// Stationary point smoother bound to one operator. The inverse diagonal is
/// cached so repeated sweeps (multigrid, MSRB) do not search for it.
#[derive(Debug, Clone)]
pub struct Smoother {
    inv_diag: Vec<f64>,
    jacobi_weight: f64,
}

impl Smoother {
    pub fn new(a: &CsrMatrix) -> Result<Self> {
        if a.nrows() != a.ncols() {
            return Err(Error::DimensionMismatch(format!("smoother needs a square operator, got {}x{}", a.nrows(), a.ncols())));
        }
        let diag = a.diagonal();
        if let Some(row) = diag.iter().position(|&d| d == 0.0) {
            return Err(Error::ZeroDiagonal { row });
        }
        Ok(Self { inv_diag: diag.iter().map(|d| 1.0 / d).collect(), jacobi_weight: 1.0 })
    }

    /// Damping factor for Jacobi sweeps (1 = undamped). Gauss-Seidel ignores it.
    pub fn with_jacobi_weight(mut self, weight: f64) -> Self {
        self.jacobi_weight = weight;
        self
    }

    /// Applies `sweeps` sweeps of `kind` to `u` in place.
    pub fn apply(&self, a: &CsrMatrix, u: &mut [f64], b: &[f64], sweeps: usize, kind: SmootherKind) {
        debug_assert_eq!(u.len(), self.inv_diag.len());
        for _ in 0..sweeps {
            match kind {
                SmootherKind::Jacobi => self.jacobi(a, u, b),
                SmootherKind::GaussSeidelForward => self.forward(a, u, b),
                SmootherKind::GaussSeidelBackward => self.backward(a, u, b),
                SmootherKind::GaussSeidelSymmetric => {
                    self.forward(a, u, b);
                    self.backward(a, u, b);
                }
            }
        }
    }

    fn jacobi(&self, a: &CsrMatrix, u: &mut [f64], b: &[f64]) {
        let au = a.matvec(u);
        for i in 0..u.len() {
            u[i] += self.jacobi_weight * (b[i] - au[i]) * self.inv_diag[i];
        }
    }

    fn forward(&self, a: &CsrMatrix, u: &mut [f64], b: &[f64]) {
        for i in 0..u.len() {
            let s = a.row_dot(i, u);
            u[i] += (b[i] - s) * self.inv_diag[i];
        }
    }

    fn backward(&self, a: &CsrMatrix, u: &mut [f64], b: &[f64]) {
        for i in (0..u.len()).rev() {
            let s = a.row_dot(i, u);
            u[i] += (b[i] - s) * self.inv_diag[i];
        }
    }
}

/// `S(u, A, b, nu)`: `nu` sweeps of `kind` starting from `u`.
pub fn smooth(u: &[f64], a: &CsrMatrix, b: &[f64], sweeps: usize, kind: SmootherKind) -> Result<Vec<f64>> {
    if u.len() != a.nrows() || b.len() != a.nrows() {
        return Err(Error::DimensionMismatch(format!("smoother vectors ({}, {}) vs operator size {}", u.len(), b.len(), a.nrows())));
    }
    let mut out = u.to_vec();
    if sweeps > 0 {
        Smoother::new(a)?.apply(a, &mut out, b, sweeps, kind);
    }
    Ok(out)
}
