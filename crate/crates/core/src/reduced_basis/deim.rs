use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::linalg::{axpy, norm_inf};

/// Coefficients `c` with `(P W) c = P v`, where `P` samples `indices`.
pub fn deim_coefficients(basis: &[Vec<f64>], indices: &[usize], v: &[f64]) -> Result<Vec<f64>> {
    if basis.len() != indices.len() {
        return Err(Error::DimensionMismatch(format!("{} basis vectors but {} interpolation indices", basis.len(), indices.len())));
    }
    let n = basis.len();
    if n == 0 {
        return Ok(Vec::new());
    }
    let pw = DMatrix::from_fn(n, n, |i, j| basis[j][indices[i]]);
    let pv = DVector::from_iterator(n, indices.iter().map(|&x| v[x]));
    let c = pw.lu().solve(&pv).ok_or_else(|| Error::IllConditioned("interpolation matrix P W is singular".into()))?;
    Ok(c.iter().copied().collect())
}

/// One DEIM step: interpolates `v` through `(basis, indices)` and returns the
/// interpolation residual scaled to 1 at its largest entry, with that entry's
/// index. Indices in `excluded` are never picked.
pub fn deim_extend_excluding(basis: &[Vec<f64>], indices: &[usize], v: &[f64], excluded: &[usize]) -> Result<(Vec<f64>, usize)> {
    if basis.iter().any(|w| w.len() != v.len()) {
        return Err(Error::DimensionMismatch("basis and snapshot lengths differ".into()));
    }
    let c = deim_coefficients(basis, indices, v)?;
    let mut rho = v.to_vec();
    for (w, &ci) in basis.iter().zip(&c) {
        axpy(-ci, w, &mut rho);
    }
    let mut best: Option<usize> = None;
    for (i, r) in rho.iter().enumerate() {
        if excluded.contains(&i) {
            continue;
        }
        if best.is_none_or(|b| r.abs() > rho[b].abs()) {
            best = Some(i);
        }
    }
    let scale = norm_inf(v);
    let Some(index) = best.filter(|&b| rho[b].abs() > 1e-14 * scale) else {
        return Err(Error::DependentSnapshot { residual: best.map_or(0.0, |b| rho[b].abs()) });
    };
    let pivot = rho[index];
    rho.iter_mut().for_each(|x| *x /= pivot);
    Ok((rho, index))
}

/// One DEIM step as in the standard algorithm (no excluded indices).
pub fn deim_extend(basis: &[Vec<f64>], indices: &[usize], v: &[f64]) -> Result<(Vec<f64>, usize)> {
    deim_extend_excluding(basis, indices, v, &[])
}

/// Interpolation basis with its points, grown by [`deim_extend_excluding`].
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DeimBasis {
    pub columns: Vec<Vec<f64>>,
    pub indices: Vec<usize>,
}

impl DeimBasis {
    pub fn len(&self) -> usize {
        self.columns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.columns.is_empty()
    }

    /// Computes the next column and point without modifying the basis.
    pub fn candidate(&self, v: &[f64], excluded: &[usize]) -> Result<(Vec<f64>, usize)> {
        deim_extend_excluding(&self.columns, &self.indices, v, excluded)
    }

    pub fn push(&mut self, column: Vec<f64>, index: usize) {
        self.columns.push(column);
        self.indices.push(index);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn first_step_normalizes_at_the_maximum() {
        let (col, idx) = deim_extend(&[], &[], &[1.0, 3.0, 2.0]).unwrap();
        assert_eq!(idx, 1);
        assert_eq!(col, vec![1.0 / 3.0, 1.0, 2.0 / 3.0]);
    }

    #[test]
    fn second_step_removes_the_interpolant() {
        let (col, idx) = deim_extend(&[vec![1.0, 0.0, 0.0]], &[0], &[1.0, 1.0, 0.0]).unwrap();
        assert_eq!(idx, 1);
        assert_eq!(col, vec![0.0, 1.0, 0.0]);
    }

    #[test]
    fn dependent_snapshot_is_reported() {
        assert!(matches!(deim_extend(&[vec![1.0, 0.0, 0.0]], &[0], &[1.0, 0.0, 0.0]), Err(Error::DependentSnapshot { .. })));
    }

    #[test]
    fn excluded_indices_are_skipped() {
        let (col, idx) = deim_extend_excluding(&[], &[], &[1.0, 3.0, 2.0], &[1]).unwrap();
        assert_eq!(idx, 2);
        assert_eq!(col[2], 1.0);
    }
}
