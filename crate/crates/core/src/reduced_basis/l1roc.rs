//! L1-based reduced over-collocation: a greedy RB method whose online stage
//! is a least-squares fit at `M = 2N - 1` sampled rows and whose greedy
//! indicator is the l1 norm of the coefficients in snapshot coordinates.

use std::time::Instant;

use log::{debug, warn};
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::grid_fem::ParamPoint;
use crate::linalg::{axpy, CsrMatrix};
use crate::multigrid::HighFidelity;
use crate::reduced_basis::deim::DeimBasis;
use crate::reduced_basis::pod::orthogonalize;

/// `Delta = |c|_1`.
pub fn l1_indicator(c: &[f64]) -> f64 {
    c.iter().map(|x| x.abs()).sum()
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1rocModel {
    dim: usize,
    /// Orthonormal basis `W_N`.
    basis: Vec<Vec<f64>>,
    /// Upper-triangular `T` (column-major, `N x N`) with `U_N = W_N T`.
    transform: Vec<f64>,
    solution_points: Vec<usize>,
    residual_points: Vec<usize>,
    parameters: Vec<ParamPoint>,
    /// Largest indicator over the training set before each greedy pick `n >= 2`.
    indicator_history: Vec<f64>,
    /// Cumulative offline seconds once the `n`-th vector was added.
    offline_times: Vec<f64>,
    /// Training stopped early because the greedy picked a parameter twice or
    /// the new snapshot was dependent on the basis.
    saturated: bool,
}

/// Result of an online solve.
#[derive(Debug, Clone, PartialEq)]
pub struct OnlineSolution {
    pub solution: Vec<f64>,
    /// Coefficients with respect to the orthonormal basis.
    pub coefficients: Vec<f64>,
    /// Coefficients with respect to the raw snapshots, `T^{-1} u_N`.
    pub snapshot_coordinates: Vec<f64>,
}

impl OnlineSolution {
    pub fn indicator(&self) -> f64 {
        l1_indicator(&self.snapshot_coordinates)
    }
}

impl L1rocModel {
    #[allow(clippy::too_many_arguments)]
    pub(crate) fn from_parts(
        dim: usize,
        basis: Vec<Vec<f64>>,
        transform: Vec<f64>,
        solution_points: Vec<usize>,
        residual_points: Vec<usize>,
        parameters: Vec<ParamPoint>,
        indicator_history: Vec<f64>,
        offline_times: Vec<f64>,
        saturated: bool,
    ) -> Result<Self> {
        let n = basis.len();
        let consistent = n > 0
            && basis.iter().all(|w| w.len() == dim)
            && transform.len() == n * n
            && solution_points.len() == n
            && residual_points.len() + 1 == n
            && parameters.len() == n
            && offline_times.len() == n
            && indicator_history.len() + 1 == n;
        if !consistent {
            return Err(Error::Format(format!("inconsistent L1ROC model of dimension {n}")));
        }
        let model =
            Self { dim, basis, transform, solution_points, residual_points, parameters, indicator_history, offline_times, saturated };
        if model.collocation_points().iter().any(|&x| x >= dim) {
            return Err(Error::Format("collocation index out of range".into()));
        }
        Ok(model)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Reduced dimension `N`.
    pub fn len(&self) -> usize {
        self.basis.len()
    }

    pub fn is_empty(&self) -> bool {
        self.basis.is_empty()
    }

    pub fn basis(&self) -> &[Vec<f64>] {
        &self.basis
    }

    pub fn transform(&self) -> &[f64] {
        &self.transform
    }

    pub fn solution_points(&self) -> &[usize] {
        &self.solution_points
    }

    pub fn residual_points(&self) -> &[usize] {
        &self.residual_points
    }

    /// `X^M`: solution points followed by residual points.
    pub fn collocation_points(&self) -> Vec<usize> {
        self.solution_points.iter().chain(&self.residual_points).copied().collect()
    }

    pub fn parameters(&self) -> &[ParamPoint] {
        &self.parameters
    }

    pub fn indicator_history(&self) -> &[f64] {
        &self.indicator_history
    }

    pub fn offline_times(&self) -> &[f64] {
        &self.offline_times
    }

    /// Offline seconds spent to reach the current dimension.
    pub fn offline_time(&self) -> f64 {
        self.offline_times.last().copied().unwrap_or(0.0)
    }

    pub fn saturated(&self) -> bool {
        self.saturated
    }

    /// The nested model of dimension `n`: first `n` vectors, `n` solution
    /// points and `n - 1` residual points.
    pub fn truncate(&self, n: usize) -> Result<Self> {
        if n == 0 || n > self.len() {
            return Err(Error::InvalidInput(format!("cannot truncate an L1ROC model of dimension {} to {n}", self.len())));
        }
        let big = self.len();
        let mut transform = Vec::with_capacity(n * n);
        for j in 0..n {
            transform.extend_from_slice(&self.transform[j * big..j * big + n]);
        }
        Ok(Self {
            dim: self.dim,
            basis: self.basis[..n].to_vec(),
            transform,
            solution_points: self.solution_points[..n].to_vec(),
            residual_points: self.residual_points[..n - 1].to_vec(),
            parameters: self.parameters[..n].to_vec(),
            indicator_history: self.indicator_history[..n - 1].to_vec(),
            offline_times: self.offline_times[..n].to_vec(),
            saturated: self.saturated && n == big,
        })
    }

    /// Snapshot coordinates `T^{-1} y` by back substitution.
    fn to_snapshot_coordinates(&self, y: &[f64]) -> Vec<f64> {
        let n = self.len();
        let t = |i: usize, j: usize| self.transform[j * n + i];
        let mut c = y.to_vec();
        for i in (0..n).rev() {
            for j in i + 1..n {
                c[i] -= t(i, j) * c[j];
            }
            c[i] /= t(i, i);
        }
        c
    }

    /// Least-squares fit of the sampled rows `(columns, values)` against `rhs`.
    pub fn solve_sampled(&self, rows: &[(&[usize], &[f64])], rhs: &[f64]) -> Result<OnlineSolution> {
        let m = rows.len();
        let n = self.len();
        if m != rhs.len() || m < n {
            return Err(Error::DimensionMismatch(format!("{m} sampled rows, {} rhs entries, {n} unknowns", rhs.len())));
        }
        let b = DMatrix::from_fn(m, n, |i, j| {
            let (cols, vals) = rows[i];
            cols.iter().zip(vals).map(|(&c, &v)| v * self.basis[j][c]).sum::<f64>()
        });
        let qr = b.qr();
        let r = qr.r();
        let rmax = (0..n).map(|i| r[(i, i)].abs()).fold(0.0, f64::max);
        if (0..n).any(|i| !(r[(i, i)].abs() > 1e-13 * rmax)) || rmax == 0.0 {
            return Err(Error::IllConditioned(format!("sampled {m}x{n} least-squares matrix is rank deficient")));
        }
        let qtb = qr.q().transpose() * DVector::from_column_slice(rhs);
        let y = r.solve_upper_triangular(&qtb).ok_or_else(|| Error::IllConditioned("triangular factor is singular".into()))?;
        let coefficients: Vec<f64> = y.iter().copied().collect();
        let mut solution = vec![0.0; self.dim];
        for (w, &c) in self.basis.iter().zip(&coefficients) {
            axpy(c, w, &mut solution);
        }
        let snapshot_coordinates = self.to_snapshot_coordinates(&coefficients);
        Ok(OnlineSolution { solution, coefficients, snapshot_coordinates })
    }

    /// Online solve against the assembled system, sampling its rows at `X^M`.
    pub fn online(&self, a: &CsrMatrix, b: &[f64]) -> Result<OnlineSolution> {
        if a.nrows() != self.dim || b.len() != self.dim {
            return Err(Error::DimensionMismatch(format!("model of size {} applied to a {}x{} system", self.dim, a.nrows(), a.ncols())));
        }
        let points = self.collocation_points();
        let rows: Vec<_> = points.iter().map(|&x| a.row(x)).collect();
        let rhs: Vec<f64> = points.iter().map(|&x| b[x]).collect();
        self.solve_sampled(&rows, &rhs)
    }
}

/// Online stage: the RB solution and its snapshot-coordinate vector.
pub fn l1roc_online(model: &L1rocModel, a: &CsrMatrix, b: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    let s = model.online(a, b)?;
    Ok((s.solution, s.snapshot_coordinates))
}

/// Offline greedy. The first parameter is drawn from `train` with `seed`;
/// each further one maximizes the L1 indicator of the current model. The
/// indicator sweep assembles only the sampled rows.
pub fn l1roc_offline(train: &[ParamPoint], n: usize, seed: u64, hf: &HighFidelity) -> Result<L1rocModel> {
    if train.is_empty() || n == 0 {
        return Err(Error::InvalidInput("L1ROC needs a nonempty training set and N >= 1".into()));
    }
    if n > train.len() {
        return Err(Error::InvalidInput(format!("N = {n} exceeds the {} training parameters", train.len())));
    }
    let disc = hf.discretization();
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let first = rng.random_range(0..train.len());

    let sys = disc.assemble(&train[first]).map_err(|e| e.at_stage("l1roc snapshot", &train[first].0))?;
    let u = hf.solve(&sys.matrix, &sys.rhs).map_err(|e| e.at_stage("l1roc snapshot", &train[first].0))?;
    let dim = u.len();

    let mut sol_deim = DeimBasis::default();
    let mut res_deim = DeimBasis::default();
    let (col, idx) = sol_deim.candidate(&u, &[])?;
    sol_deim.push(col, idx);
    let mut basis = Vec::new();
    let mut tcols: Vec<Vec<f64>> = Vec::new();
    let mut q = u;
    let (coeffs, norm) = orthogonalize(&basis, &mut q);
    q.iter_mut().for_each(|x| *x /= norm);
    basis.push(q);
    tcols.push(coeffs.into_iter().chain([norm]).collect());

    let mut chosen = vec![first];
    let mut indicator_history = Vec::new();
    let mut offline_times = vec![start.elapsed().as_secs_f64()];
    let mut saturated = false;

    let build = |basis: &[Vec<f64>], tcols: &[Vec<f64>], xs: &[usize], xr: &[usize], extra: (&[f64], &[usize])| {
        let k = basis.len();
        let mut transform = vec![0.0; k * k];
        for (j, col) in tcols.iter().enumerate() {
            transform[j * k..j * k + col.len()].copy_from_slice(col);
        }
        L1rocModel {
            dim,
            basis: basis.to_vec(),
            transform,
            solution_points: xs.to_vec(),
            residual_points: xr.to_vec(),
            parameters: chosen_params(train, extra.1),
            indicator_history: extra.0.to_vec(),
            offline_times: vec![0.0; k],
            saturated: false,
        }
    };

    while basis.len() < n {
        let current = build(&basis, &tcols, &sol_deim.indices, &res_deim.indices, (&indicator_history, &chosen));
        let points = current.collocation_points();
        let mut best: Option<(usize, f64, Vec<f64>)> = None;
        for (i, mu) in train.iter().enumerate() {
            let sampled = disc.assemble_rows(mu, &points).map_err(|e| e.at_stage("l1roc indicator", &mu.0))?;
            let rows: Vec<(&[usize], &[f64])> = sampled.entries.iter().map(|(c, v)| (c.as_slice(), v.as_slice())).collect();
            let sol = current.solve_sampled(&rows, &sampled.rhs).map_err(|e| e.at_stage("l1roc indicator", &mu.0))?;
            let delta = sol.indicator();
            if best.as_ref().is_none_or(|b| delta > b.1) {
                best = Some((i, delta, sol.coefficients));
            }
        }
        let (pick, delta, y) = best.unwrap();
        if chosen.contains(&pick) {
            warn!("L1ROC greedy picked parameter {pick} again at N = {} (indicator {delta:e}); stopping early", basis.len());
            saturated = true;
            break;
        }
        let mu = &train[pick];
        let sys = disc.assemble(mu).map_err(|e| e.at_stage("l1roc snapshot", &mu.0))?;
        let u = hf.solve(&sys.matrix, &sys.rhs).map_err(|e| e.at_stage("l1roc snapshot", &mu.0))?;

        let mut rb = vec![0.0; dim];
        for (w, &c) in basis.iter().zip(&y) {
            axpy(c, w, &mut rb);
        }
        let residual = sys.matrix.residual(&sys.rhs, &rb);

        // keep solution and residual points disjoint so |X^M| = 2N - 1
        let sol_step = sol_deim.candidate(&u, &res_deim.indices);
        let step = sol_step.and_then(|(scol, sidx)| {
            let mut used = sol_deim.indices.clone();
            used.push(sidx);
            let (rcol, ridx) = res_deim.candidate(&residual, &used)?;
            Ok((scol, sidx, rcol, ridx))
        });
        let (scol, sidx, rcol, ridx) = match step {
            Ok(s) => s,
            Err(Error::DependentSnapshot { residual }) => {
                warn!("L1ROC snapshot at N = {} is dependent (residual {residual:e}); stopping early", basis.len() + 1);
                saturated = true;
                break;
            }
            Err(e) => return Err(e),
        };
        let mut q = u;
        let (coeffs, norm) = orthogonalize(&basis, &mut q);
        if !(norm > 1e-12 * coeffs.iter().map(|c| c * c).sum::<f64>().sqrt().max(norm)) {
            warn!(
                "L1ROC snapshot at N = {} is numerically in the span of the basis (orthogonal part {norm:e}); stopping early",
                basis.len() + 1
            );
            saturated = true;
            break;
        }
        q.iter_mut().for_each(|x| *x /= norm);
        sol_deim.push(scol, sidx);
        res_deim.push(rcol, ridx);
        basis.push(q);
        tcols.push(coeffs.into_iter().chain([norm]).collect());
        chosen.push(pick);
        indicator_history.push(delta);
        offline_times.push(start.elapsed().as_secs_f64());
        debug!("L1ROC N = {} picked {pick} with indicator {delta:e}, orthogonal part {norm:e}", basis.len());
    }

    let mut model = build(&basis, &tcols, &sol_deim.indices, &res_deim.indices, (&indicator_history, &chosen));
    model.offline_times = offline_times;
    model.saturated = saturated;
    Ok(model)
}

fn chosen_params(train: &[ParamPoint], chosen: &[usize]) -> Vec<ParamPoint> {
    chosen.iter().map(|&i| train[i].clone()).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indicator_examples() {
        assert_eq!(l1_indicator(&[1.0, -2.0, 3.0]), 6.0);
        assert_eq!(l1_indicator(&[0.0, 0.0]), 0.0);
    }

    fn toy_model() -> L1rocModel {
        // U = [u1 u2] with u1 = (2, 0, 0, 0), u2 = (1, 1, 0, 0)
        let basis = vec![vec![1.0, 0.0, 0.0, 0.0], vec![0.0, 1.0, 0.0, 0.0]];
        let transform = vec![2.0, 0.0, 1.0, 1.0];
        L1rocModel::from_parts(
            4,
            basis,
            transform,
            vec![0, 1],
            vec![2],
            vec![ParamPoint::new(vec![0.0]), ParamPoint::new(vec![1.0])],
            vec![1.0],
            vec![0.1, 0.2],
            false,
        )
        .unwrap()
    }

    #[test]
    fn snapshot_coordinates_invert_the_transform() {
        let m = toy_model();
        let a = CsrMatrix::identity(4);
        // b = u2 should give c = e2
        let s = m.online(&a, &[1.0, 1.0, 0.0, 0.0]).unwrap();
        assert!((s.snapshot_coordinates[0]).abs() < 1e-15);
        assert!((s.snapshot_coordinates[1] - 1.0).abs() < 1e-15);
        assert!((s.indicator() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_vector_least_squares() {
        let basis = vec![vec![1.0, 2.0, 0.0]];
        let m =
            L1rocModel::from_parts(3, basis, vec![1.0], vec![1], vec![], vec![ParamPoint::new(vec![])], vec![], vec![0.0], false).unwrap();
        let a = CsrMatrix::from_triplets(3, 3, &[(0, 0, 2.0), (1, 1, 3.0), (1, 0, 1.0), (2, 2, 1.0)]);
        let b = [1.0, 4.0, 5.0];
        let s = m.online(&a, &b).unwrap();
        // sampled column a = (A w)[1] = 1 + 6 = 7, rhs 4
        assert!((s.coefficients[0] - 4.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn truncation_keeps_the_nested_structure() {
        let m = toy_model().truncate(1).unwrap();
        assert_eq!(m.len(), 1);
        assert_eq!(m.collocation_points(), vec![0]);
        assert_eq!(m.transform(), &[2.0]);
        assert!(toy_model().truncate(3).is_err());
    }

    #[test]
    fn inconsistent_parts_are_rejected() {
        assert!(L1rocModel::from_parts(
            2,
            vec![vec![1.0, 0.0]],
            vec![1.0],
            vec![5],
            vec![],
            vec![ParamPoint::new(vec![])],
            vec![],
            vec![0.0],
            false
        )
        .is_err());
    }
}
