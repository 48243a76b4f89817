#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use rbws::bench::lhs_sample;
use rbws::grid_fem::{Discretization, ParamPoint, ProblemSpec};
use rbws::linalg::CsrMatrix;
use rbws::multigrid::{HighFidelity, MgConfig};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
    (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
}

/// `B^T B + n I` for a random `B`: comfortably SPD.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
    let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    b.transpose() * &b + DMatrix::identity(n, n) * n as f64
}

/// SPD with eigenvalues spread over `[1, cond]`.
pub fn random_spd_with_condition(rng: &mut ChaCha8Rng, n: usize, cond: f64) -> DMatrix<f64> {
    let q = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0)).qr().q();
    let d = DMatrix::from_fn(n, n, |i, j| if i == j { cond.powf(i as f64 / (n.max(2) - 1) as f64) } else { 0.0 });
    let a = &q * d * q.transpose();
    (&a + a.transpose()) * 0.5
}

pub fn dense_solve(a: &CsrMatrix, b: &[f64]) -> Vec<f64> {
    let x = a.to_dense().cholesky().expect("SPD").solve(&DVector::from_column_slice(b));
    x.as_slice().to_vec()
}

pub fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let den: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    num / den.max(f64::MIN_POSITIVE)
}

/// 17^3 nodes.
pub fn desk(spec: ProblemSpec) -> Discretization {
    Discretization::build(spec, 3, 4).unwrap()
}

/// 5^3 nodes.
pub fn tiny(spec: ProblemSpec) -> Discretization {
    Discretization::build(spec, 2, 2).unwrap()
}

pub fn hf(disc: &Discretization) -> HighFidelity<'_> {
    HighFidelity::new(disc, MgConfig::default(), 1e-14, 100)
}

pub fn samples(spec: &ProblemSpec, n: usize, seed: u64) -> Vec<ParamPoint> {
    lhs_sample(spec.param_dim(), n, &spec.bounds, seed).unwrap()
}
