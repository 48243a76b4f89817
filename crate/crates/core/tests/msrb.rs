mod common;

use std::sync::OnceLock;

use common::*;
use nalgebra::DMatrix;
use proptest::prelude::*;
use rand::Rng;
use rbws::bench::residual_spectrum;
use rbws::grid_fem::{AssembledSystem, Discretization, ParamPoint, ProblemSpec};
use rbws::krylov::{pcg_solve, SmootherKind, SmootherPreconditioner};
use rbws::linalg::{dot, norm2, sub, CsrMatrix};
use rbws::msrb::*;
use rbws::reduced_basis::pod_build;

struct Fixture {
    disc: Discretization,
    train: Vec<ParamPoint>,
    training: MsrbTraining,
}

/// Desk-scale Example 1, 40 training parameters, N = 10, K_max = 8.
fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let spec = ProblemSpec::example1();
        let disc = desk(spec.clone());
        let train = samples(&spec, 40, 2024);
        let training = msrb_train(&train, 10, 8, &hf(&disc)).unwrap();
        Fixture { disc, train, training }
    })
}

fn tiny_system(seed: u64) -> AssembledSystem {
    let spec = ProblemSpec::example1();
    let disc = tiny(spec.clone());
    disc.assemble(&samples(&spec, 4, seed)[(seed % 4) as usize]).unwrap()
}

fn random_basis(seed: u64, dim: usize, n: usize) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    let snaps: Vec<Vec<f64>> = (0..n).map(|_| random_vec(&mut r, dim)).collect();
    pod_build(&snaps, n).unwrap().columns().to_vec()
}

/// One forward then one backward Gauss-Seidel sweep from zero, on the dense matrix.
fn dense_sgs(a: &DMatrix<f64>, b: &[f64]) -> Vec<f64> {
    let n = b.len();
    let mut x = vec![0.0; n];
    let relax = |x: &mut Vec<f64>, i: usize| {
        let off: f64 = (0..n).filter(|&j| j != i).map(|j| a[(i, j)] * x[j]).sum();
        x[i] = (b[i] - off) / a[(i, i)];
    };
    for i in 0..n {
        relax(&mut x, i);
    }
    for i in (0..n).rev() {
        relax(&mut x, i);
    }
    x
}

fn a_norm(a: &CsrMatrix, v: &[f64]) -> f64 {
    dot(v, &a.matvec(v)).sqrt()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn application_is_linear(seed in any::<u64>(), n in 1usize..6, alpha in -3.0f64..3.0, beta in -3.0f64..3.0) {
        let sys = tiny_system(seed);
        let w = random_basis(seed ^ 1, sys.size(), n);
        let mut r = rng(seed ^ 2);
        let b = random_vec(&mut r, sys.size());
        let c = random_vec(&mut r, sys.size());
        let combo: Vec<f64> = b.iter().zip(&c).map(|(x, y)| alpha * x + beta * y).collect();
        let lhs = msrb_apply(&combo, &sys.matrix, &w).unwrap();
        let (pb, pc) = (msrb_apply(&b, &sys.matrix, &w).unwrap(), msrb_apply(&c, &sys.matrix, &w).unwrap());
        let rhs: Vec<f64> = pb.iter().zip(&pc).map(|(x, y)| alpha * x + beta * y).collect();
        let scale = norm2(&pb) * alpha.abs() + norm2(&pc) * beta.abs();
        prop_assert!(norm2(&sub(&lhs, &rhs)) <= 1e-11 * scale.max(1e-300));
    }

    #[test]
    fn correction_is_the_energy_best_approximation(seed in any::<u64>(), n in 1usize..6) {
        let sys = tiny_system(seed);
        let a = &sys.matrix;
        let dense = a.to_dense();
        let w = random_basis(seed ^ 3, sys.size(), n);
        let mut r = rng(seed ^ 4);
        let b = random_vec(&mut r, sys.size());
        let exact = dense_solve(a, &b);
        let s = msrb_apply(&b, a, &w).unwrap();
        let half = dense_sgs(&dense, &b);
        let err = a_norm(a, &sub(&exact, &s));
        // the remaining residual is orthogonal to the space
        let res = a.residual(&b, &s);
        for wi in &w {
            prop_assert!(dot(wi, &res).abs() <= 1e-10 * norm2(&b));
        }
        // no other correction from the space does better in the energy norm
        for _ in 0..10 {
            let mut trial = half.clone();
            for wi in &w {
                rbws::linalg::axpy(r.random_range(-1.0..1.0), wi, &mut trial);
            }
            prop_assert!(err <= a_norm(a, &sub(&exact, &trial)) * (1.0 + 1e-10));
        }
        // the pure half-step is never better
        prop_assert!(err <= a_norm(a, &sub(&exact, &half)) * (1.0 + 1e-10));
    }
}

#[test]
fn half_step_matches_dense_gauss_seidel() {
    let sys = tiny_system(11);
    let a = &sys.matrix;
    let dense = a.to_dense();
    let w = random_basis(5, sys.size(), 3);
    let hier = MsrbHierarchy::new(pod_build(&w, 3).unwrap(), vec![pod_build(&w, 3).unwrap()], 3).unwrap();
    let run = msrb_richardson(a, &sys.rhs, &hier, 1e-30, 3).unwrap();
    // replay the first iteration densely
    let u0 = {
        let wm = DMatrix::from_fn(sys.size(), 3, |i, j| hier.initial().columns()[j][i]);
        let red = wm.transpose() * &dense * &wm;
        let c = red.cholesky().unwrap().solve(&(wm.transpose() * nalgebra::DVector::from_column_slice(&sys.rhs)));
        (wm * c).as_slice().to_vec()
    };
    let r0 = a.residual(&sys.rhs, &u0);
    let s = dense_sgs(&dense, &r0);
    let mut u = u0.clone();
    rbws::linalg::axpy(1.0, &s, &mut u);
    let want = a.residual(&sys.rhs, &u);
    assert!(rel_diff(&run.half_step_residuals[0], &want) <= 1e-12);
    assert!((run.report.history[0] - norm2(&r0) / norm2(&sys.rhs)).abs() <= 1e-14);
}

#[test]
fn without_spaces_the_preconditioner_is_the_smoother() {
    let sys = tiny_system(3);
    let a = &sys.matrix;
    let w = random_basis(1, sys.size(), 2);
    let hier = MsrbHierarchy::new(pod_build(&w, 2).unwrap(), vec![], 2).unwrap();
    assert_eq!(hier.k_max(), 0);
    let pre = MsrbPreconditioner::new(a, &hier).unwrap();
    let sgs = SmootherPreconditioner::new(a, SmootherKind::GaussSeidelSymmetric, 1).unwrap();
    let x0 = vec![0.0; sys.size()];
    let (_, r1) = pcg_solve(a, &sys.rhs, &x0, &pre, 1e-12, 60).unwrap();
    let (_, r2) = pcg_solve(a, &sys.rhs, &x0, &sgs, 1e-12, 60).unwrap();
    assert_eq!(r1.history, r2.history);
}

#[test]
fn hierarchy_shape() {
    let t = &fixture().training;
    let h = &t.hierarchy;
    assert_eq!(h.k_max(), 8);
    assert_eq!(h.bases().len(), 8);
    assert_eq!(h.rb_dim(), 10);
    assert!(h.bases().iter().all(|b| b.len() <= 10 && b.dim() == fixture().disc.n_free()));
    assert_eq!(t.half_step_residuals.len(), 8);
    assert!(t.half_step_residuals.iter().all(|s| s.len() == 40));
    // past K_max the last space is reused
    assert!(std::ptr::eq(h.basis_for_application(7).unwrap(), h.basis_for_application(100).unwrap()));
}

#[test]
fn first_space_captures_the_initial_errors() {
    let f = fixture();
    let h = &f.training.hierarchy;
    let hf = hf(&f.disc);
    let w1 = &h.bases()[0];
    let tail: f64 = w1.eigenvalues()[w1.len()..].iter().sum();
    let total: f64 = w1.eigenvalues().iter().sum();
    let mut sum = 0.0;
    for mu in &f.train {
        let sys = f.disc.assemble(mu).unwrap();
        let u = hf.solve(&sys.matrix, &sys.rhs).unwrap();
        let u0 = rbws::reduced_basis::rbm_pod_solve(&sys.matrix, &sys.rhs, h.initial().columns()).unwrap();
        let e = sub(&u, &u0);
        let gap = norm2(&sub(&e, &w1.project(&e))).powi(2);
        assert!(gap <= tail + 1e-8 * total);
        sum += gap;
    }
    assert!((sum - tail).abs() <= 1e-6 * total, "{sum:e} vs {tail:e}");
}

#[test]
fn richardson_residual_does_not_grow() {
    let f = fixture();
    let h = &f.training.hierarchy;
    for mu in &samples(&ProblemSpec::example1(), 5, 2025) {
        let sys = f.disc.assemble(mu).unwrap();
        let run = msrb_richardson(&sys.matrix, &sys.rhs, h, 1e-16, 30).unwrap();
        let hist = &run.report.history;
        assert!(hist[hist.len() - 1] < 1e-12, "{hist:?}");
        for w in hist.windows(2).filter(|w| w[0] > 1e-13) {
            assert!(w[1] <= w[0] * (1.0 + 1e-9), "{hist:?}");
        }
        assert_eq!(run.half_step_residuals.len(), run.report.iterations);
    }
}

#[test]
fn residual_spectra_are_well_formed() {
    let f = fixture();
    for s in &f.training.half_step_residuals {
        let sp = residual_spectrum(s).unwrap();
        assert!(!sp.trivial);
        assert!((sp.values[0] - 1.0).abs() < 1e-12);
        assert!(sp.values.windows(2).all(|w| w[0] >= w[1]));
        assert!(sp.count_above(1e-10) >= sp.count_above(1e-8));
    }
}

#[test]
fn dimension_mismatch_is_rejected() {
    let sys = tiny_system(1);
    let h = &fixture().training.hierarchy;
    assert!(MsrbPreconditioner::new(&sys.matrix, h).is_err());
    assert!(msrb_richardson(&sys.matrix, &sys.rhs, h, 1e-8, 5).is_err());
}
