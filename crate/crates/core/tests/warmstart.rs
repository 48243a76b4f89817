mod common;

use std::sync::OnceLock;

use common::*;
use rbws::bench::rb_accuracy_curve;
use rbws::grid_fem::{Discretization, ParamPoint, ProblemSpec};
use rbws::msrb::msrb_train;
use rbws::reduced_basis::{l1roc_offline, L1rocModel};
use rbws::warmstart::*;

struct Fixture {
    disc: Discretization,
    test: Vec<ParamPoint>,
    l1roc: L1rocModel,
}

fn fixture() -> &'static Fixture {
    static F: OnceLock<Fixture> = OnceLock::new();
    F.get_or_init(|| {
        let spec = ProblemSpec::example1();
        let disc = desk(spec.clone());
        let l1roc = l1roc_offline(&samples(&spec, 40, 2024), 15, 2024, &hf(&disc)).unwrap();
        Fixture { disc, test: samples(&spec, 8, 2025), l1roc }
    })
}

fn models(f: &Fixture) -> TrainedModels {
    TrainedModels { l1roc: Some(f.l1roc.clone()), ..Default::default() }
}

#[test]
fn larger_bases_give_smaller_initial_residuals() {
    let f = fixture();
    let models = models(f);
    let mut last = f64::INFINITY;
    for n in [1, 3, 5, 8, 10, 15] {
        let cfg = MethodConfig::standard(MethodId::RbiMgcg, n, 1e-8, 40);
        let mut avg = 0.0;
        for mu in &f.test {
            let sys = f.disc.assemble(mu).unwrap();
            let u0 = rb_initial_guess(&sys.matrix, &sys.rhs, &cfg, &models).unwrap();
            avg += initial_residual(&sys.matrix, &sys.rhs, &u0).unwrap().0 / f.test.len() as f64;
        }
        assert!(avg < last, "N = {n}: {avg:e} after {last:e}");
        last = avg;
    }
}

#[test]
fn initial_residual_matches_accuracy_curve() {
    let f = fixture();
    let models = models(f);
    for mu in &f.test[..3] {
        for n in [2, 7, 15] {
            let cfg = MethodConfig::standard(MethodId::RbiMgcg, n, 1e-8, 40);
            let sys = f.disc.assemble(mu).unwrap();
            let (_, rep) = rbi_pcg_solve(&sys.matrix, &sys.rhs, &f.disc, &cfg, &models).unwrap();
            let curve = rb_accuracy_curve(&f.l1roc, &f.disc, std::slice::from_ref(mu), &[n]).unwrap();
            let r = curve[0].1;
            assert!((rep.history[0] - r).abs() <= 1e-12 * r.max(1e-300) + 1e-15, "{} vs {r}", rep.history[0]);
        }
    }
}

#[test]
fn solves_are_deterministic_and_agree() {
    let f = fixture();
    let models = models(f);
    let sys = f.disc.assemble(&f.test[0]).unwrap();
    let mg = MethodConfig::standard(MethodId::Mgcg, 0, 1e-12, 40);
    let rb = MethodConfig::standard(MethodId::RbiMgcg, 10, 1e-12, 40);
    let (x1, r1) = rbi_pcg_solve(&sys.matrix, &sys.rhs, &f.disc, &rb, &models).unwrap();
    let (x2, r2) = rbi_pcg_solve(&sys.matrix, &sys.rhs, &f.disc, &rb, &models).unwrap();
    assert_eq!(x1, x2);
    assert_eq!(r1.history, r2.history);
    assert_eq!(r1.method, "rbi-mgcg-N10");
    let (x0, r0) = rbi_pcg_solve(&sys.matrix, &sys.rhs, &f.disc, &mg, &TrainedModels::default()).unwrap();
    assert!(r0.converged && r1.converged);
    assert!(r1.iterations < r0.iterations);
    assert!(rel_diff(&x1, &x0) <= 1e-10);
    assert!(r1.wall_time > 0.0);
}

#[test]
fn msrb_preconditioner_and_pod_initializer() {
    let spec = ProblemSpec::example2();
    let disc = tiny(spec.clone());
    let t = msrb_train(&samples(&spec, 8, 4), 3, 4, &hf(&disc)).unwrap();
    let models = TrainedModels { msrb: Some(t.hierarchy), ..Default::default() };
    let sys = disc.assemble(&samples(&spec, 2, 5)[1]).unwrap();
    let exact = dense_solve(&sys.matrix, &sys.rhs);
    let cfg = MethodConfig::standard(MethodId::RbiMsrbcg, 3, 1e-12, 100);
    let (x, rep) = rbi_pcg_solve(&sys.matrix, &sys.rhs, &disc, &cfg, &models).unwrap();
    assert!(rep.converged);
    assert!(rel_diff(&x, &exact) <= 1e-10);
    // POD initial guess with the multigrid preconditioner
    let mixed = MethodConfig { initializer: Initializer::Pod, ..MethodConfig::standard(MethodId::Mgcg, 3, 1e-12, 100) };
    let (y, rep) = rbi_pcg_solve(&sys.matrix, &sys.rhs, &disc, &mixed, &models).unwrap();
    assert!(rep.converged);
    assert!(rel_diff(&y, &exact) <= 1e-10);
}

#[test]
fn wrong_sizes_are_rejected() {
    let f = fixture();
    let other = tiny(ProblemSpec::example1());
    let sys = other.assemble(&f.test[0]).unwrap();
    let cfg = MethodConfig::standard(MethodId::Mgcg, 0, 1e-8, 40);
    assert!(rbi_pcg_solve(&sys.matrix, &sys.rhs, &f.disc, &cfg, &TrainedModels::default()).is_err());
    let bad = MethodConfig { delta: 0.0, ..cfg };
    assert!(bad.validate(&TrainedModels::default()).unwrap_err().is_config());
}
