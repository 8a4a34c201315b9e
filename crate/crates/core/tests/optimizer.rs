mod common;

use common::{rng, vector};
use nalgebra::DMatrix;
use ndm::optim::{cg_solve, step, CgSettings, FisherApprox, OptimizerKind, UpdateRule};
use rand::Rng;

fn random_grads(seed: u64, b: usize, k: usize) -> Vec<Vec<f64>> {
    let mut r = rng(seed);
    (0..b).map(|_| (0..k).map(|_| r.random_range(-1.0..1.0)).collect()).collect()
}

fn dense_fisher(grads: &[Vec<f64>], damping: f64) -> DMatrix<f64> {
    let k = grads[0].len();
    let mut m = DMatrix::identity(k, k) * damping;
    for u in grads {
        let u = vector(u);
        m += &u * u.transpose() / grads.len() as f64;
    }
    m
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
    d / b.iter().map(|y| y * y).sum::<f64>().sqrt()
}

#[test]
fn matvec_matches_dense_operator() {
    for seed in 0..20 {
        let grads = random_grads(seed, 5, 7);
        let f = FisherApprox::empirical(grads.clone(), 0.3).unwrap();
        let v: Vec<f64> = random_grads(seed + 100, 1, 7).remove(0);
        let expect = dense_fisher(&grads, 0.3) * vector(&v);
        assert!(rel(&f.matvec(&v).unwrap(), expect.as_slice()) < 1e-13);
    }
}

#[test]
fn cg_matches_dense_solve() {
    for seed in 0..200u64 {
        let k = 1 + (seed % 8) as usize;
        let grads = random_grads(seed, k + 3, k);
        let damping = if seed % 2 == 0 { 1e-3 } else { 0.5 };
        let f = FisherApprox::empirical(grads.clone(), damping).unwrap();
        let b: Vec<f64> = random_grads(seed + 1000, 1, k).remove(0);
        let exact = dense_fisher(&grads, damping).cholesky().unwrap().solve(&vector(&b));
        let r = cg_solve(&f, &b, CgSettings { max_iters: 10 * k, tol: 1e-12 }).unwrap();
        assert!(rel(&r.x, exact.as_slice()) < 1e-6, "seed {seed}");
    }
}

#[test]
fn cg_on_mtm_plus_identity() {
    // A = MᵀM + I as an empirical Fisher: rows of √B·M with γ = 1.
    let m = random_grads(7, 6, 6);
    let scaled: Vec<Vec<f64>> = m.iter().map(|r| r.iter().map(|v| v * 6f64.sqrt()).collect()).collect();
    let f = FisherApprox::empirical(scaled, 1.0).unwrap();
    let mm = DMatrix::from_fn(6, 6, |i, j| m[i][j]);
    let a = mm.transpose() * &mm + DMatrix::identity(6, 6);
    let b = [1.0, -2.0, 0.5, 3.0, 0.0, 1.5];
    let exact = a.cholesky().unwrap().solve(&vector(&b));
    let r = cg_solve(&f, &b, CgSettings::default()).unwrap();
    assert!(r.converged);
    assert!(rel(&r.x, exact.as_slice()) < 1e-6);
}

#[test]
fn converges_within_distinct_eigenvalue_count() {
    // Two samples span a 2-dimensional subspace: A has at most 3 distinct eigenvalues.
    let grads = random_grads(3, 2, 8);
    let f = FisherApprox::empirical(grads, 0.1).unwrap();
    let b: Vec<f64> = random_grads(4, 1, 8).remove(0);
    let r = cg_solve(&f, &b, CgSettings { max_iters: 50, tol: 1e-10 }).unwrap();
    assert!(r.converged && r.iterations <= 3, "{} iterations", r.iterations);
}

#[test]
fn gradient_scaling() {
    let grads = random_grads(11, 6, 4);
    let g: Vec<f64> = random_grads(12, 1, 4).remove(0);
    let base = cg_solve(&FisherApprox::empirical(grads.clone(), 0.0).unwrap(), &g, CgSettings { max_iters: 100, tol: 1e-13 }).unwrap();
    for c in [0.1, 3.0, 40.0] {
        let scaled: Vec<Vec<f64>> = grads.iter().map(|u| u.iter().map(|v| c * v).collect()).collect();
        let f = FisherApprox::empirical(scaled, 0.0).unwrap();
        let v = [1.0, 0.5, -2.0, 0.25];
        let a = f.matvec(&v).unwrap();
        let a1 = FisherApprox::empirical(grads.clone(), 0.0).unwrap().matvec(&v).unwrap();
        assert!(rel(&a, &a1.iter().map(|x| c * c * x).collect::<Vec<_>>()) < 1e-13);
        // c-scaled gradient: step shrinks by 1/c.
        let cg: Vec<f64> = g.iter().map(|v| c * v).collect();
        let r = cg_solve(&f, &cg, CgSettings { max_iters: 100, tol: 1e-13 }).unwrap();
        assert!(rel(&r.x, &base.x.iter().map(|x| x / c).collect::<Vec<_>>()) < 1e-8);
        // c²-scaled gradient: identical solve output.
        let c2g: Vec<f64> = g.iter().map(|v| c * c * v).collect();
        let r = cg_solve(&f, &c2g, CgSettings { max_iters: 100, tol: 1e-13 }).unwrap();
        assert!(rel(&r.x, &base.x) < 1e-8);
    }
}

#[test]
fn identity_fisher_step_equals_sgd() {
    for seed in 0..50 {
        let v = random_grads(seed, 2, 9);
        let sgd = UpdateRule::new(OptimizerKind::Sgd, 0.05, CgSettings::default()).unwrap();
        let nat = UpdateRule { kind: OptimizerKind::Natural, ..sgd };
        let a = step(&sgd, &v[0], &v[1], None).unwrap().theta;
        let b = step(&nat, &v[0], &v[1], Some(&FisherApprox::identity(9, 0.0).unwrap())).unwrap().theta;
        assert_eq!(a, b);
    }
}
