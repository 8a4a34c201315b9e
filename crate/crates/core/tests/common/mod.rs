#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use ndm::ad::ParamStore;
use ndm::coupling::{CoordinateStack, CouplingLayer};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Adds `N(0, std²)` noise to every parameter.
pub fn perturb(params: &ParamStore, rng: &mut ChaCha8Rng, std: f64) -> ParamStore {
    let n = Normal::new(0.0, std).unwrap();
    let flat: Vec<f64> = params.flatten().iter().map(|v| v + n.sample(rng)).collect();
    params.unflatten(&flat).unwrap()
}

/// A stack of `layers` couplings with random (non-identity) parameters.
pub fn random_stack(d: usize, layers: usize, hidden: usize, seed: u64) -> (CoordinateStack, ParamStore) {
    let mut r = rng(seed);
    let mut p = ParamStore::new();
    let ls: Vec<CouplingLayer> = (0..layers)
        .map(|k| {
            let l = CouplingLayer::new(&format!("c{k}"), d, k, hidden).unwrap();
            l.init(&mut p, &mut r).unwrap();
            l
        })
        .collect();
    let p = perturb(&p, &mut r, 0.5);
    (CoordinateStack::new(d, ls).unwrap(), p)
}

pub fn random_point(rng: &mut ChaCha8Rng, d: usize, scale: f64) -> Vec<f64> {
    (0..d).map(|_| rng.random_range(-scale..scale)).collect()
}

/// Central-difference Jacobian of `f` at `x`.
pub fn fd_jacobian(f: impl Fn(&[f64]) -> Vec<f64>, x: &[f64], h: f64) -> DMatrix<f64> {
    let d = x.len();
    let mut j = DMatrix::zeros(d, d);
    for c in 0..d {
        let mut xp = x.to_vec();
        let mut xm = x.to_vec();
        xp[c] += h;
        xm[c] -= h;
        let (fp, fm) = (f(&xp), f(&xm));
        for r in 0..d {
            j[(r, c)] = (fp[r] - fm[r]) / (2.0 * h);
        }
    }
    j
}

pub fn dense(rows: usize, cols: usize, data: &[f64]) -> DMatrix<f64> {
    DMatrix::from_row_slice(rows, cols, data)
}

pub fn vector(v: &[f64]) -> DVector<f64> {
    DVector::from_column_slice(v)
}
