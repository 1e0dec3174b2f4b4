//! Random instances shared by the property and acceptance suites.
#![allow(dead_code)]

use proptest::prelude::*;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use spectral_thermo::systems::{build_pf_operator, ergodic_measures};
use spectral_thermo::{FiniteMapSystem, Measure64, Potential64, TransferMatrix64};

pub fn transfer(map: Vec<usize>, psi: &[f64]) -> TransferMatrix64 {
    build_pf_operator(&FiniteMapSystem::new(map).unwrap(), psi).unwrap()
}

/// `(map, psi)` with `n <= max_n` states and `psi` in `[lo, hi]`.
pub fn system(max_n: usize, lo: f64, hi: f64) -> impl Strategy<Value = TransferMatrix64> {
    (1..=max_n)
        .prop_flat_map(move |n| (proptest::collection::vec(0..n, n), proptest::collection::vec(lo..=hi, n)))
        .prop_map(|(map, psi)| transfer(map, &psi))
}

pub fn potential(n: usize, bound: f64) -> impl Strategy<Value = Potential64> {
    proptest::collection::vec(-bound..=bound, n).prop_map(|v| Potential64::new(v).unwrap())
}

/// A system together with a potential of matching length.
pub fn system_and_potential(max_n: usize, bound: f64) -> impl Strategy<Value = (TransferMatrix64, Potential64)> {
    system(max_n, 0.2, 5.0).prop_flat_map(move |a| {
        let n = a.n_states();
        (Just(a), potential(n, bound))
    })
}

pub fn vertices(a: &TransferMatrix64) -> Vec<Measure64> {
    ergodic_measures(a.system()).into_iter().map(|m| m.into_measure()).collect()
}

/// Invariant measure with the given (unnormalized, nonnegative) hull weights.
pub fn hull_point(verts: &[Measure64], w: &[f64]) -> Measure64 {
    let total: f64 = w.iter().sum();
    let n = verts[0].len();
    let mut out = vec![0.0; n];
    for (v, &c) in verts.iter().zip(w) {
        for (o, &x) in out.iter_mut().zip(v.weights()) {
            *o += c / total * x;
        }
    }
    Measure64::normalized(out).unwrap()
}

pub fn random_system(rng: &mut ChaCha8Rng, max_n: usize, lo: f64, hi: f64) -> TransferMatrix64 {
    let n = rng.gen_range(1..=max_n);
    let map = (0..n).map(|_| rng.gen_range(0..n)).collect();
    let psi: Vec<f64> = (0..n).map(|_| rng.gen_range(lo..=hi)).collect();
    transfer(map, &psi)
}

pub fn random_potential(rng: &mut ChaCha8Rng, n: usize, bound: f64) -> Potential64 {
    Potential64::new((0..n).map(|_| rng.gen_range(-bound..=bound)).collect()).unwrap()
}

/// Uniformly random point of the invariant polytope (flat Dirichlet weights).
pub fn random_invariant(rng: &mut ChaCha8Rng, a: &TransferMatrix64) -> Measure64 {
    let verts = vertices(a);
    let w: Vec<f64> = verts.iter().map(|_| -rng.gen_range(f64::MIN_POSITIVE..1.0f64).ln()).collect();
    hull_point(&verts, &w)
}
