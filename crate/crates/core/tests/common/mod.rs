#![allow(dead_code)]

use nonmarkov::linalg::{c64, CMatrix};
use nonmarkov::superop::{kraus_to_superop, lindblad_superop, LindbladSpec, Superoperator};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_matrix(rng: &mut impl Rng, d: usize, scale: f64) -> CMatrix {
    CMatrix::from_fn(d, d, |_, _| c64(rng.random_range(-scale..scale), rng.random_range(-scale..scale)))
}

pub fn random_hermitian(rng: &mut impl Rng, d: usize, scale: f64) -> CMatrix {
    let a = random_matrix(rng, d, scale);
    (&a + a.adjoint()) * c64(0.5, 0.)
}

pub fn random_lindblad(rng: &mut impl Rng, d: usize) -> Superoperator {
    let h = random_hermitian(rng, d, 1.0);
    let jumps = (0..2).map(|_| random_matrix(rng, d, 0.7)).collect();
    lindblad_superop(&LindbladSpec::new(h, jumps).unwrap())
}

/// Hermitian inverse square root via eigen-decomposition.
fn inv_sqrt(m: &CMatrix) -> CMatrix {
    let (ev, u) = nonmarkov::linalg::hermitian_eigen(m);
    let diag = CMatrix::from_diagonal(&nalgebra::DVector::from_iterator(
        ev.len(),
        ev.iter().map(|v| c64(1.0 / v.sqrt(), 0.)),
    ));
    &u * diag * u.adjoint()
}

/// Random CPTP map with `k` Kraus operators.
pub fn random_channel(rng: &mut impl Rng, d: usize, k: usize) -> Superoperator {
    let raw: Vec<CMatrix> = (0..k).map(|_| random_matrix(rng, d, 1.0)).collect();
    let s = raw.iter().fold(CMatrix::zeros(d, d), |acc, a| acc + a.adjoint() * a);
    let norm = inv_sqrt(&s);
    let ops: Vec<CMatrix> = raw.iter().map(|a| a * &norm).collect();
    kraus_to_superop(&ops).unwrap()
}

pub fn max_over(xs: impl IntoIterator<Item = f64>) -> f64 {
    xs.into_iter().fold(0.0, f64::max)
}
