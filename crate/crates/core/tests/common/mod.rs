//! Seeded generators shared by the integration targets.
#![allow(dead_code)]

use mechq::hilbert::Operator;
use mechq::{Dims, QuantumState};
use nalgebra::{DMatrix, DVector};
use num_complex::Complex64 as C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> DMatrix<C64> {
    DMatrix::from_fn(rows, cols, |_, _| {
        let re: f64 = StandardNormal.sample(rng);
        let im: f64 = StandardNormal.sample(rng);
        C64::new(re, im)
    })
}

pub fn random_hermitian(rng: &mut ChaCha8Rng, dims: Dims) -> Operator {
    let a = gaussian_matrix(rng, dims.total(), dims.total());
    Operator::from_matrix(dims, (&a + a.adjoint()) * C64::new(0.5, 0.0)).unwrap()
}

/// Full-rank density matrix from a Ginibre draw.
pub fn random_density(rng: &mut ChaCha8Rng, dims: Dims) -> QuantumState {
    let a = gaussian_matrix(rng, dims.total(), dims.total());
    let m = &a * a.adjoint();
    let tr = m.trace();
    QuantumState::density(dims, m / tr).unwrap()
}

pub fn random_ket(rng: &mut ChaCha8Rng, dims: Dims) -> QuantumState {
    let a = gaussian_matrix(rng, dims.total(), 1);
    QuantumState::ket_normalized(dims, DVector::from_column_slice(a.as_slice())).unwrap()
}

/// Uniform draw from the simplex over `len` levels.
pub fn random_distribution(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    let e: Vec<f64> = (0..len).map(|_| -rng.random::<f64>().max(1e-300).ln()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|x| x / s).collect()
}

pub fn hermiticity(m: &DMatrix<C64>) -> f64 {
    (m - m.adjoint()).camax()
}
