//! Seeded random operators and states for Monte-Carlo sweeps and tests.

use nalgebra::DVector;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::operators::{hermitian_part, CMatrix, DensityMatrix, HermitianOperator, C64};

/// Deterministic generator used for every random draw in the crate.
pub type NhRng = ChaCha8Rng;

/// Reproducible generator from a 64-bit seed.
pub fn rng_from_seed(seed: u64) -> NhRng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R) -> C64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    C64::new(re, im)
}

/// Matrix with independent standard complex Gaussian entries.
pub fn ginibre<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> CMatrix {
    CMatrix::from_fn(dim, dim, |_, _| complex_gaussian(rng))
}

/// Hermitian operator from the Gaussian unitary ensemble, scaled by `scale`.
pub fn random_hermitian<R: Rng + ?Sized>(rng: &mut R, dim: usize, scale: f64) -> HermitianOperator {
    let g = ginibre(rng, dim);
    HermitianOperator::from_hermitian_part(&hermitian_part(&g).scale(scale))
        .expect("square matrix of positive dimension")
}

/// Full-rank mixed state from the Hilbert–Schmidt ensemble.
pub fn random_density<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    let g = ginibre(rng, dim);
    DensityMatrix::from_unnormalized(&(&g * g.adjoint())).expect("Wishart matrix is positive")
}

/// Haar-random normalized state vector.
pub fn random_state_vector<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DVector<C64> {
    let v = DVector::from_fn(dim, |_, _| complex_gaussian(rng));
    let n = v.norm();
    v.unscale(n)
}

/// Haar-random pure state.
pub fn random_pure<R: Rng + ?Sized>(rng: &mut R, dim: usize) -> DensityMatrix {
    DensityMatrix::pure(&random_state_vector(rng, dim)).expect("nonzero vector")
}

/// Uniform draw in `[lo, hi]` on a logarithmic scale.
pub fn log_uniform<R: Rng + ?Sized>(rng: &mut R, lo: f64, hi: f64) -> f64 {
    let u: f64 = rng.random();
    (lo.ln() + u * (hi.ln() - lo.ln())).exp()
}
