//! Operator kernels: entropies, the Fréchet derivative of the matrix
//! logarithm, and the Δ operator, checked against finite differences.
//!
//! Run with `cargo run --release --example operator_kernels`.

use nhthermo::operators::{
    delta_operator, frechet_dlog, relative_entropy, trace, von_neumann_entropy, DensityMatrix, HermitianOperator,
    EIG_CLAMP,
};
use nhthermo::random::{random_density, random_hermitian, rng_from_seed};

fn main() -> nhthermo::Result<()> {
    let mut rng = rng_from_seed(42);
    let sigma = random_density(&mut rng, 3);
    let rho = random_density(&mut rng, 3);
    println!("S(σ) = {:.6}, S(ρ) = {:.6}", von_neumann_entropy(&sigma)?, von_neumann_entropy(&rho)?);
    println!("D(ρ‖σ) = {:.6} (non-negative)", relative_entropy(&rho, &sigma)?);

    // Directional derivative of ln at σ along X, versus a central difference.
    let x = random_hermitian(&mut rng, 3, 1.0);
    let exact = frechet_dlog(&sigma, x.matrix(), EIG_CLAMP)?.value;
    let h = 1e-5;
    let ln_at = |s: f64| -> nhthermo::Result<HermitianOperator> {
        HermitianOperator::from_hermitian_part(&(sigma.matrix() + x.matrix().scale(s)))?.map_spectrum(f64::ln)
    };
    let fd = (ln_at(h)?.matrix() - ln_at(-h)?.matrix()).unscale(2.0 * h);
    println!("‖dlog − FD‖/‖dlog‖ = {:.2e}", (&exact - &fd).norm() / exact.norm());

    // Δ = dlog_σ(i[H, σ]) is traceless against σ.
    let h_op = random_hermitian(&mut rng, 3, 1.0);
    let delta = delta_operator(&sigma, &h_op, EIG_CLAMP)?;
    println!("|tr σΔ| = {:.2e}", trace(&(sigma.matrix() * delta.matrix())).norm());

    let mixed = DensityMatrix::maximally_mixed(3);
    println!("S(𝟙/3) = {:.6} = ln 3 = {:.6}", von_neumann_entropy(&mixed)?, 3f64.ln());
    Ok(())
}
