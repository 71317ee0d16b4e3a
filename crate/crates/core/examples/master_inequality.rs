//! Statistics of the information-flow bound `tr((ln σ − ln ρ)Dρ) ≥ ⟨…⟩_ρ`
//! on random instances, with and without non-Hermiticity.
//!
//! Run with `cargo run --release --example master_inequality`.

use nhthermo::dynamics::{steady_state, BathSpec, NonHermitianSystem, SteadyStateOptions};
use nhthermo::random::{random_density, random_hermitian, rng_from_seed};
use nhthermo::thermo::check_master_inequality;

fn main() -> nhthermo::Result<()> {
    let mut rng = rng_from_seed(9);
    for gamma_scale in [0.0, 0.3] {
        let (mut worst, mut negative) = (f64::INFINITY, 0);
        let n = 200;
        for _ in 0..n {
            let h = random_hermitian(&mut rng, 3, 1.0);
            let sys = if gamma_scale == 0.0 {
                NonHermitianSystem::hermitian(h)
            } else {
                NonHermitianSystem::new(h, random_hermitian(&mut rng, 3, gamma_scale))?
            };
            let bath = BathSpec::site_projectors(3, 1.5, 0.05)?;
            let sigma = steady_state(&sys, &bath, &SteadyStateOptions::default())?;
            let m = check_master_inequality(&sys, &bath, &random_density(&mut rng, 3), &sigma)?;
            worst = worst.min(m.slack);
            negative += usize::from(m.slack < -1e-8);
        }
        println!("‖Γ‖ scale {gamma_scale}: {negative}/{n} negative slacks, worst {worst:.3e}");
    }
    Ok(())
}
