//! Relaxation of the two-level model `σx + iγσy` towards its steady state,
//! with the thermodynamic ledger along the way.
//!
//! Run with `cargo run --release --example relaxation`.

use nhthermo::dynamics::{evolve, BathSpec, EvolveControls, NonHermitianSystem, SteadyStateOptions};
use nhthermo::operators::{relative_entropy, trace_distance, DensityMatrix};
use nhthermo::thermo::{nh_information, thermal_decomposition, thermo_ledger};

fn main() -> nhthermo::Result<()> {
    let (gamma, temperature, kappa) = (0.6, 2.0, 0.05);
    let sys = NonHermitianSystem::two_level(gamma);
    let bath = BathSpec::two_level(temperature, kappa)?;

    let dec = thermal_decomposition(&sys, &bath, &SteadyStateOptions::default())?;
    let gibbs = DensityMatrix::gibbs(sys.h(), bath.beta())?;
    let i_sigma = nh_information(&dec.sigma, &dec)?;
    println!("steady state: I_NH(σ) = {i_sigma:.6}, D(σ‖Gibbs) = {:.6}", relative_entropy(&dec.sigma, &gibbs)?);

    let rho0 = DensityMatrix::maximally_mixed(2);
    let controls = EvolveControls { record_every: 20, ..EvolveControls::default() };
    let traj = evolve(&sys, &bath, &rho0, 10.0 / kappa, &controls)?;
    let ledger = thermo_ledger(&sys, &bath, &traj, &SteadyStateOptions::default())?;
    println!("{:>10} {:>12} {:>12} {:>12} {:>12}", "t", "U", "S", "Sigma_rate", "I_NH");
    for s in ledger.samples.iter().step_by((ledger.samples.len() / 10).max(1)) {
        println!("{:>10.2} {:>12.6} {:>12.6} {:>12.3e} {:>12.6}", s.t, s.u, s.s, s.sigma_rate, s.i_nh);
    }
    println!(
        "final distance to σ: {:.2e}; max trace drift {:.1e}",
        trace_distance(traj.final_state(), &dec.sigma)?,
        traj.max_trace_error()
    );
    Ok(())
}
