//! Steady-state information of the two-level model across the exceptional
//! point `γ = 1`, where the curvature of `I_NH(γ)` peaks.
//!
//! Run with `cargo run --release --example exceptional_point`.

use nhthermo::dynamics::DEFAULT_KAPPA;
use nhthermo::engine::{ep_kink_scan, high_t_closed_form, steady_information};
use nhthermo::numerics::arange;

fn main() -> nhthermo::Result<()> {
    let temperature = 100.0;
    println!("{:>6} {:>12} {:>12}", "γ", "I_NH", "closed form");
    for gamma in arange(0.0, 1.5, 0.125) {
        println!("{gamma:>6.3} {:>12.6} {:>12.6}", steady_information(temperature, gamma, DEFAULT_KAPPA)?, high_t_closed_form(gamma));
    }
    let kink = ep_kink_scan(temperature, &arange(0.0, 1.5, 0.01), DEFAULT_KAPPA)?;
    println!("curvature peak at γ = {:.3} ± {:.3}", kink.location, kink.uncertainty);
    Ok(())
}
