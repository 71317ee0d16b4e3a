//! Information content and condensate fraction of a Hatano–Nelson chain
//! versus the coupling `g`, with the condensation onset and the
//! third-derivative kink that marks it.
//!
//! Run with `cargo run --release --example hatano_nelson_sweep -- [L]`
//! (default `L = 1000`).

use nhthermo::hatano_nelson::{hn_sweep, kink_near, onset_coupling, HnParams};
use nhthermo::numerics::linspace;

fn main() -> nhthermo::Result<()> {
    let l: usize = std::env::args().nth(1).map_or(1000, |a| a.parse().expect("integer L"));
    let rows = hn_sweep(l, 1.0, &[1.0], &linspace(0.0, 1.5, 16))?;
    println!("{:>6} {:>12} {:>12} {:>14}", "g", "mu", "phi0", "I_NH");
    for r in &rows {
        println!("{:>6.2} {:>12.6} {:>12.6} {:>14.6}", r.params.g, r.mu, r.phi0, r.i_nh());
    }
    let base = HnParams::new(l, 1.0, 0.0, 1.0);
    let onset = onset_coupling(&base)?;
    let scan = kink_near(&base, onset)?;
    println!(
        "onset g_c = {onset:.4}; kink g* = {:.4} (peak d³I/dg³ = {:.3e}, prominence {:.1})",
        scan.feature.location, scan.feature.peak, scan.feature.prominence
    );
    Ok(())
}
