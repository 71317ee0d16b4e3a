//! Critical coupling of the Hatano–Nelson chain versus temperature, with
//! the low-temperature power law and the high-temperature logarithm.
//!
//! Run with `cargo run --release --example critical_line`.

use nhthermo::hatano_nelson::critical_line;
use nhthermo::numerics::linspace;

fn main() -> nhthermo::Result<()> {
    let (l, j) = (2000, 1.0);
    for (label, temps) in [("low T", linspace(0.05, 0.2, 6)), ("high T", vec![5.0, 10.0, 20.0, 50.0])] {
        let line = critical_line(&temps, l, j, false)?;
        println!("{label}:");
        for p in &line.points {
            println!("  T = {:>6.3}  g_c = {:.4}  g_c − ln T = {:+.4}", p.t, p.g_c_onset, p.g_c_onset - p.t.ln());
        }
        if let Some(f) = line.fits {
            println!("  g_c ≈ {:.3}·T^{:.3};  g_c ≈ {:.3} + ln T (max residual {:.1}%)", f.power_law.0, f.power_law.1, f.log_offset, 100.0 * f.log_residual);
        }
    }
    Ok(())
}
