//! Sweep the eigenbranches of A + u0·B over a grid of amplitudes and write
//! the plot-ready CSV (u0, mode, eigenvalue, a, eta_norm) to stdout.
//!
//! ```bash
//! cargo run --release --example spectrum_sweep > branches.csv
//! ```

use steer::operators::build_x_squared;
use steer::perturbation::eigenbranch_sweep;
use steer::spectral::BasisTruncation;

fn main() -> steer::Result<()> {
    let m = 16;
    let b = build_x_squared(BasisTruncation::new(m)?);
    let grid: Vec<f64> = (0..=40).map(|i| 0.2 * i as f64 / 40.0).collect();
    let rows = eigenbranch_sweep(&b, &grid)?;
    println!("u0,mode,eigenvalue,a,eta_norm");
    for r in rows {
        println!(
            "{:.16e},{},{:.16e},{:.16e},{:.16e}",
            r.u0, r.mode, r.eigenvalue, r.a, r.eta_norm
        );
    }
    Ok(())
}
