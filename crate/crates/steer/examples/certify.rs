//! Certify the coupling, resonance and rational-relation conditions for the
//! multiplication operator x² at a fixed truncation.
//!
//! ```bash
//! cargo run --release --example certify
//! ```

use steer::operators::{
    build_multiplication, build_x_squared, check_assumption_a, check_coupling_decay,
    check_resonance_condition, range_regularity_diagnostic,
};
use steer::spectral::BasisTruncation;

fn main() -> steer::Result<()> {
    let m = 64;
    let n = 4;
    let basis = BasisTruncation::new(m)?;
    let b = build_x_squared(basis);

    println!("operator x² at truncation M = {m}");
    println!("  B_22        = {:.6} (1/3 − 1/(8π²))", b.entry(2, 2).re);
    println!("  |B_12|      = {:.6}", b.entry(1, 2).norm());
    println!("  hermiticity = {:.3e}", b.hermiticity_defect());

    // cross-check the closed form against the quadrature construction
    let quad = build_multiplication(|x| x * x, basis, 4 * m)?;
    let diff = (b.matrix() - quad.matrix()).map(|z| z.norm()).max();
    println!("  closed form vs quadrature: max entry difference {diff:.3e}");

    let coupling = check_coupling_decay(&b, n)?;
    println!(
        "\ncoupling decay (N = {n}): ok = {}, C_N = {:.6e} at (k,j) = ({},{})",
        coupling.ok, coupling.c_n, coupling.witness_values[0].k, coupling.witness_values[0].j
    );

    let resonance = check_resonance_condition(&b, n, 2 * n)?;
    println!(
        "resonance condition (jmax = {}): {} exact quadruples, {} failures, ok = {}",
        resonance.jmax,
        resonance.quadruples.len(),
        resonance.failures.len(),
        resonance.ok
    );
    for w in resonance.quadruples.iter().take(4) {
        let q = w.quadruple;
        println!(
            "  ({},{},{},{}): diagonal combination {:.6e}",
            q.j, q.k, q.l, q.m, w.combination
        );
    }

    let a_cert = check_assumption_a(&b, n.min(6), 10, 4)?;
    println!(
        "rational relations (height {}): {} checked, min |Σ r_j B_jj| = {:.4e}, ok = {}",
        a_cert.height, a_cert.relations_checked, a_cert.min_diagonal_sum, a_cert.ok
    );

    let slopes = range_regularity_diagnostic(&b, n);
    println!("range-regularity diagnostic (k³|B| row slopes, no certificate): {slopes:.3?}");
    Ok(())
}
