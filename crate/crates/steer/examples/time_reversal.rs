//! Propagation diagnostics: norm conservation, the semigroup property of
//! constant steps, and the time-reversal identity Γ̃_T^ũ = (Γ_T^u)*.
//!
//! ```bash
//! cargo run --release --example time_reversal
//! ```

use rand::{Rng, SeedableRng};
use steer::operators::build_x_squared;
use steer::propagator::{propagate, reverse_check, ControlSignal, Segment};
use steer::spectral::BasisTruncation;

fn main() -> steer::Result<()> {
    let m = 16;
    let basis = BasisTruncation::new(m)?;
    let b = build_x_squared(basis);
    let psi = basis.mode_state(1)?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(1);

    println!("random 8-segment controls, u0 = 0.1:");
    for trial in 0..5 {
        let segments: Vec<Segment> = (0..8)
            .map(|_| Segment {
                dt: 0.05 + 0.2 * rng.random::<f64>(),
                value: rng.random::<f64>() - 0.5,
            })
            .collect();
        let signal = ControlSignal::new(0.1, segments)?;
        let result = propagate(&b, &signal, &[psi.clone()])?;
        let norm_drift = result.norm_history[0]
            .iter()
            .map(|v| (v - 1.0).abs())
            .fold(0.0f64, f64::max);
        let defect = reverse_check(&b, &signal, &psi)?;
        println!(
            "  trial {trial}: T = {:.3}, norm drift {:.2e}, reversal defect {:.2e}, unitarity {:.2e}",
            signal.total_time(),
            norm_drift,
            defect,
            result.unitarity_defect()
        );
    }

    // H³ history under a stronger drive
    let signal = ControlSignal::sample(0.1, |s| 0.4 * (20.0 * s).cos(), 2.0, 1024)?;
    let result = propagate(&b, &signal, &[psi])?;
    let h3 = &result.h3_history[0];
    println!(
        "\nH³ norm along a driven trajectory: start {:.4}, max {:.4}, end {:.4}",
        h3.first().unwrap(),
        h3.iter().cloned().fold(0.0f64, f64::max),
        h3.last().unwrap()
    );
    Ok(())
}
