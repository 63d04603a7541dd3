//! Global approximate steering: factor a random SU(3) rotation of the two
//! lowest modes into admissible planar rotations and realize each factor by
//! a resonant pulse, escalating the amplitude index until the budget is met.
//!
//! ```bash
//! cargo run --release --example global_steering
//! ```

use steer::global::{steer_global, GlobalOptions};
use steer::scenario::{run_scenario, stable_json_string, Scenario};
use steer::spectral::{BasisTruncation, WaveFunction};
use steer::{CMatrix, CVector, C64};
use rand::{Rng, SeedableRng};

fn main() -> steer::Result<()> {
    let m = 16;
    let n = 2;
    let basis = BasisTruncation::new(m)?;
    let b = steer::operators::build_x_squared(basis);

    // random SU(3) image of {φ1, φ2} inside the three lowest modes
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
    let raw = CMatrix::from_fn(3, 3, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let q = steer::spectral::gram_schmidt_columns(&raw, 1e-10)?;
    let det = q.clone().lu().determinant();
    let fix = det.conj() / C64::new(det.norm(), 0.0);
    let mut block = q;
    for r in 0..3 {
        block[(r, 2)] *= fix;
    }
    let targets: Vec<WaveFunction> = (0..n)
        .map(|j| {
            let mut c = CVector::zeros(m);
            for r in 0..3 {
                c[r] = block[(r, j)];
            }
            WaveFunction::new(c, basis)
        })
        .collect::<steer::Result<_>>()?;

    let options = GlobalOptions { epsilon: 0.05, ..GlobalOptions::default() };
    let report = steer_global(&b, &targets, &options)?;
    println!("enlarged dimension N1 = {}, {} factors", report.n1, report.factors.len());
    for f in &report.factors {
        println!(
            "  ({},{}) angle {:.4} phase {:.4}: n = {:>3}, factor error {:.2e}, duration {:>8.2}, segments {}..{}",
            f.rotation.j, f.rotation.k, f.rotation.angle, f.rotation.phase,
            f.n, f.factor_error, f.duration, f.segment_range.0, f.segment_range.1
        );
    }
    println!("total pulse time {:.2}", report.total_time);
    for (j, err) in report.achieved_errors.iter().enumerate() {
        println!("state {}: H³ steering error {:.3e}", j + 1, err);
    }

    // the same pipeline through the scenario runner
    let config = r#"{"mode": "steer-global", "truncation": 16, "n": 2,
                     "targets": {"random_su": 3}, "tolerances": {"epsilon": 0.05}}"#;
    let scenario = Scenario::from_json(config)?;
    let value = run_scenario(&scenario, 5)?;
    println!(
        "\nscenario runner achieved errors: {}",
        stable_json_string(&value["achieved_errors"])?
    );
    Ok(())
}
