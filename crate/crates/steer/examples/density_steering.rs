//! End-to-end: steer a rank-2 mixed state onto a unitarily equivalent one by
//! concatenating global approximate and local exact stages, then verify the
//! projected equality of the evolved density matrix.
//!
//! ```bash
//! cargo run --release --example density_steering
//! ```

use rand::{Rng, SeedableRng};
use steer::density::{evolve, projected_equality, DensityState, Projector};
use steer::global::{steer_states_exact, ExactOptions};
use steer::operators::build_x_squared;
use steer::perturbation::perturbed_spectrum;
use steer::spectral::{gram_schmidt_columns, BasisTruncation, WaveFunction};
use steer::{CMatrix, CVector, C64};

fn main() -> steer::Result<()> {
    let m = 16;
    let n = 2;
    let basis = BasisTruncation::new(m)?;
    let b = build_x_squared(basis);
    let spec = perturbed_spectrum(&b, 0.1)?;

    // ρ¹: rank-2 mixture of the two lowest modes; ρ² = R̂ ρ¹ R̂*
    let weights = [0.7, 0.3];
    let initial: Vec<WaveFunction> = (1..=n).map(|j| basis.mode_state(j)).collect::<steer::Result<_>>()?;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(13);
    let raw = CMatrix::from_fn(3, 3, |_, _| {
        C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
    });
    let q = gram_schmidt_columns(&raw, 1e-10)?;
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

    let steering = steer_states_exact(&b, &spec, &initial, &targets, &ExactOptions::default())?;
    println!("stage layout:");
    for (label, stage) in &steering.stages {
        println!(
            "  {label:<24} duration {:>10.2}, {:>9} segments",
            stage.duration(),
            stage.segment_count()
        );
    }
    println!("global stage errors: forward {:?}, reversed {:?}", steering.global_errors.0, steering.global_errors.1);
    println!("Newton iterations: {:?}", steering.newton_iterations);
    for (j, d) in steering.state_defects.iter().enumerate() {
        println!("state {}: ‖Γψ_j − e^(iχ_j)ψ_j'‖ = {:.3e} (χ_j = {:+.4})", j + 1, d, steering.phases[j]);
    }

    let rho1 = DensityState::from_ensemble(&weights, &initial)?;
    let rho2 = DensityState::from_ensemble(&weights, &targets)?;
    let evolved = evolve(&rho1, &steering.unitary)?;
    let projector = Projector::from_states(&targets)?;
    let defect = projected_equality(&evolved, &rho2, &projector)?;
    println!("\nprojected density-matrix equality defect: {defect:.3e}");
    println!("evolved spectrum: {:?}", &evolved.weights()[..n]);
    Ok(())
}
