//! Lie-algebraic layer: bracket closure of the admissible planar generators
//! and factorization of random special unitaries into rotations routed
//! along the transition graph.
//!
//! ```bash
//! cargo run --release --example su_factorization
//! ```

use rand::{Rng, SeedableRng};
use steer::global::{admissible_transitions, lie_closure, rotation_product, su_decompose};
use steer::operators::build_x_squared;
use steer::spectral::{gram_schmidt_columns, BasisTruncation};
use steer::{CMatrix, C64};

fn main() -> steer::Result<()> {
    let m = 16;
    let b = build_x_squared(BasisTruncation::new(m)?);

    for n1 in [2usize, 3, 4] {
        let tr = admissible_transitions(&b, n1)?;
        let closure = lie_closure(&tr, 2);
        println!(
            "N1 = {n1}: {} admissible pairs, Lie closure dimension {} (su({n1}) needs {})",
            tr.pairs.len(),
            closure.dimension,
            n1 * n1 - 1
        );
    }

    let tr8 = admissible_transitions(&b, 8)?;
    println!(
        "\nN1 = 8: pair (7,1) admissible? {} (its frequency coincides with (8,4))",
        tr8.find(7, 1).is_some()
    );

    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
    let n1 = 4;
    let tr = admissible_transitions(&b, n1)?;
    let mut worst = 0.0f64;
    let mut factor_count = 0usize;
    for _ in 0..50 {
        let raw = CMatrix::from_fn(n1, n1, |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let q = gram_schmidt_columns(&raw, 1e-10)?;
        let det = q.clone().lu().determinant();
        let fix = det.conj() / C64::new(det.norm(), 0.0);
        let mut target = q;
        for r in 0..n1 {
            target[(r, n1 - 1)] *= fix;
        }
        let factors = su_decompose(&target, &tr)?;
        factor_count += factors.len();
        let rec = rotation_product(&factors, n1);
        worst = worst.max((rec - target).map(|z| z.norm()).max());
    }
    println!(
        "\n50 random SU({n1}) targets: mean factors {:.1}, worst reconstruction error {:.3e}",
        factor_count as f64 / 50.0,
        worst
    );
    Ok(())
}
