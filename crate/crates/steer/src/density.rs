//! Density matrices in the truncated basis: ensembles, Von Neumann
//! evolution under propagator matrices, and projected-equality checks.

use crate::error::{Result, SteerError};
use crate::spectral::WaveFunction;
use crate::{c64, CMatrix};

/// Eigenvalues of a density matrix may dip this far below zero before the
/// state is rejected rather than repaired.
pub const PSD_TOL: f64 = 1e-12;

/// A Hermitian positive-semidefinite trace-1 matrix with its cached
/// eigendecomposition.
#[derive(Debug, Clone)]
pub struct DensityState {
    matrix: CMatrix,
    /// Ensemble weights (eigenvalues), descending.
    weights: Vec<f64>,
    /// Eigenvectors as columns, aligned with `weights`.
    vectors: CMatrix,
}

impl DensityState {
    /// Validate and wrap a raw matrix. Eigenvalues in `[−PSD_TOL, 0)` are
    /// clamped to zero with renormalization; anything lower is an error.
    pub fn from_matrix(matrix: CMatrix) -> Result<Self> {
        let m = matrix.nrows();
        if matrix.ncols() != m {
            return Err(SteerError::DimensionMismatch { expected: m, got: matrix.ncols() });
        }
        let herm = crate::operators::hermiticity_defect(&matrix);
        if herm > 1e-12 {
            return Err(SteerError::InvalidEnsemble(format!(
                "matrix is not Hermitian: defect {herm:.3e}"
            )));
        }
        let trace = matrix.trace();
        if (trace - c64(1.0, 0.0)).norm() > 1e-12 {
            return Err(SteerError::InvalidEnsemble(format!("trace is {trace}, not 1")));
        }
        let es = matrix.clone().symmetric_eigen();
        let mut pairs: Vec<(f64, usize)> =
            es.eigenvalues.iter().copied().zip(0..m).collect();
        pairs.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap());
        let mut weights = Vec::with_capacity(m);
        let mut vectors = CMatrix::zeros(m, m);
        for (slot, (w, col)) in pairs.iter().enumerate() {
            if *w < -PSD_TOL {
                return Err(SteerError::InvalidEnsemble(format!(
                    "eigenvalue {w:.3e} below the PSD tolerance"
                )));
            }
            weights.push(w.max(0.0));
            vectors.set_column(slot, &es.eigenvectors.column(*col));
        }
        let total: f64 = weights.iter().sum();
        for w in &mut weights {
            *w /= total;
        }
        Ok(Self { matrix, weights, vectors })
    }

    /// Assemble `ρ = Σ l_j |ψ_j⟩⟨ψ_j|` from nonnegative weights summing to 1
    /// and an orthonormal family.
    pub fn from_ensemble(weights: &[f64], states: &[WaveFunction]) -> Result<Self> {
        if weights.len() != states.len() || states.is_empty() {
            return Err(SteerError::InvalidEnsemble(format!(
                "{} weights for {} states",
                weights.len(),
                states.len()
            )));
        }
        let total: f64 = weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(SteerError::InvalidEnsemble(format!("weights sum to {total}, not 1")));
        }
        if let Some(w) = weights.iter().find(|w| **w < 0.0 || !w.is_finite()) {
            return Err(SteerError::InvalidEnsemble(format!("invalid weight {w}")));
        }
        let m = states[0].coeffs().len();
        for (i, a) in states.iter().enumerate() {
            if a.coeffs().len() != m {
                return Err(SteerError::DimensionMismatch { expected: m, got: a.coeffs().len() });
            }
            for (j, b) in states.iter().enumerate() {
                let g = a.inner(b);
                let expect = if i == j { 1.0 } else { 0.0 };
                if (g - c64(expect, 0.0)).norm() > 1e-10 {
                    return Err(SteerError::InvalidEnsemble(format!(
                        "ensemble states not orthonormal at ({},{})",
                        i + 1,
                        j + 1
                    )));
                }
            }
        }
        let mut matrix = CMatrix::zeros(m, m);
        for (w, psi) in weights.iter().zip(states) {
            let c = psi.coeffs();
            for r in 0..m {
                for s in 0..m {
                    matrix[(r, s)] += c64(*w, 0.0) * c[r] * c[s].conj();
                }
            }
        }
        // symmetrize away accumulation noise
        let matrix = (&matrix + matrix.adjoint()) * c64(0.5, 0.0);
        Self::from_matrix(matrix)
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn modes(&self) -> usize {
        self.matrix.nrows()
    }

    /// Ensemble weights in descending order.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Eigenvectors aligned with [`Self::weights`], as columns.
    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    pub fn trace(&self) -> f64 {
        self.matrix.trace().re
    }

    /// True when exactly one weight is 1 (a pure state up to phase).
    pub fn is_pure(&self) -> bool {
        self.weights.first().map(|w| (w - 1.0).abs() < 1e-10).unwrap_or(false)
    }

    /// Ensemble form as JSON: `{weights, state_coefficients}` with each
    /// coefficient as an `[re, im]` pair.
    pub fn to_json(&self) -> serde_json::Value {
        let m = self.modes();
        let states: Vec<serde_json::Value> = (0..m)
            .map(|j| {
                let col = self.vectors.column(j);
                serde_json::Value::Array(
                    (0..m)
                        .map(|r| serde_json::json!([col[r].re, col[r].im]))
                        .collect(),
                )
            })
            .collect();
        serde_json::json!({
            "weights": self.weights,
            "state_coefficients": states,
        })
    }

    /// Raw Hermitian matrix as CSV rows `row,col,re,im`.
    pub fn matrix_csv(&self) -> String {
        let m = self.modes();
        let mut out = String::from("row,col,re,im\n");
        for r in 0..m {
            for c in 0..m {
                let z = self.matrix[(r, c)];
                out.push_str(&format!("{},{},{:.16e},{:.16e}\n", r + 1, c + 1, z.re, z.im));
            }
        }
        out
    }
}

/// Conjugate by a propagator: `ρ ↦ U ρ U*`. A trace drift up to 1e-9 (from
/// long propagator compositions) is renormalized away; larger drift means
/// `U` is not close to unitary and is an error.
pub fn evolve(rho: &DensityState, unitary: &CMatrix) -> Result<DensityState> {
    let m = rho.modes();
    if unitary.nrows() != m || unitary.ncols() != m {
        return Err(SteerError::DimensionMismatch { expected: m, got: unitary.nrows() });
    }
    let evolved = unitary * rho.matrix() * unitary.adjoint();
    let evolved = (&evolved + evolved.adjoint()) * c64(0.5, 0.0);
    let trace = evolved.trace().re;
    if (trace - 1.0).abs() > 1e-9 {
        return Err(SteerError::NotUnitary((trace - 1.0).abs()));
    }
    DensityState::from_matrix(evolved / c64(trace, 0.0))
}

/// Rank-`N` orthogonal projector onto the span of an orthonormal frame.
#[derive(Debug, Clone)]
pub struct Projector {
    n: usize,
    frame: CMatrix,
}

impl Projector {
    /// Build from an M×N matrix with orthonormal columns.
    pub fn new(frame: CMatrix) -> Result<Self> {
        let n = frame.ncols();
        let gram = frame.adjoint() * &frame;
        let defect = (gram - CMatrix::identity(n, n)).map(|z| z.norm()).max();
        if defect > 1e-12 {
            return Err(SteerError::InvalidEnsemble(format!(
                "projector frame is not orthonormal: defect {defect:.3e}"
            )));
        }
        Ok(Self { n, frame })
    }

    pub fn from_states(states: &[WaveFunction]) -> Result<Self> {
        if states.is_empty() {
            return Err(SteerError::InvalidEnsemble("projector needs at least one state".into()));
        }
        let m = states[0].coeffs().len();
        let mut frame = CMatrix::zeros(m, states.len());
        for (j, psi) in states.iter().enumerate() {
            frame.set_column(j, psi.coeffs());
        }
        Self::new(frame)
    }

    /// Projector onto the first `n` basis modes.
    pub fn leading_modes(m: usize, n: usize) -> Result<Self> {
        if n == 0 || n > m {
            return Err(SteerError::InvalidIndex(n));
        }
        let frame = CMatrix::from_fn(m, n, |r, c| {
            if r == c { c64(1.0, 0.0) } else { c64(0.0, 0.0) }
        });
        Self::new(frame)
    }

    pub fn rank(&self) -> usize {
        self.n
    }

    /// The full M×M projector matrix `π = F F*`; satisfies `π² = π = π*`.
    pub fn matrix(&self) -> CMatrix {
        &self.frame * self.frame.adjoint()
    }
}

/// Operator-norm defect `‖π ρ¹ π − π ρ² π‖` between two density matrices
/// after projection (ρ¹ typically being an evolved state).
pub fn projected_equality(
    rho1_evolved: &DensityState,
    rho2: &DensityState,
    projector: &Projector,
) -> Result<f64> {
    let m = rho1_evolved.modes();
    if rho2.modes() != m || projector.frame.nrows() != m {
        return Err(SteerError::DimensionMismatch { expected: m, got: rho2.modes() });
    }
    let p = projector.matrix();
    let diff = &p * (rho1_evolved.matrix() - rho2.matrix()) * &p;
    Ok(operator_norm(&diff))
}

pub(crate) fn operator_norm(a: &CMatrix) -> f64 {
    a.clone().svd(false, false).singular_values.iter().fold(0.0f64, |m, &s| m.max(s))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::build_x_squared;
    use crate::propagator::{propagate, ControlSignal};
    use crate::spectral::{lambda, BasisTruncation};
    use crate::CVector;
    use rand::{Rng, SeedableRng};

    fn basis_states(m: usize, ks: &[usize]) -> Vec<WaveFunction> {
        let basis = BasisTruncation::new(m).unwrap();
        ks.iter().map(|&k| basis.mode_state(k).unwrap()).collect()
    }

    #[test]
    fn rank_one_projector_from_pure_ensemble() {
        let states = basis_states(6, &[1]);
        let rho = DensityState::from_ensemble(&[1.0], &states).unwrap();
        assert!(rho.is_pure());
        assert!((rho.matrix()[(0, 0)] - c64(1.0, 0.0)).norm() < 1e-14);
        assert!((rho.trace() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn balanced_mixture_is_diagonal() {
        let states = basis_states(6, &[1, 2]);
        let rho = DensityState::from_ensemble(&[0.5, 0.5], &states).unwrap();
        assert!(!rho.is_pure());
        for r in 0..6 {
            for s in 0..6 {
                let expect = if r == s && r < 2 { 0.5 } else { 0.0 };
                assert!((rho.matrix()[(r, s)] - c64(expect, 0.0)).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn eigendecomposition_round_trip() {
        let m = 8;
        let basis = BasisTruncation::new(m).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        // random orthonormal family of three states
        let raw = CMatrix::from_fn(m, 3, |_, _| {
            c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let q = crate::spectral::gram_schmidt_columns(&raw, 1e-10).unwrap();
        let states: Vec<WaveFunction> = (0..3)
            .map(|j| WaveFunction::new(q.column(j).clone_owned(), basis).unwrap())
            .collect();
        let weights = [0.6, 0.3, 0.1];
        let rho = DensityState::from_ensemble(&weights, &states).unwrap();
        for (got, want) in rho.weights().iter().zip(weights) {
            assert!((got - want).abs() < 1e-12);
        }
        // recovered eigenvectors match up to phase (weights distinct)
        for j in 0..3 {
            let overlap = rho.vectors().column(j).dotc(states[j].coeffs()).norm();
            assert!((overlap - 1.0).abs() < 1e-10, "vector {j} overlap {overlap}");
        }
    }

    #[test]
    fn ensemble_validation() {
        let states = basis_states(6, &[1, 2]);
        assert!(DensityState::from_ensemble(&[0.7, 0.7], &states).is_err());
        assert!(DensityState::from_ensemble(&[1.5, -0.5], &states).is_err());
        let dup = basis_states(6, &[1, 1]);
        assert!(DensityState::from_ensemble(&[0.5, 0.5], &dup).is_err());
    }

    #[test]
    fn evolve_by_identity_and_rank_one_covariance() {
        let m = 10;
        let b = build_x_squared(BasisTruncation::new(m).unwrap());
        let states = basis_states(m, &[1]);
        let rho = DensityState::from_ensemble(&[1.0], &states).unwrap();

        let id = CMatrix::identity(m, m);
        let same = evolve(&rho, &id).unwrap();
        assert!((same.matrix() - rho.matrix()).map(|z| z.norm()).max() < 1e-14);

        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(8);
        let segments: Vec<_> = (0..6)
            .map(|_| crate::propagator::Segment {
                dt: 0.1 + 0.1 * rng.random::<f64>(),
                value: rng.random::<f64>() - 0.5,
            })
            .collect();
        let signal = ControlSignal::new(0.1, segments).unwrap();
        let result = propagate(&b, &signal, &states).unwrap();
        let evolved = evolve(&rho, &result.unitary).unwrap();
        // |Γφ₁⟩⟨Γφ₁| entrywise
        let u_psi = result.final_states[0].coeffs();
        for r in 0..m {
            for s in 0..m {
                let expect = u_psi[r] * u_psi[s].conj();
                assert!(
                    (evolved.matrix()[(r, s)] - expect).norm() < 1e-12,
                    "rank-one covariance at ({r},{s})"
                );
            }
        }
    }

    #[test]
    fn evolution_preserves_spectrum() {
        let m = 10;
        let b = build_x_squared(BasisTruncation::new(m).unwrap());
        let states = basis_states(m, &[1, 2, 3]);
        let rho = DensityState::from_ensemble(&[0.5, 0.3, 0.2], &states).unwrap();
        let signal = ControlSignal::sample(0.05, |s| (7.0 * s).sin(), 1.0, 256).unwrap();
        let result = propagate(&b, &signal, &[]).unwrap();
        let evolved = evolve(&rho, &result.unitary).unwrap();
        assert!((evolved.trace() - 1.0).abs() < 1e-10);
        for (a, bb) in evolved.weights().iter().zip(rho.weights()) {
            assert!((a - bb).abs() < 1e-10, "spectrum drift {a} vs {bb}");
        }
    }

    #[test]
    fn von_neumann_derivative_matches_commutator() {
        // d/dt (UρU*) at t = 0 equals −i[H, ρ] by central differences; a
        // generic (non-eigenmode) ensemble keeps the commutator at the
        // drift scale so the relative comparison is meaningful
        let m = 6;
        let b = build_x_squared(BasisTruncation::new(m).unwrap());
        let u_val = 0.2;
        let basis = BasisTruncation::new(m).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        // a random mix of the two lowest modes: non-commuting with H, with
        // the finite-difference truncation controlled by the small gap
        let raw = CMatrix::from_fn(m, 2, |r, _| {
            if r < 2 {
                c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
            } else {
                c64(0.0, 0.0)
            }
        });
        let q = crate::spectral::gram_schmidt_columns(&raw, 1e-10).unwrap();
        let states: Vec<WaveFunction> = (0..2)
            .map(|j| WaveFunction::new(q.column(j).clone_owned(), basis).unwrap())
            .collect();
        let rho = DensityState::from_ensemble(&[0.7, 0.3], &states).unwrap();
        let dt = 1e-4;
        let step = |tau: f64| -> CMatrix {
            let signal = ControlSignal::constant(u_val, tau).unwrap();
            propagate(&b, &signal, &[]).unwrap().unitary
        };
        let plus = evolve(&rho, &step(dt)).unwrap();
        let minus_u = step(dt).adjoint();
        let minus = evolve(&rho, &minus_u).unwrap();
        let derivative = (plus.matrix() - minus.matrix()) / c64(2.0 * dt, 0.0);

        let mut h = b.matrix() * c64(u_val, 0.0);
        for i in 0..m {
            h[(i, i)] += c64(lambda(i + 1), 0.0);
        }
        let commutator = (&h * rho.matrix() - rho.matrix() * &h) * c64(0.0, -1.0);
        // relative to the generator scale ‖H‖·‖ρ‖: the central-difference
        // truncation term carries two extra powers of the spectral gaps
        let scale = operator_norm(&h);
        let defect = operator_norm(&(derivative - commutator)) / scale;
        assert!(defect < 1e-6, "Von Neumann derivative defect {defect:.3e}");
    }

    #[test]
    fn projected_equality_discriminates() {
        let m = 8;
        let states = basis_states(m, &[1, 2]);
        let rho1 = DensityState::from_ensemble(&[0.5, 0.5], &states).unwrap();
        let proj = Projector::leading_modes(m, 3).unwrap();
        assert!(projected_equality(&rho1, &rho1, &proj).unwrap() < 1e-15);

        let other = basis_states(m, &[1, 3]);
        let rho2 = DensityState::from_ensemble(&[0.5, 0.5], &other).unwrap();
        let full = Projector::leading_modes(m, m).unwrap();
        assert!(projected_equality(&rho1, &rho2, &full).unwrap() > 0.4);
    }

    #[test]
    fn projector_is_idempotent_and_hermitian() {
        let m = 8;
        let basis = BasisTruncation::new(m).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let raw = CMatrix::from_fn(m, 2, |_, _| {
            c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let q = crate::spectral::gram_schmidt_columns(&raw, 1e-10).unwrap();
        let states: Vec<WaveFunction> = (0..2)
            .map(|j| WaveFunction::new(q.column(j).clone_owned(), basis).unwrap())
            .collect();
        let p = Projector::from_states(&states).unwrap().matrix();
        assert!((&p * &p - &p).map(|z| z.norm()).max() < 1e-12);
        assert!((&p - p.adjoint()).map(|z| z.norm()).max() < 1e-14);
    }

    #[test]
    fn psd_repair_and_rejection() {
        let m = 4;
        // tiny negative eigenvalue is repaired
        let mut mat = CMatrix::zeros(m, m);
        mat[(0, 0)] = c64(1.0 + 0.5e-12, 0.0);
        mat[(1, 1)] = c64(-0.5e-12, 0.0);
        let rho = DensityState::from_matrix(mat).unwrap();
        assert!(rho.weights().iter().all(|w| *w >= 0.0));
        // a genuinely indefinite matrix is rejected
        let mut bad = CMatrix::zeros(m, m);
        bad[(0, 0)] = c64(1.5, 0.0);
        bad[(1, 1)] = c64(-0.5, 0.0);
        assert!(DensityState::from_matrix(bad).is_err());
    }

    #[test]
    fn degenerate_weights_span_matches() {
        let m = 6;
        let states = basis_states(m, &[1, 2]);
        let rho = DensityState::from_ensemble(&[0.5, 0.5], &states).unwrap();
        // the recovered pair spans the same subspace as the inputs
        let frame = CMatrix::from_fn(m, 2, |r, c| rho.vectors()[(r, c)]);
        let p_rec = &frame * frame.adjoint();
        let mut p_exp = CMatrix::zeros(m, m);
        p_exp[(0, 0)] = c64(1.0, 0.0);
        p_exp[(1, 1)] = c64(1.0, 0.0);
        assert!((p_rec - p_exp).map(|z| z.norm()).max() < 1e-10);
    }

    #[test]
    fn ensemble_matches_projector_times_weights() {
        let m = 6;
        let states = basis_states(m, &[1, 2]);
        let rho = DensityState::from_ensemble(&[0.25, 0.75], &states).unwrap();
        let mut expected = CMatrix::zeros(m, m);
        expected[(0, 0)] = c64(0.25, 0.0);
        expected[(1, 1)] = c64(0.75, 0.0);
        assert!((rho.matrix() - expected).map(|z| z.norm()).max() < 1e-14);
        let _ = CVector::zeros(m);
    }
}
