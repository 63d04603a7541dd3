//! Truncated Hilbert space: the sine eigenbasis of the Dirichlet Laplacian
//! on (0,1), weighted Sobolev norms and Gram-Schmidt orthonormalization.
//!
//! Mode indices are 1-based: mode `k` has eigenvalue `k²π²` and eigenfunction
//! `√2·sin(kπx)`. Coefficient vectors are 0-based, entry `k-1` holding
//! `⟨φ_k, ψ⟩`.

use std::f64::consts::PI;

use crate::error::{Result, SteerError};
use crate::{c64, C64, CMatrix, CVector};

/// The finite sine eigenbasis `{φ_k}_{k ≤ M}` on the fixed interval (0,1).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct BasisTruncation {
    m: usize,
}

impl BasisTruncation {
    /// Retain the first `m` modes. Requires `m ≥ 2`.
    pub fn new(m: usize) -> Result<Self> {
        if m < 2 {
            return Err(SteerError::InvalidScenario(format!(
                "truncation M = {m} too small: need M >= 2"
            )));
        }
        Ok(Self { m })
    }

    pub fn modes(&self) -> usize {
        self.m
    }

    /// Eigenvalue of the k-th Dirichlet mode, `λ_k = k²π²`.
    pub fn eigenvalue(&self, k: usize) -> Result<f64> {
        eigenvalue(k)
    }

    /// All retained eigenvalues `λ_1..λ_M`.
    pub fn eigenvalues(&self) -> Vec<f64> {
        (1..=self.m).map(lambda).collect()
    }

    /// The basis state `φ_k` as a coefficient vector.
    pub fn mode_state(&self, k: usize) -> Result<WaveFunction> {
        if k == 0 || k > self.m {
            return Err(SteerError::InvalidIndex(k));
        }
        let mut coeffs = CVector::zeros(self.m);
        coeffs[k - 1] = c64(1.0, 0.0);
        Ok(WaveFunction { coeffs, basis: *self })
    }
}

/// `λ_k = k²π²`; rejects `k = 0` (mode indices start at 1).
pub fn eigenvalue(k: usize) -> Result<f64> {
    if k == 0 {
        return Err(SteerError::InvalidIndex(0));
    }
    Ok(lambda(k))
}

/// Unchecked `k²π²` for internal use where `k ≥ 1` is structural.
pub(crate) fn lambda(k: usize) -> f64 {
    let kpi = k as f64 * PI;
    kpi * kpi
}

/// Normalized eigenfunction sample `φ_k(x) = √2·sin(kπx)`.
pub fn basis_sample(k: usize, x: f64) -> Result<f64> {
    if k == 0 {
        return Err(SteerError::InvalidIndex(0));
    }
    if !(0.0..=1.0).contains(&x) {
        return Err(SteerError::OutsideDomain(x));
    }
    Ok(std::f64::consts::SQRT_2 * (k as f64 * PI * x).sin())
}

/// Nonnegative Sobolev exponent for the weighted norm `‖·‖_(s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SobolevWeight(f64);

impl SobolevWeight {
    pub fn new(s: f64) -> Result<Self> {
        if !s.is_finite() || s < 0.0 {
            return Err(SteerError::InvalidExponent(s));
        }
        Ok(Self(s))
    }

    pub fn exponent(&self) -> f64 {
        self.0
    }
}

/// A state in the truncated basis, `ψ = Σ_{k≤M} c_k φ_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveFunction {
    coeffs: CVector,
    basis: BasisTruncation,
}

impl WaveFunction {
    pub fn new(coeffs: CVector, basis: BasisTruncation) -> Result<Self> {
        if coeffs.len() != basis.modes() {
            return Err(SteerError::DimensionMismatch {
                expected: basis.modes(),
                got: coeffs.len(),
            });
        }
        Ok(Self { coeffs, basis })
    }

    pub fn coeffs(&self) -> &CVector {
        &self.coeffs
    }

    pub fn basis(&self) -> BasisTruncation {
        self.basis
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.norm()
    }

    /// `⟨self, other⟩`, conjugate-linear in `self`.
    pub fn inner(&self, other: &WaveFunction) -> C64 {
        self.coeffs.dotc(&other.coeffs)
    }

    /// Weighted norm `(Σ |k^s c_k|²)^{1/2}`; `s = 0` is the plain ℓ² norm.
    pub fn sobolev_norm(&self, weight: SobolevWeight) -> f64 {
        sobolev_norm_of(&self.coeffs, weight.exponent())
    }
}

pub(crate) fn sobolev_norm_of(coeffs: &CVector, s: f64) -> f64 {
    coeffs
        .iter()
        .enumerate()
        .map(|(i, c)| {
            let w = ((i + 1) as f64).powf(s);
            (w * w) * c.norm_sqr()
        })
        .sum::<f64>()
        .sqrt()
}

/// Relative rank tolerance used by [`gram_schmidt`] when none is given.
pub const GRAM_SCHMIDT_TOL: f64 = 1e-10;

/// Orthonormalize the columns of `family` in place of span order.
///
/// The j-th output lies in the span of the first j inputs. Columns are
/// phase-fixed so their first nonzero coefficient is real positive. Rank
/// deficiency relative to the largest singular value is an error naming the
/// offending column.
pub fn gram_schmidt_columns(family: &CMatrix, tol_rel: f64) -> Result<CMatrix> {
    let (rows, cols) = family.shape();
    if cols == 0 {
        return Ok(family.clone());
    }
    let sigma_max = family.clone().svd(false, false).singular_values[0];
    let floor = tol_rel * sigma_max.max(f64::MIN_POSITIVE);
    let mut q = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        let mut v = family.column(j).clone_owned();
        // Two projection passes keep the output Gram matrix at identity
        // even for nearly dependent inputs.
        for _ in 0..2 {
            for i in 0..j {
                let qi = q.column(i);
                let proj = qi.dotc(&v);
                v -= qi.clone_owned() * proj;
            }
        }
        let norm = v.norm();
        if norm <= floor {
            return Err(SteerError::DegenerateFamily { index: j, residual: norm });
        }
        v /= c64(norm, 0.0);
        fix_column_phase(&mut v);
        q.set_column(j, &v);
    }
    Ok(q)
}

/// Phase convention: rotate so the first nonzero entry is real positive.
pub(crate) fn fix_column_phase(v: &mut CVector) {
    if let Some(lead) = v.iter().find(|c| c.norm() > 1e-12) {
        let phase = lead.conj() / c64(lead.norm(), 0.0);
        *v *= phase;
    }
}

/// Orthonormalize a family of wave functions (default tolerance).
pub fn gram_schmidt(family: &[WaveFunction]) -> Result<Vec<WaveFunction>> {
    let Some(first) = family.first() else {
        return Ok(Vec::new());
    };
    let basis = first.basis();
    let m = basis.modes();
    for (i, psi) in family.iter().enumerate() {
        if psi.coeffs().len() != m {
            return Err(SteerError::DimensionMismatch { expected: m, got: family[i].coeffs().len() });
        }
    }
    let mut mat = CMatrix::zeros(m, family.len());
    for (j, psi) in family.iter().enumerate() {
        mat.set_column(j, psi.coeffs());
    }
    let q = gram_schmidt_columns(&mat, GRAM_SCHMIDT_TOL)?;
    Ok((0..family.len())
        .map(|j| WaveFunction { coeffs: q.column(j).clone_owned(), basis })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;

    fn random_state(m: usize, rng: &mut impl Rng) -> CVector {
        CVector::from_fn(m, |_, _| c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
    }

    #[test]
    fn eigenvalues_match_closed_form() {
        assert_relative_eq!(eigenvalue(1).unwrap(), PI * PI, max_relative = 1e-15);
        assert_relative_eq!(eigenvalue(3).unwrap(), 9.0 * PI * PI, max_relative = 1e-15);
        assert!((eigenvalue(1).unwrap() - 9.8696).abs() < 1e-4);
        assert!(matches!(eigenvalue(0), Err(SteerError::InvalidIndex(0))));
    }

    #[test]
    fn resonance_gap_identity() {
        // λ7 − λ1 = λ8 − λ4 = 48π², the degenerate transition pair.
        let d1 = eigenvalue(7).unwrap() - eigenvalue(1).unwrap();
        let d2 = eigenvalue(8).unwrap() - eigenvalue(4).unwrap();
        assert_eq!(d1, d2);
        assert_relative_eq!(d1, 48.0 * PI * PI, max_relative = 1e-15);
    }

    #[test]
    fn eigenvalue_gaps_increase() {
        let mut prev_gap = 0.0;
        for k in 1..64 {
            let gap = lambda(k + 1) - lambda(k);
            assert_relative_eq!(gap, (2 * k + 1) as f64 * PI * PI, max_relative = 1e-12);
            assert!(gap > prev_gap);
            prev_gap = gap;
        }
    }

    #[test]
    fn basis_sample_values() {
        assert_eq!(basis_sample(1, 0.0).unwrap(), 0.0);
        assert_relative_eq!(basis_sample(1, 0.5).unwrap(), std::f64::consts::SQRT_2, max_relative = 1e-15);
        assert!(basis_sample(2, 0.5).unwrap().abs() < 1e-15);
        assert!(basis_sample(1, -0.1).is_err());
        assert!(basis_sample(1, 1.1).is_err());
    }

    #[test]
    fn sobolev_norm_examples() {
        let basis = BasisTruncation::new(8).unwrap();
        let s3 = SobolevWeight::new(3.0).unwrap();
        let s0 = SobolevWeight::new(0.0).unwrap();

        let psi = basis.mode_state(1).unwrap();
        assert_relative_eq!(psi.sobolev_norm(s3), 1.0, max_relative = 1e-15);

        let psi = basis.mode_state(2).unwrap();
        assert_relative_eq!(psi.sobolev_norm(s3), 8.0, max_relative = 1e-15);

        let mut c = CVector::zeros(8);
        let w = 1.0 / 2.0_f64.sqrt();
        c[0] = c64(w, 0.0);
        c[1] = c64(w, 0.0);
        let psi = WaveFunction::new(c, basis).unwrap();
        assert_relative_eq!(psi.sobolev_norm(s0), 1.0, max_relative = 1e-14);
    }

    #[test]
    fn sobolev_weight_rejects_negative() {
        assert!(SobolevWeight::new(-1.0).is_err());
        assert!(SobolevWeight::new(f64::NAN).is_err());
    }

    #[test]
    fn gram_schmidt_keeps_orthonormal_family() {
        let basis = BasisTruncation::new(6).unwrap();
        let family = vec![basis.mode_state(1).unwrap(), basis.mode_state(3).unwrap()];
        let out = gram_schmidt(&family).unwrap();
        for (a, b) in family.iter().zip(&out) {
            assert!((a.inner(b).re - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn gram_schmidt_eliminates_overlap() {
        let basis = BasisTruncation::new(6).unwrap();
        let phi1 = basis.mode_state(1).unwrap();
        let mut c = CVector::zeros(6);
        c[0] = c64(1.0, 0.0);
        c[1] = c64(1.0, 0.0);
        let mixed = WaveFunction::new(c, basis).unwrap();
        let out = gram_schmidt(&[phi1, mixed]).unwrap();
        let phi2 = basis.mode_state(2).unwrap();
        assert!((out[0].inner(&basis.mode_state(1).unwrap()).re - 1.0).abs() < 1e-14);
        assert!((out[1].inner(&phi2).re - 1.0).abs() < 1e-14);
    }

    #[test]
    fn gram_schmidt_random_family_is_orthonormal() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let basis = BasisTruncation::new(12).unwrap();
        let family: Vec<_> = (0..3)
            .map(|_| WaveFunction::new(random_state(12, &mut rng), basis).unwrap())
            .collect();
        let out = gram_schmidt(&family).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let g = out[i].inner(&out[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((g - c64(expect, 0.0)).norm() < 1e-12, "gram defect at ({i},{j}): {g}");
            }
        }
        // span preservation: the j-th output stays in the span of inputs 0..=j
        let g01 = out[0].inner(&family[0]);
        assert!(g01.norm() > 0.0);
    }

    #[test]
    fn gram_schmidt_flags_dependent_family() {
        let basis = BasisTruncation::new(4).unwrap();
        let phi1 = basis.mode_state(1).unwrap();
        let copy = phi1.clone();
        let err = gram_schmidt(&[phi1, copy]).unwrap_err();
        match err {
            SteerError::DegenerateFamily { index, .. } => assert_eq!(index, 1),
            other => panic!("unexpected error {other}"),
        }
    }

    proptest! {
        #[test]
        fn sobolev_norm_monotone_in_exponent(seed in 0u64..500, s1 in 0.0f64..4.0, s2 in 0.0f64..4.0) {
            let (lo, hi) = if s1 <= s2 { (s1, s2) } else { (s2, s1) };
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let basis = BasisTruncation::new(10).unwrap();
            let psi = WaveFunction::new(random_state(10, &mut rng), basis).unwrap();
            let nlo = psi.sobolev_norm(SobolevWeight::new(lo).unwrap());
            let nhi = psi.sobolev_norm(SobolevWeight::new(hi).unwrap());
            prop_assert!(nlo <= nhi * (1.0 + 1e-12));
        }

        #[test]
        fn sobolev_zero_equals_euclidean(seed in 0u64..500) {
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let basis = BasisTruncation::new(10).unwrap();
            let psi = WaveFunction::new(random_state(10, &mut rng), basis).unwrap();
            let s0 = psi.sobolev_norm(SobolevWeight::new(0.0).unwrap());
            prop_assert!((s0 - psi.norm()).abs() <= 1e-14 * psi.norm().max(1.0));
        }
    }
}
