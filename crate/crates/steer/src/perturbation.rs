//! Spectrum of `A + u0·B` at fixed truncation: eigenbranch tracking in `u0`,
//! the `a_j`/`η_j` decomposition of perturbed eigenfunctions, and the gap,
//! resolvent and coupling-persistence certificates that justify using the
//! perturbed frame for control synthesis.

use serde::Serialize;

use crate::error::{Result, SteerError};
use crate::operators::{ControlOperator, CouplingCertificate, CouplingWitness, COUPLING_THRESHOLD};
use crate::spectral::{lambda, sobolev_norm_of, BasisTruncation};
use crate::{c64, CMatrix, CVector};

/// Eigenpairs of `A + u0·B`, branch-matched to the unperturbed modes.
#[derive(Debug, Clone)]
pub struct PerturbedSpectrum {
    u0: f64,
    basis: BasisTruncation,
    /// `λ_j^{u0}`, entry j-1 belonging to the branch through mode j.
    eigenvalues: Vec<f64>,
    /// Unitary matrix whose column j-1 is `φ_j^{u0}` in the φ-basis.
    eigenvectors: CMatrix,
    /// Overlaps `a_j = ⟨φ_j, φ_j^{u0}⟩`, real positive by convention.
    a: Vec<f64>,
    /// Norms of the orthogonal remainders `η_j = φ_j^{u0} − a_j φ_j`.
    eta_norms: Vec<f64>,
}

impl PerturbedSpectrum {
    pub fn u0(&self) -> f64 {
        self.u0
    }

    pub fn basis(&self) -> BasisTruncation {
        self.basis
    }

    pub fn modes(&self) -> usize {
        self.basis.modes()
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn eigenvalue(&self, j: usize) -> f64 {
        self.eigenvalues[j - 1]
    }

    /// Columns are `φ_j^{u0}` expressed in the φ-basis.
    pub fn eigenvectors(&self) -> &CMatrix {
        &self.eigenvectors
    }

    pub fn overlaps(&self) -> &[f64] {
        &self.a
    }

    pub fn eta_norms(&self) -> &[f64] {
        &self.eta_norms
    }

    /// Coefficients of a φ-basis state in the perturbed frame.
    pub fn to_frame(&self, coeffs: &CVector) -> CVector {
        self.eigenvectors.adjoint() * coeffs
    }

    /// Back from frame coefficients to the φ-basis.
    pub fn from_frame(&self, coeffs: &CVector) -> CVector {
        &self.eigenvectors * coeffs
    }

    /// Coupling matrix in the perturbed frame, `B^{u0}_{k,j} = ⟨φ_k^{u0}, B φ_j^{u0}⟩`.
    pub fn coupling_in_frame(&self, b: &ControlOperator) -> CMatrix {
        self.eigenvectors.adjoint() * b.matrix() * &self.eigenvectors
    }

    /// Weighted norm `(Σ |λ_j^{u0}|³ |⟨φ_j^{u0}, ψ⟩|²)^{1/2}` of a φ-basis state.
    pub fn perturbed_h3_norm(&self, coeffs: &CVector) -> f64 {
        let d = self.to_frame(coeffs);
        d.iter()
            .zip(&self.eigenvalues)
            .map(|(c, lam)| lam.abs().powi(3) * c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn unitarity_defect(&self) -> f64 {
        let m = self.modes();
        (self.eigenvectors.adjoint() * &self.eigenvectors - CMatrix::identity(m, m))
            .map(|z| z.norm())
            .max()
    }
}

/// Safety margin from the resolvent bound: `|u0|·‖B‖` must stay below half
/// the smallest unperturbed gap `3π²`.
pub fn admissible_amplitude(b: &ControlOperator) -> f64 {
    let delta = lambda(2) - lambda(1);
    0.5 * delta / b.operator_norm()
}

/// Diagonalize `diag(λ) + u0·B` and match eigenpairs to unperturbed modes by
/// maximal overlap. Fails when the overlap assignment is not a permutation.
pub fn perturbed_spectrum(b: &ControlOperator, u0: f64) -> Result<PerturbedSpectrum> {
    let m = b.modes();
    let basis = BasisTruncation::new(m)?;
    let norm_b = b.operator_norm();
    let product = u0.abs() * norm_b;
    let delta = lambda(2) - lambda(1);
    if product >= 0.5 * delta {
        return Err(SteerError::PerturbationTooLarge { u0, product });
    }

    let mut h = b.matrix() * c64(u0, 0.0);
    for i in 0..m {
        h[(i, i)] += c64(lambda(i + 1), 0.0);
    }
    let es = h.symmetric_eigen();

    // dominance assignment: eigencolumn -> mode index
    let mut claimed: Vec<Option<usize>> = vec![None; m];
    for col in 0..m {
        let v = es.eigenvectors.column(col);
        let mut best = 0usize;
        let mut best_val = -1.0;
        for row in 0..m {
            let a = v[row].norm();
            if a > best_val {
                best_val = a;
                best = row;
            }
        }
        if let Some(other) = claimed[best] {
            return Err(SteerError::BranchTrackingAmbiguous {
                u0,
                first: other + 1,
                second: col + 1,
                mode: best + 1,
            });
        }
        claimed[best] = Some(col);
    }

    let mut eigenvalues = vec![0.0; m];
    let mut eigenvectors = CMatrix::zeros(m, m);
    let mut a = vec![0.0; m];
    let mut eta_norms = vec![0.0; m];
    for mode in 0..m {
        let col = claimed[mode].expect("assignment is a permutation");
        eigenvalues[mode] = es.eigenvalues[col];
        let mut v = es.eigenvectors.column(col).clone_owned();
        let lead = v[mode];
        let phase = lead.conj() / c64(lead.norm(), 0.0);
        v *= phase;
        a[mode] = v[mode].re;
        eta_norms[mode] = (1.0 - a[mode] * a[mode]).max(0.0).sqrt();
        eigenvectors.set_column(mode, &v);
    }

    Ok(PerturbedSpectrum { u0, basis, eigenvalues, eigenvectors, a, eta_norms })
}

/// Residuals of the eigenfunction decomposition identities, per mode.
#[derive(Debug, Clone, Serialize)]
pub struct DecompositionResidual {
    pub mode: usize,
    /// Defect of the scalar eigenvalue identity relating `λ_j^{u0}`, `a_j`,
    /// `B_{j,j}` and the remainder `η_j`.
    pub scalar: f64,
    /// Norm defect of `η_j` against the restricted-resolvent linear solve.
    pub vector: f64,
}

/// Evaluate both sides of the perturbation identities for every mode.
pub fn decomposition_residual(
    spec: &PerturbedSpectrum,
    b: &ControlOperator,
) -> Result<Vec<DecompositionResidual>> {
    let m = spec.modes();
    if b.modes() != m {
        return Err(SteerError::DimensionMismatch { expected: m, got: b.modes() });
    }
    let u0 = spec.u0();
    let mut out = Vec::with_capacity(m);
    for j in 1..=m {
        let aj = spec.overlaps()[j - 1];
        let lam_u = spec.eigenvalue(j);
        let lam = lambda(j);
        let col = spec.eigenvectors().column(j - 1);

        // η_j in the φ-basis: the eigenvector minus its φ_j component
        let mut eta = col.clone_owned();
        eta[j - 1] = c64(0.0, 0.0);
        let eta_sq = eta.norm_squared();

        // ⟨P⊥ B φ_j, η_j⟩
        let mut bphi = b.matrix().column(j - 1).clone_owned();
        bphi[j - 1] = c64(0.0, 0.0);
        let cross = bphi.dotc(&eta);

        let bjj = b.entry(j, j).re;
        let rhs = aj * aj * lam + u0 * aj * aj * bjj + lam_u * eta_sq + u0 * aj * cross.re;
        let scalar = (lam_u - rhs).abs();

        // restricted linear solve for η_j:
        // (A + u0 P⊥ B P⊥ − λ_j^{u0}) η = −a_j u0 P⊥ B φ_j
        let mut sys = CMatrix::zeros(m - 1, m - 1);
        let mut rhs_vec = CVector::zeros(m - 1);
        let rows: Vec<usize> = (0..m).filter(|&r| r != j - 1).collect();
        for (ri, &r) in rows.iter().enumerate() {
            for (ci, &c) in rows.iter().enumerate() {
                let mut v = b.matrix()[(r, c)] * c64(u0, 0.0);
                if r == c {
                    v += c64(lambda(r + 1) - lam_u, 0.0);
                }
                sys[(ri, ci)] = v;
            }
            rhs_vec[ri] = b.matrix()[(r, j - 1)] * c64(-aj * u0, 0.0);
        }
        let solved = sys
            .lu()
            .solve(&rhs_vec)
            .ok_or(SteerError::GapCollapse { u0, gap_index: j })?;
        let mut vector = 0.0f64;
        for (ri, &r) in rows.iter().enumerate() {
            vector = vector.max((solved[ri] - eta[r]).norm());
        }
        out.push(DecompositionResidual { mode: j, scalar, vector });
    }
    Ok(out)
}

/// Resolvent norms of `A + u0·B` at the unperturbed gap midpoints.
#[derive(Debug, Clone, Serialize)]
pub struct ResolventReport {
    pub u0: f64,
    pub m: usize,
    pub midpoints: Vec<f64>,
    pub inverse_norms: Vec<f64>,
    pub max_inverse_norm: f64,
}

/// Compute `‖(A + u0·B − μ_j)⁻¹‖` for each midpoint `μ_j = (λ_j + λ_{j+1})/2`.
///
/// A gap collapse (some eigenvalue pushed across a midpoint, or a numerically
/// singular shift) is an error: `u0` lies outside the admissible neighborhood.
pub fn resolvent_margin(b: &ControlOperator, u0: f64) -> Result<ResolventReport> {
    let m = b.modes();
    let mut h = b.matrix() * c64(u0, 0.0);
    for i in 0..m {
        h[(i, i)] += c64(lambda(i + 1), 0.0);
    }
    let eigs = h.clone().symmetric_eigen().eigenvalues;
    let mut sorted: Vec<f64> = eigs.iter().copied().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());

    let mut midpoints = Vec::with_capacity(m - 1);
    let mut inverse_norms = Vec::with_capacity(m - 1);
    let mut max_inv: f64 = 0.0;
    for j in 1..m {
        let mu = 0.5 * (lambda(j) + lambda(j + 1));
        // μ_j must still separate the spectrum the way it separates diag(λ)
        let below = sorted.iter().filter(|&&e| e < mu).count();
        if below != j {
            return Err(SteerError::GapCollapse { u0, gap_index: j });
        }
        let dist = sorted.iter().fold(f64::INFINITY, |acc, &e| acc.min((e - mu).abs()));
        if dist <= 1e-12 * mu.abs().max(1.0) {
            return Err(SteerError::GapCollapse { u0, gap_index: j });
        }
        let inv = 1.0 / dist;
        midpoints.push(mu);
        inverse_norms.push(inv);
        max_inv = max_inv.max(inv);
    }
    Ok(ResolventReport { u0, m, midpoints, inverse_norms, max_inverse_norm: max_inv })
}

/// Certificate that all transition-frequency combinations stay separated.
#[derive(Debug, Clone, Serialize)]
pub struct GapCertificate {
    pub assumption: String,
    pub u0: f64,
    pub n: usize,
    pub m: usize,
    pub epsilon: f64,
    pub ok: bool,
    pub min_combination: f64,
    /// `(j, k, n, m)` achieving the minimal `|λ_j − λ_k − λ_n + λ_m|`.
    pub argmin: (usize, usize, usize, usize),
    /// Weaker check: transition frequencies pairwise distinct at all.
    pub frequencies_distinct: bool,
}

/// Scan all distinct pairs `(j,k) ≠ (n,m)` in `I^N` (with `j, n ≤ M`) for the
/// minimal gap combination `|λ_j^{u0} − λ_k^{u0} − λ_n^{u0} + λ_m^{u0}|`.
pub fn gap_certificate(spec: &PerturbedSpectrum, n: usize, epsilon: f64) -> Result<GapCertificate> {
    let m = spec.modes();
    if n > m || n == 0 {
        return Err(SteerError::InvalidIndex(n));
    }
    let lam = spec.eigenvalues();
    let mut min_comb = f64::INFINITY;
    let mut argmin = (0, 0, 0, 0);
    for k in 1..=n {
        for j in 1..=m {
            if j == k {
                continue;
            }
            let wjk = lam[j - 1] - lam[k - 1];
            for mm in 1..=n {
                for l in 1..=m {
                    if l == mm || (l, mm) == (j, k) {
                        continue;
                    }
                    let comb = (wjk - (lam[l - 1] - lam[mm - 1])).abs();
                    if comb < min_comb {
                        min_comb = comb;
                        argmin = (j, k, l, mm);
                    }
                }
            }
        }
    }
    Ok(GapCertificate {
        assumption: "gap-combinations".into(),
        u0: spec.u0(),
        n,
        m,
        epsilon,
        ok: min_comb > epsilon,
        min_combination: min_comb,
        argmin,
        frequencies_distinct: min_comb > 1e-12,
    })
}

/// First-order slope of a gap combination in `u0` by central differences,
/// for comparison against `B_{jj} − B_{kk} − B_{nn} + B_{mm}`.
pub fn gap_combination_slope(
    b: &ControlOperator,
    quadruple: (usize, usize, usize, usize),
    h: f64,
) -> Result<f64> {
    let comb = |u: f64| -> Result<f64> {
        let s = perturbed_spectrum(b, u)?;
        let (j, k, n, m) = quadruple;
        Ok(s.eigenvalue(j) - s.eigenvalue(k) - s.eigenvalue(n) + s.eigenvalue(m))
    };
    Ok((comb(h)? - comb(-h)?) / (2.0 * h))
}

/// Empirical two-sided equivalence constants between the perturbed weighted
/// norm and `‖·‖_(3)`, sampled over random smooth states.
#[derive(Debug, Clone, Serialize)]
pub struct NormEquivalence {
    pub u0: f64,
    pub trials: usize,
    pub c_low: f64,
    pub c_high: f64,
}

pub fn norm_equivalence(
    spec: &PerturbedSpectrum,
    trials: usize,
    rng: &mut impl rand::Rng,
) -> Result<NormEquivalence> {
    if trials == 0 {
        return Err(SteerError::InvalidScenario("norm_equivalence needs trials >= 1".into()));
    }
    let m = spec.modes();
    let mut c_low = f64::INFINITY;
    let mut c_high: f64 = 0.0;
    for _ in 0..trials {
        let coeffs = CVector::from_fn(m, |i, _| {
            let decay = ((i + 1) as f64).powf(-3.5);
            c64(
                (rng.random::<f64>() - 0.5) * decay,
                (rng.random::<f64>() - 0.5) * decay,
            )
        });
        let h3 = sobolev_norm_of(&coeffs, 3.0);
        if h3 == 0.0 {
            continue;
        }
        let ratio = spec.perturbed_h3_norm(&coeffs) / h3;
        c_low = c_low.min(ratio);
        c_high = c_high.max(ratio);
    }
    if !(c_low.is_finite() && c_high.is_finite() && c_low > 0.0) {
        return Err(SteerError::InvalidScenario("norm equivalence sampling degenerated".into()));
    }
    Ok(NormEquivalence { u0: spec.u0(), trials, c_low, c_high })
}

/// Persistence of the coupling lower bound in the perturbed frame:
/// `C̃_N = min k³ |⟨φ_k^{u0}, B φ_j^{u0}⟩|` over `j ≤ N`, `k ≤ M`.
pub fn coupling_persistence(
    spec: &PerturbedSpectrum,
    b: &ControlOperator,
    n: usize,
) -> Result<CouplingCertificate> {
    let m = spec.modes();
    if b.modes() != m {
        return Err(SteerError::DimensionMismatch { expected: m, got: b.modes() });
    }
    if n > m || n == 0 {
        return Err(SteerError::InvalidIndex(n));
    }
    let bu = spec.coupling_in_frame(b);
    let mut c_n = f64::INFINITY;
    let mut argmin = (1, 1);
    let mut violations = Vec::new();
    for j in 1..=n {
        for k in 1..=m {
            let v = (k as f64).powi(3) * bu[(k - 1, j - 1)].norm();
            if v < c_n {
                c_n = v;
                argmin = (k, j);
            }
            if v <= COUPLING_THRESHOLD {
                violations.push(CouplingWitness { k, j, value: v });
            }
        }
    }
    let ok = c_n > COUPLING_THRESHOLD;
    let mut witness_values = vec![CouplingWitness { k: argmin.0, j: argmin.1, value: c_n }];
    witness_values.extend(violations.into_iter().take(32));
    Ok(CouplingCertificate {
        assumption: "coupling-persistence".into(),
        n,
        m,
        ok,
        c_n,
        threshold: COUPLING_THRESHOLD,
        witness_values,
    })
}

/// Outcome of the admissible-amplitude grid scan.
#[derive(Debug, Clone, Serialize)]
pub struct U0Scan {
    pub u_max: f64,
    pub grid: usize,
    pub epsilon: f64,
    pub n: usize,
    /// Largest grid amplitude passing every certificate, if any.
    pub selected: Option<f64>,
    pub tried: Vec<(f64, bool)>,
}

/// Grid scan over `(0, u_max]`: returns the largest `u0` whose perturbed
/// spectrum passes branch tracking, the gap certificate at `epsilon`,
/// coupling persistence and the resolvent-margin check.
pub fn admissible_u0_scan(
    b: &ControlOperator,
    n: usize,
    u_max: f64,
    grid: usize,
    epsilon: f64,
) -> Result<U0Scan> {
    if grid == 0 || u_max <= 0.0 {
        return Err(SteerError::InvalidScenario("u0 scan needs grid >= 1 and u_max > 0".into()));
    }
    let mut tried = Vec::with_capacity(grid);
    let mut selected = None;
    for i in 1..=grid {
        let u0 = u_max * i as f64 / grid as f64;
        let ok = (|| -> Result<bool> {
            let spec = perturbed_spectrum(b, u0)?;
            let gap = gap_certificate(&spec, n, epsilon)?;
            let coupling = coupling_persistence(&spec, b, n)?;
            resolvent_margin(b, u0)?;
            Ok(gap.ok && coupling.ok)
        })()
        .unwrap_or(false);
        if ok {
            selected = Some(u0);
        }
        tried.push((u0, ok));
    }
    Ok(U0Scan { u_max, grid, epsilon, n, selected, tried })
}

/// One row of an eigenbranch sweep: `(u0, mode, λ_j^{u0}, a_j, ‖η_j‖)`.
#[derive(Debug, Clone, Serialize)]
pub struct SweepRow {
    pub u0: f64,
    pub mode: usize,
    pub eigenvalue: f64,
    pub a: f64,
    pub eta_norm: f64,
}

/// Sample eigenbranches over a `u0` grid for CSV export.
pub fn eigenbranch_sweep(b: &ControlOperator, u0_values: &[f64]) -> Result<Vec<SweepRow>> {
    let mut rows = Vec::new();
    for &u0 in u0_values {
        let spec = perturbed_spectrum(b, u0)?;
        for j in 1..=spec.modes() {
            rows.push(SweepRow {
                u0,
                mode: j,
                eigenvalue: spec.eigenvalue(j),
                a: spec.overlaps()[j - 1],
                eta_norm: spec.eta_norms()[j - 1],
            });
        }
    }
    Ok(rows)
}
