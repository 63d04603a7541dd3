//! Trigonometric moment problems: given frequencies `{ω_a}` and complex
//! targets `{x_a}`, synthesize a real piecewise-constant control `u` on
//! `[0, T]` with `∫₀^T u(s) e^{−iω_a s} ds = x_a` for every constraint.
//!
//! The solve happens in two stages. A minimum-norm interpolant in the span
//! of the complex exponentials (conjugate-symmetrized so the interpolant is
//! real) is found from the continuous Gram system and sampled onto the
//! propagation grid; an exact linear correction in the piecewise-constant
//! space then restores the moments of the *emitted* signal to the targets,
//! using exact per-segment antiderivatives rather than quadrature.

use std::collections::HashMap;

use serde::Serialize;

use crate::error::{Result, SteerError};
use crate::perturbation::PerturbedSpectrum;
use crate::propagator::ControlSignal;
use crate::{c64, C64, CMatrix, CVector};

/// Relative collision tolerance: frequencies closer than this times the
/// largest magnitude are treated as resonant.
pub const COLLISION_TOL_REL: f64 = 1e-9;
/// Gram condition numbers beyond this are rejected as ill-posed.
pub const GRAM_COND_LIMIT: f64 = 1e10;
/// Default number of sampling segments for synthesized controls.
pub const DEFAULT_SEGMENTS: usize = 2048;

/// One moment constraint `∫₀^T u(s) e^{−iω s} ds = x`, labeled by the index
/// pair `(j, k)` it came from (label `(a, 0)` for free-standing systems).
#[derive(Debug, Clone, Copy, Serialize)]
pub struct MomentConstraint {
    pub j: usize,
    pub k: usize,
    pub frequency: f64,
    #[serde(with = "complex_serde")]
    pub target: C64,
}

mod complex_serde {
    use super::C64;
    use serde::ser::SerializeStruct;

    pub fn serialize<S: serde::Serializer>(z: &C64, s: S) -> std::result::Result<S::Ok, S::Error> {
        let mut st = s.serialize_struct("Complex", 2)?;
        st.serialize_field("re", &z.re)?;
        st.serialize_field("im", &z.im)?;
        st.end()
    }
}

/// A validated family of moment constraints over the horizon `[0, T]`.
///
/// Mirror pairs (two constraints whose frequencies are exact negatives, as
/// happens for index pairs `(j,k)` and `(k,j)` inside the projection block)
/// are treated as one constraint; their targets must satisfy the conjugate
/// relation a real control imposes.
#[derive(Debug, Clone, Serialize)]
pub struct MomentSystem {
    pub t: f64,
    constraints: Vec<MomentConstraint>,
    /// Canonical representative index for each constraint.
    #[serde(skip)]
    canonical: Vec<usize>,
    /// Index into `constraints` by label.
    #[serde(skip)]
    by_label: HashMap<(usize, usize), usize>,
    pub min_gap: f64,
    pub collision_tol: f64,
}

impl MomentSystem {
    pub fn new(t: f64, constraints: Vec<MomentConstraint>) -> Result<Self> {
        if !(t > 0.0) {
            return Err(SteerError::InvalidSignal(format!("horizon T = {t} must be positive")));
        }
        if constraints.is_empty() {
            return Err(SteerError::InvalidScenario("moment system needs a constraint".into()));
        }
        let max_w = constraints.iter().fold(0.0f64, |acc, c| acc.max(c.frequency.abs()));
        let tol = COLLISION_TOL_REL * max_w.max(1.0);

        // pair up exact mirrors; collisions are everything else that lands
        // within tolerance on the symmetrized family
        let n = constraints.len();
        let mut canonical: Vec<usize> = (0..n).collect();
        for a in 0..n {
            for b in (a + 1)..n {
                let wa = constraints[a].frequency;
                let wb = constraints[b].frequency;
                if (wa - wb).abs() <= tol {
                    return Err(collision_error(&constraints[a], &constraints[b]));
                }
                if (wa + wb).abs() <= tol {
                    // mirror pair: same constraint through conjugation
                    if canonical[b] != b || canonical[a] != a {
                        return Err(collision_error(&constraints[a], &constraints[b]));
                    }
                    canonical[b] = a;
                }
            }
        }
        // ω = 0 targets must be real for a real control to exist
        for c in &constraints {
            if c.frequency.abs() <= tol && c.target.im.abs() > 1e-12 {
                return Err(SteerError::InvalidSignal(format!(
                    "zero-frequency target must be real, got {}",
                    c.target
                )));
            }
        }
        // mirror-pair targets must be conjugate
        for b in 0..n {
            let a = canonical[b];
            if a != b {
                let defect = (constraints[b].target - constraints[a].target.conj()).norm();
                if defect > 1e-9 {
                    return Err(SteerError::InvalidSignal(format!(
                        "targets of mirrored constraints ({},{}) and ({},{}) are not conjugate (defect {defect:.3e})",
                        constraints[a].j, constraints[a].k, constraints[b].j, constraints[b].k
                    )));
                }
            }
        }

        // symmetrized family for the separation measure
        let mut sym: Vec<f64> = Vec::new();
        for (i, c) in constraints.iter().enumerate() {
            if canonical[i] != i {
                continue;
            }
            sym.push(c.frequency);
            if c.frequency.abs() > tol {
                sym.push(-c.frequency);
            }
        }
        sym.sort_by(|x, y| x.partial_cmp(y).unwrap());
        let mut min_gap = f64::INFINITY;
        for w in sym.windows(2) {
            min_gap = min_gap.min(w[1] - w[0]);
        }
        if sym.len() == 1 {
            min_gap = f64::INFINITY;
        }

        let mut by_label = HashMap::new();
        for (i, c) in constraints.iter().enumerate() {
            by_label.insert((c.j, c.k), i);
        }
        Ok(Self { t, constraints, canonical, by_label, min_gap, collision_tol: tol })
    }

    /// Free-standing system from raw frequencies, labeled `(a+1, 0)`.
    pub fn from_frequencies(t: f64, frequencies: &[f64], targets: &[C64]) -> Result<Self> {
        if frequencies.len() != targets.len() {
            return Err(SteerError::DimensionMismatch {
                expected: frequencies.len(),
                got: targets.len(),
            });
        }
        let constraints = frequencies
            .iter()
            .zip(targets)
            .enumerate()
            .map(|(a, (&frequency, &target))| MomentConstraint { j: a + 1, k: 0, frequency, target })
            .collect();
        Self::new(t, constraints)
    }

    pub fn constraints(&self) -> &[MomentConstraint] {
        &self.constraints
    }

    pub fn len(&self) -> usize {
        self.constraints.len()
    }

    pub fn is_empty(&self) -> bool {
        self.constraints.is_empty()
    }

    /// Overwrite the target of the constraint labeled `(j, k)`.
    pub fn set_target(&mut self, j: usize, k: usize, target: C64) -> Result<()> {
        let &idx = self
            .by_label
            .get(&(j, k))
            .ok_or(SteerError::InvalidScenario(format!("no constraint labeled ({j},{k})")))?;
        self.constraints[idx].target = target;
        Ok(())
    }

    /// Minimal horizon `2π/min_gap` below which the solve is refused.
    pub fn min_horizon(&self) -> f64 {
        if self.min_gap.is_finite() {
            2.0 * std::f64::consts::PI / self.min_gap
        } else {
            0.0
        }
    }

    /// Canonical constraints with mirrors removed, then conjugate mirrors
    /// appended: the family the real-control ansatz actually interpolates.
    fn symmetrized(&self) -> Vec<(f64, C64)> {
        let mut fam = Vec::new();
        for (i, c) in self.constraints.iter().enumerate() {
            if self.canonical[i] != i {
                continue;
            }
            fam.push((c.frequency, c.target));
            if c.frequency.abs() > self.collision_tol {
                fam.push((-c.frequency, c.target.conj()));
            }
        }
        fam
    }
}

fn collision_error(a: &MomentConstraint, b: &MomentConstraint) -> SteerError {
    SteerError::FrequencyCollision {
        j1: a.j,
        k1: a.k,
        j2: b.j,
        k2: b.k,
        w1: a.frequency,
        w2: b.frequency,
    }
}

/// Skeleton system for the linearized steering problem in the perturbed
/// frame: frequencies `ω_{(k,j)} = λ_j^{u0} − λ_k^{u0}` for `k ≤ n`,
/// `j ≤ jmax`, `j ≠ k`, plus the single `ω = 0` entry labeled `(1,1)`.
/// All targets start at zero. Collisions fail construction rather than
/// merging: they are exactly the resonances the perturbation must remove.
pub fn assemble_frequencies(
    spec: &PerturbedSpectrum,
    n: usize,
    jmax: usize,
    t: f64,
) -> Result<MomentSystem> {
    let m = spec.modes();
    if n == 0 || n > m || jmax > m {
        return Err(SteerError::InvalidIndex(n.max(jmax)));
    }
    let mut constraints = vec![MomentConstraint {
        j: 1,
        k: 1,
        frequency: 0.0,
        target: c64(0.0, 0.0),
    }];
    for k in 1..=n {
        for j in 1..=jmax {
            if j != k {
                constraints.push(MomentConstraint {
                    j,
                    k,
                    frequency: spec.eigenvalue(j) - spec.eigenvalue(k),
                    target: c64(0.0, 0.0),
                });
            }
        }
    }
    MomentSystem::new(t, constraints)
}

/// Exact `∫_a^{a+dt} e^{−iωs} ds`.
pub(crate) fn segment_integral(a: f64, dt: f64, w: f64) -> C64 {
    if w == 0.0 {
        return c64(dt, 0.0);
    }
    let theta = w * dt;
    let half = 0.5 * theta;
    // (1 − e^{−iθ})/(iω) without cancellation
    let re = half.sin() * half.sin() * 2.0;
    let im = theta.sin();
    let base = c64(im / w, -re / w);
    let rot = c64((w * a).cos(), -(w * a).sin());
    rot * base
}

/// Exact moment `∫₀^T u1(s) e^{−iω s} ds` of a piecewise-constant signal
/// (the `u0` offset is not included).
pub fn signal_moment(signal: &ControlSignal, w: f64) -> C64 {
    let mut acc = c64(0.0, 0.0);
    let mut t = 0.0;
    for seg in signal.segments() {
        acc += segment_integral(t, seg.dt, w) * c64(seg.value, 0.0);
        t += seg.dt;
    }
    acc
}

/// A solved moment problem: the sampled real control and its exact
/// per-constraint residuals.
#[derive(Debug, Clone, Serialize)]
pub struct MomentSolution {
    /// The `u1` part on a uniform grid, offset `u0 = 0`.
    pub signal: ControlSignal,
    /// `|∫ u e^{−iωs} ds − x|` per constraint, in constraint order.
    pub residuals: Vec<f64>,
    pub max_residual: f64,
    /// Condition number of the normalized continuous Gram matrix.
    pub gram_condition: f64,
    pub l2_norm: f64,
    /// Largest imaginary part the synthesis discarded.
    pub realness_defect: f64,
}

/// Solve for the minimum-norm real control on `[0, T]`, sampled onto
/// `segments` uniform pieces, hitting every moment target exactly (up to
/// linear-algebra precision) through the piecewise-constant correction.
pub fn solve_real_moment(system: &MomentSystem, segments: usize) -> Result<MomentSolution> {
    if segments == 0 {
        return Err(SteerError::InvalidSignal("need at least one segment".into()));
    }
    let t = system.t;
    let required = system.min_horizon();
    if t <= required {
        return Err(SteerError::HorizonTooShort { t, required });
    }
    for c in system.constraints() {
        if !c.target.re.is_finite() || !c.target.im.is_finite() {
            return Err(SteerError::InvalidSignal("non-finite moment target".into()));
        }
    }

    let fam = system.symmetrized();
    let ns = fam.len();

    // continuous Gram G_{ab} = ∫ e^{i(ω_b − ω_a)s} ds = conj of segment integral
    let mut gram = CMatrix::zeros(ns, ns);
    for a in 0..ns {
        for b in 0..ns {
            gram[(a, b)] = segment_integral(0.0, t, fam[a].0 - fam[b].0).conj();
        }
    }
    let cond = {
        let eigs = gram.clone().symmetric_eigen().eigenvalues;
        let max = eigs.iter().fold(0.0f64, |m, &x| m.max(x));
        let min = eigs.iter().fold(f64::INFINITY, |m, &x| m.min(x));
        if min <= 0.0 { f64::INFINITY } else { max / min }
    };
    if cond > GRAM_COND_LIMIT {
        return Err(SteerError::IllPosedGram { cond, limit: GRAM_COND_LIMIT });
    }

    let tau = 1e-12 * gram.trace().re;
    let mut reg = gram;
    for a in 0..ns {
        reg[(a, a)] += c64(tau, 0.0);
    }
    let targets = CVector::from_fn(ns, |a, _| fam[a].1);
    let chol = reg
        .cholesky()
        .ok_or(SteerError::IllPosedGram { cond, limit: GRAM_COND_LIMIT })?;
    let coeff = chol.solve(&targets);

    // sample the interpolant u(s) = Re Σ c_b e^{iω_b s} at segment midpoints
    let dt = t / segments as f64;
    let mut values = vec![0.0f64; segments];
    let mut realness_defect = 0.0f64;
    for (m, v) in values.iter_mut().enumerate() {
        let s = (m as f64 + 0.5) * dt;
        let mut acc = c64(0.0, 0.0);
        for (b, (w, _)) in fam.iter().enumerate() {
            acc += coeff[b] * c64((w * s).cos(), (w * s).sin());
        }
        realness_defect = realness_defect.max(acc.im.abs());
        *v = acc.re;
    }

    // exact correction in the piecewise-constant space: E v = targets
    let mut e = CMatrix::zeros(ns, segments);
    for (a, (w, _)) in fam.iter().enumerate() {
        for m in 0..segments {
            e[(a, m)] = segment_integral(m as f64 * dt, dt, *w);
        }
    }
    let v = CVector::from_fn(segments, |m, _| c64(values[m], 0.0));
    let defect = &targets - &e * &v;
    let mut ee = &e * e.adjoint();
    let tau2 = 1e-12 * ee.trace().re.max(f64::MIN_POSITIVE);
    for a in 0..ns {
        ee[(a, a)] += c64(tau2, 0.0);
    }
    let y = ee
        .cholesky()
        .ok_or(SteerError::IllPosedGram { cond, limit: GRAM_COND_LIMIT })?
        .solve(&defect);
    let dv = e.adjoint() * y;
    for m in 0..segments {
        realness_defect = realness_defect.max(dv[m].im.abs());
        values[m] += dv[m].re;
    }

    let signal = ControlSignal::from_uniform_values(0.0, dt, &values)?;

    // exact residuals on the original (unsymmetrized) constraints
    let mut residuals = Vec::with_capacity(system.len());
    let mut max_residual = 0.0f64;
    for c in system.constraints() {
        let r = (signal_moment(&signal, c.frequency) - c.target).norm();
        max_residual = max_residual.max(r);
        residuals.push(r);
    }

    let l2_norm = signal.u1_l2_norm();
    Ok(MomentSolution { signal, residuals, max_residual, gram_condition: cond, l2_norm, realness_defect })
}

/// Extreme eigenvalues of the normalized Gram matrix: empirical frame
/// bounds for the exponential family on `[0, T]`.
#[derive(Debug, Clone, Serialize)]
pub struct FrameCondition {
    pub t: f64,
    pub riesz_lower: f64,
    pub riesz_upper: f64,
    pub condition_number: f64,
}

pub fn frame_condition(system: &MomentSystem) -> FrameCondition {
    let fam = system.symmetrized();
    let ns = fam.len();
    let t = system.t;
    let mut gram = CMatrix::zeros(ns, ns);
    for a in 0..ns {
        for b in 0..ns {
            gram[(a, b)] = segment_integral(0.0, t, fam[a].0 - fam[b].0).conj() / c64(t, 0.0);
        }
    }
    let eigs = gram.symmetric_eigen().eigenvalues;
    let hi = eigs.iter().fold(0.0f64, |m, &x| m.max(x));
    let lo = eigs.iter().fold(f64::INFINITY, |m, &x| m.min(x)).max(0.0);
    FrameCondition {
        t,
        riesz_lower: lo,
        riesz_upper: hi,
        condition_number: if lo > 0.0 { hi / lo } else { f64::INFINITY },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::build_x_squared;
    use crate::perturbation::perturbed_spectrum;
    use crate::spectral::BasisTruncation;
    use rand::{Rng, SeedableRng};
    use std::f64::consts::PI;

    #[test]
    fn constant_control_for_zero_frequency() {
        let sys = MomentSystem::from_frequencies(2.0, &[0.0], &[c64(0.5, 0.0)]).unwrap();
        let sol = solve_real_moment(&sys, 64).unwrap();
        for seg in sol.signal.segments() {
            assert!((seg.value - 0.25).abs() < 1e-12, "u = {}", seg.value);
        }
        assert!(sol.max_residual < 1e-12);
    }

    #[test]
    fn integer_period_pair_matches_closed_form() {
        // ωT = 2π·3 makes the symmetrized Gram diagonal
        let t = 2.0;
        let w = 3.0 * PI; // wT = 6π
        let x = c64(0.3, -0.2);
        let sys = MomentSystem::from_frequencies(t, &[w], &[x]).unwrap();
        let sol = solve_real_moment(&sys, 4096).unwrap();
        assert!(sol.max_residual < 1e-12, "residual {:.3e}", sol.max_residual);
        // u(s) ≈ (2/T)·Re(x e^{iωs})
        let dt = t / 4096.0;
        for (m, seg) in sol.signal.segments().iter().enumerate().step_by(97) {
            let s = (m as f64 + 0.5) * dt;
            let expect = (2.0 / t) * (x * c64((w * s).cos(), (w * s).sin())).re;
            assert!((seg.value - expect).abs() < 1e-3, "sample {m}: {} vs {expect}", seg.value);
        }
    }

    #[test]
    fn round_trip_recovers_moments() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(23);
        let t = 1.5;
        let freqs = [0.0, 7.3, 19.1, 44.9, 61.2];
        // a random piecewise-constant control defines the targets
        let dt = t / 512.0;
        let raw: Vec<f64> = (0..512).map(|_| rng.random::<f64>() - 0.5).collect();
        let probe = ControlSignal::from_uniform_values(0.0, dt, &raw).unwrap();
        let targets: Vec<C64> = freqs.iter().map(|&w| signal_moment(&probe, w)).collect();
        let sys = MomentSystem::from_frequencies(t, &freqs, &targets).unwrap();
        let sol = solve_real_moment(&sys, 512).unwrap();
        assert!(sol.max_residual < 1e-8, "round-trip residual {:.3e}", sol.max_residual);
        assert!(sol.realness_defect < 1e-12);
    }

    #[test]
    fn assembled_frequencies_collide_at_zero_perturbation() {
        let b = build_x_squared(BasisTruncation::new(8).unwrap());
        let spec = perturbed_spectrum(&b, 0.0).unwrap();
        let err = assemble_frequencies(&spec, 4, 8, 1.0).unwrap_err();
        match err {
            SteerError::FrequencyCollision { j1, k1, j2, k2, .. } => {
                let mut pairs = [(j1, k1), (j2, k2)];
                pairs.sort();
                assert_eq!(pairs, [(7, 1), (8, 4)]);
            }
            other => panic!("expected a collision, got {other}"),
        }
    }

    #[test]
    fn assembled_frequencies_count_at_admissible_perturbation() {
        let b = build_x_squared(BasisTruncation::new(16).unwrap());
        let spec = perturbed_spectrum(&b, 0.1).unwrap();
        let n = 4;
        let jmax = 8;
        let sys = assemble_frequencies(&spec, n, jmax, 1.0).unwrap();
        assert_eq!(sys.len(), n * jmax - n + 1);
    }

    #[test]
    fn single_entry_system() {
        let b = build_x_squared(BasisTruncation::new(8).unwrap());
        let spec = perturbed_spectrum(&b, 0.05).unwrap();
        let sys = assemble_frequencies(&spec, 1, 1, 1.0).unwrap();
        assert_eq!(sys.len(), 1);
        assert_eq!(sys.constraints()[0].frequency, 0.0);
    }

    #[test]
    fn zero_frequency_target_must_be_real() {
        let err = MomentSystem::from_frequencies(1.0, &[0.0], &[c64(0.0, 0.4)]);
        assert!(err.is_err());
    }

    #[test]
    fn horizon_is_enforced() {
        let b = build_x_squared(BasisTruncation::new(24).unwrap());
        let spec = perturbed_spectrum(&b, 0.1).unwrap();
        // min gap is about 3π² so 2π/min_gap ≈ 0.21
        let sys = assemble_frequencies(&spec, 2, 24, 0.1).unwrap();
        let err = solve_real_moment(&sys, 128).unwrap_err();
        assert!(matches!(err, SteerError::HorizonTooShort { .. }));
    }

    #[test]
    fn near_collision_is_rejected() {
        // a pair separated by 1e-6 needs T > 2π·10⁶; at T = 1 the horizon
        // guard fires before the Gram can even be formed
        let w = 10.0;
        let sys = MomentSystem::from_frequencies(
            1.0,
            &[w, w + 1e-6],
            &[c64(0.1, 0.0), c64(0.1, 0.0)],
        )
        .unwrap();
        let err = solve_real_moment(&sys, 128).unwrap_err();
        assert!(matches!(err, SteerError::HorizonTooShort { .. }), "got {err:?}");
    }

    #[test]
    fn fourier_frequencies_are_orthogonal() {
        let t = 2.0;
        let freqs: Vec<f64> = (1..=5).map(|k| 2.0 * PI * k as f64 / t).collect();
        let targets = vec![c64(0.1, 0.1); 5];
        let sys = MomentSystem::from_frequencies(t, &freqs, &targets).unwrap();
        let fc = frame_condition(&sys);
        assert!((fc.condition_number - 1.0).abs() < 1e-10, "cond {}", fc.condition_number);
    }

    #[test]
    fn frame_condition_improves_with_horizon() {
        let b = build_x_squared(BasisTruncation::new(16).unwrap());
        let spec = perturbed_spectrum(&b, 0.1).unwrap();
        let base = {
            let probe = assemble_frequencies(&spec, 2, 8, 1.0).unwrap();
            3.0 * probe.min_horizon()
        };
        let conds: Vec<f64> = [1.0, 2.0, 4.0]
            .iter()
            .map(|mult| {
                let sys = assemble_frequencies(&spec, 2, 8, base * mult).unwrap();
                frame_condition(&sys).condition_number
            })
            .collect();
        assert!(conds[1] < conds[0] && conds[2] < conds[1], "conds {conds:?}");
        assert!(conds[2].is_finite());
    }

    #[test]
    fn degenerating_frame_loses_its_lower_bound() {
        // separation just above the collision tolerance: still constructible,
        // frame bound collapsing
        let w = 10.0;
        let sep = 1e-6;
        let sys = MomentSystem::from_frequencies(
            1.0,
            &[w, w + sep],
            &[c64(0.1, 0.0), c64(0.1, 0.0)],
        )
        .unwrap();
        let fc = frame_condition(&sys);
        assert!(fc.riesz_lower < 1e-6, "lower frame bound {}", fc.riesz_lower);
    }

    #[test]
    fn minimum_norm_optimality() {
        let t = 1.2;
        let freqs = [0.0, 9.0, 23.0];
        let targets = [c64(0.2, 0.0), c64(0.1, -0.3), c64(-0.2, 0.1)];
        let sys = MomentSystem::from_frequencies(t, &freqs, &targets).unwrap();
        let segments = 256;
        let sol = solve_real_moment(&sys, segments).unwrap();

        // perturb by a component orthogonal to the constrained span
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(31);
        let dt = t / segments as f64;
        let raw: Vec<f64> = (0..segments).map(|_| rng.random::<f64>() - 0.5).collect();
        let raw_signal = ControlSignal::from_uniform_values(0.0, dt, &raw).unwrap();
        // knock out its moments at all constraint frequencies (both signs)
        let all: Vec<f64> = freqs.iter().flat_map(|&w| if w == 0.0 { vec![w] } else { vec![w, -w] }).collect();
        let msys = MomentSystem::from_frequencies(
            t,
            &all,
            &all.iter().map(|&w| signal_moment(&raw_signal, w)).collect::<Vec<_>>(),
        )
        .unwrap();
        let projection = solve_real_moment(&msys, segments).unwrap();
        let null: Vec<f64> = raw
            .iter()
            .zip(projection.signal.segments())
            .map(|(r, s)| r - s.value)
            .collect();
        let perturbed: Vec<f64> = sol
            .signal
            .segments()
            .iter()
            .zip(&null)
            .map(|(s, n)| s.value + n)
            .collect();
        let perturbed_signal = ControlSignal::from_uniform_values(0.0, dt, &perturbed).unwrap();
        for (c, &w) in targets.iter().zip(freqs.iter()) {
            let r = (signal_moment(&perturbed_signal, w) - c).norm();
            assert!(r < 1e-7, "residual after null perturbation {r:.3e}");
        }
        assert!(perturbed_signal.u1_l2_norm() > sol.l2_norm);
    }

    #[test]
    fn horizon_monotonicity_of_norm() {
        let freqs = [0.0, 9.0, 23.0];
        let targets = [c64(0.2, 0.0), c64(0.1, -0.3), c64(-0.2, 0.1)];
        let mut norms = Vec::new();
        for (mult, segs) in [(1.0, 256), (2.0, 512), (4.0, 1024)] {
            let sys = MomentSystem::from_frequencies(1.0 * mult, &freqs, &targets).unwrap();
            norms.push(solve_real_moment(&sys, segs).unwrap().l2_norm);
        }
        assert!(norms[1] <= norms[0] * (1.0 + 1e-6), "norms {norms:?}");
        assert!(norms[2] <= norms[1] * (1.0 + 1e-6), "norms {norms:?}");
    }

    #[test]
    fn mirror_pairs_are_consistent_constraints() {
        // (j,k) and (k,j) pairs inside the block carry ±ω with conjugate
        // targets; inconsistent targets are rejected
        let x = c64(0.1, 0.2);
        let good = MomentSystem::from_frequencies(1.0, &[5.0, -5.0], &[x, x.conj()]);
        assert!(good.is_ok());
        let bad = MomentSystem::from_frequencies(1.0, &[5.0, -5.0], &[x, x]);
        assert!(bad.is_err());
        let sol = solve_real_moment(&good.unwrap(), 256).unwrap();
        assert!(sol.max_residual < 1e-10);
    }
}
