//! Local exact steering in the perturbed frame: the linearized overlap map,
//! its phase normalization, and a damped Newton iteration that inverts the
//! overlap map near the identity by repeatedly solving trigonometric moment
//! problems.
//!
//! Two constraint flavors share the engine:
//!
//! - [`ControlledBlock::Rows`]: rows `k ≤ N`, all columns: simultaneous
//!   steering of the whole basis family *in projection* onto the first `N`
//!   perturbed modes (up to one phase per projected column),
//! - [`ControlledBlock::Columns`]: columns `j ≤ N`, all rows: exact
//!   steering of `N` states (all components), the building block for
//!   concatenating global and local stages.

use serde::Serialize;

use crate::error::{Result, SteerError};
use crate::moment::{solve_real_moment, MomentConstraint, MomentSystem};
use crate::operators::ControlOperator;
use crate::perturbation::PerturbedSpectrum;
use crate::propagator::{ControlSignal, SegmentCache};
use crate::spectral::{sobolev_norm_of, WaveFunction};
use crate::{c64, CMatrix, CVector};

/// Which block of the frame overlap matrix the steering controls.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ControlledBlock {
    /// Rows `k ≤ N`, columns `j ≤ M`: control in projection.
    Rows(usize),
    /// Rows `k ≤ M`, columns `j ≤ N`: full control of `N` states.
    Columns(usize),
}

impl ControlledBlock {
    pub fn n(&self) -> usize {
        match *self {
            ControlledBlock::Rows(n) | ControlledBlock::Columns(n) => n,
        }
    }

    fn shape(&self, m: usize) -> (usize, usize) {
        match *self {
            ControlledBlock::Rows(n) => (n, m),
            ControlledBlock::Columns(n) => (m, n),
        }
    }
}

/// The working frame for a steering problem: the drift eigenvalues and the
/// coupling matrix of the generator `sign·(A + u(t)B)` expressed in the
/// perturbed eigenbasis. `sign = −1` solves for the reversed dynamics.
#[derive(Debug, Clone)]
pub struct SteeringFrame {
    /// `φ_j^{u0}` columns in the φ-basis.
    vectors: CMatrix,
    /// Frame drift `h_j = sign·λ_j^{u0}` (the `u0` offset is inside).
    h: Vec<f64>,
    /// Frame coupling `sign·⟨φ_k^{u0}, B φ_j^{u0}⟩`.
    bf: CMatrix,
    u0: f64,
    sign: f64,
}

impl SteeringFrame {
    pub fn forward(spec: &PerturbedSpectrum, b: &ControlOperator) -> SteeringFrame {
        Self::with_sign(spec, b, 1.0)
    }

    /// Frame of the reversed dynamics, generator `−A − u(t)B`.
    pub fn reversed(spec: &PerturbedSpectrum, b: &ControlOperator) -> SteeringFrame {
        Self::with_sign(spec, b, -1.0)
    }

    fn with_sign(spec: &PerturbedSpectrum, b: &ControlOperator, sign: f64) -> SteeringFrame {
        let bf = spec.coupling_in_frame(b) * c64(sign, 0.0);
        SteeringFrame {
            vectors: spec.eigenvectors().clone(),
            h: spec.eigenvalues().iter().map(|l| sign * l).collect(),
            bf,
            u0: spec.u0(),
            sign,
        }
    }

    pub fn modes(&self) -> usize {
        self.h.len()
    }

    pub fn u0(&self) -> f64 {
        self.u0
    }

    pub fn sign(&self) -> f64 {
        self.sign
    }

    pub fn drift(&self) -> &[f64] {
        &self.h
    }

    pub fn coupling(&self) -> &CMatrix {
        &self.bf
    }

    pub fn vectors(&self) -> &CMatrix {
        &self.vectors
    }

    /// Frame coordinates of a φ-basis coefficient vector.
    pub fn to_frame(&self, coeffs: &CVector) -> CVector {
        self.vectors.adjoint() * coeffs
    }

    pub fn from_frame(&self, coeffs: &CVector) -> CVector {
        &self.vectors * coeffs
    }

    /// The frame propagator of `diag(h) + u1(t)·Bf` over the signal's `u1`
    /// samples (the `u0` offset already lives in `h`).
    pub fn evolve(&self, u1: &ControlSignal) -> CMatrix {
        let mut cache = SegmentCache::new(self.h.clone(), self.bf.clone(), 1.0);
        let m = self.modes();
        let mut gamma = CMatrix::identity(m, m);
        for seg in u1.segments() {
            gamma = cache.unitary(seg.value, seg.dt) * gamma;
        }
        gamma
    }

    /// Overlap block `α̂_{k,j} = ⟨φ_k^{u0}(T), Γ φ_j^{u0}⟩ = e^{i h_k T}·F_{kj}`
    /// of a frame propagator `F` over horizon `t`.
    pub fn overlap_block(&self, frame_propagator: &CMatrix, t: f64) -> CMatrix {
        let m = self.modes();
        CMatrix::from_fn(m, m, |k, j| {
            let th = self.h[k] * t;
            c64(th.cos(), th.sin()) * frame_propagator[(k, j)]
        })
    }

    /// Free-evolved frame state `φ_j^{u0}(T) = e^{−i h_j T} φ_j^{u0}` in the
    /// φ-basis.
    pub fn free_evolved_state(&self, j: usize, t: f64) -> CVector {
        let th = -self.h[j - 1] * t;
        self.vectors.column(j - 1) * c64(th.cos(), th.sin())
    }
}

/// Space tag for projected target blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum SpaceTag {
    /// Diagonal entries real (value space of the overlap map).
    Q,
    /// Skew block with zero diagonal (tangent space of the overlap map).
    G,
}

/// A complex block `{x_{k,j}}` with rows `k ≤ N`, columns `j ≤ M`, tagged by
/// the structural space it is supposed to live in.
#[derive(Debug, Clone)]
pub struct ProjectionTarget {
    pub n: usize,
    pub entries: CMatrix,
    pub space_tag: SpaceTag,
}

impl ProjectionTarget {
    pub fn new(n: usize, entries: CMatrix, space_tag: SpaceTag) -> Result<Self> {
        if entries.nrows() != n {
            return Err(SteerError::DimensionMismatch { expected: n, got: entries.nrows() });
        }
        Ok(Self { n, entries, space_tag })
    }

    /// Deviation from the tag's structure on the leading N×N block.
    pub fn structure_defect(&self) -> f64 {
        let n = self.n;
        let mut worst = 0.0f64;
        match self.space_tag {
            SpaceTag::Q => {
                for k in 0..n {
                    worst = worst.max(self.entries[(k, k)].im.abs());
                }
            }
            SpaceTag::G => {
                for k in 0..n {
                    for j in 0..n {
                        let skew = self.entries[(k, j)] + self.entries[(j, k)].conj();
                        worst = worst.max(skew.norm());
                    }
                    worst = worst.max(self.entries[(k, k)].norm());
                }
            }
        }
        worst
    }

    /// Weighted row norms `(Σ_j |j³ x_{k,j}|²)^{1/2}` reported for Q-blocks.
    pub fn weighted_row_norms(&self) -> Vec<f64> {
        (0..self.n)
            .map(|k| {
                self.entries
                    .row(k)
                    .iter()
                    .enumerate()
                    .map(|(j, x)| ((j + 1) as f64).powi(6) * x.norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }
}

/// Multiply each column `j ≤ n` by `conj(α̂_{j,j})/|α̂_{j,j}|` so its diagonal
/// entry becomes real positive; return the matrix and the extracted phases
/// `θ_j = −arg(α̂_{j,j})`.
pub fn phase_normalize(alpha_hat: &CMatrix, n: usize) -> Result<(CMatrix, Vec<f64>)> {
    let floor = 1e-8;
    let mut out = alpha_hat.clone();
    let mut phases = Vec::with_capacity(n);
    for j in 0..n {
        let d = alpha_hat[(j, j)];
        if d.norm() <= floor {
            return Err(SteerError::LostPhase { index: j + 1, value: d.norm() });
        }
        let q = d.conj() / c64(d.norm(), 0.0);
        phases.push(-d.arg());
        let mut col = out.column_mut(j);
        for x in col.iter_mut() {
            *x *= q;
        }
    }
    Ok((out, phases))
}

/// The Fréchet derivative of the phase-normalized overlap map at `u1 = 0`:
/// `γ_{k,j}(v) = −i·(∫ v(s) e^{−i(h_j − h_k)s} ds)·Bf_{k,j}` off the
/// diagonal, zero on it.
pub fn linearized_map_gamma(
    frame: &SteeringFrame,
    v: &ControlSignal,
    n: usize,
    _t: f64,
) -> Result<ProjectionTarget> {
    if v.u0 != 0.0 {
        return Err(SteerError::InvalidSignal(
            "the linearization argument is a variation of u1 and must carry u0 = 0".into(),
        ));
    }
    let m = frame.modes();
    if n > m || n == 0 {
        return Err(SteerError::InvalidIndex(n));
    }
    let mut entries = CMatrix::zeros(n, m);
    for k in 0..n {
        for j in 0..m {
            if j == k {
                continue;
            }
            let w = frame.h[j] - frame.h[k];
            let moment = crate::moment::signal_moment(v, w);
            entries[(k, j)] = c64(0.0, -1.0) * moment * frame.bf[(k, j)];
        }
    }
    // enforce the exact skew structure on the N×N block
    for k in 0..n {
        for j in 0..k {
            let g = (entries[(k, j)] - entries[(j, k)].conj()) * c64(0.5, 0.0);
            entries[(k, j)] = g;
            entries[(j, k)] = -g.conj();
        }
    }
    ProjectionTarget::new(n, entries, SpaceTag::G)
}

/// Tuning knobs of the Newton steering loop.
#[derive(Debug, Clone)]
pub struct NewtonOptions {
    pub tol: f64,
    pub max_iter: usize,
    /// Uniform grid size of the synthesized control.
    pub segments: usize,
    /// Full Newton step below this defect, damped above.
    pub damping_defect: f64,
    /// L² cap on a damped correction.
    pub damping_du_cap: f64,
    /// Largest admissible H³ distance of targets from the free-evolved frame
    /// states, up to phase.
    pub neighborhood: f64,
}

impl Default for NewtonOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iter: 25,
            segments: 2048,
            damping_defect: 1e-2,
            damping_du_cap: 0.1,
            neighborhood: 0.05,
        }
    }
}

/// Outcome of a Newton steering run.
#[derive(Debug, Clone)]
pub struct NewtonReport {
    /// Full control `u0 + u1(t)` on the uniform grid.
    pub control: ControlSignal,
    /// Phases `θ_j` (j ≤ N) such that `e^{iθ_j}`-rotated steered states match
    /// the targets on the controlled block.
    pub phases: Vec<f64>,
    /// Projected defect after each iteration (entry 0 = initial defect).
    pub defect_history: Vec<f64>,
    pub iterations: usize,
    pub final_defect: f64,
    /// Final frame propagator of the steering problem.
    pub frame_propagator: CMatrix,
}

/// Simultaneous local exact steering in projection: drive the whole basis
/// family so that the first `n` rows of the overlap matrix match the target
/// family, up to one phase per projected column (rows flavor).
///
/// `targets` may list fewer than `M` states; missing columns default to the
/// free-evolved frame states (zero defect there).
pub fn steer_local_newton(
    spec: &PerturbedSpectrum,
    b: &ControlOperator,
    targets: &[WaveFunction],
    n: usize,
    t: f64,
    options: &NewtonOptions,
) -> Result<NewtonReport> {
    let frame = SteeringFrame::forward(spec, b);
    steer_newton(&frame, targets, ControlledBlock::Rows(n), t, options)
}

/// Exact steering of `n` full states (columns flavor) in the given frame.
/// With a reversed frame this solves the reversed-dynamics local problem
/// whose time-flipped control drives the targets onto the frame states.
pub fn steer_states_newton(
    frame: &SteeringFrame,
    targets: &[WaveFunction],
    t: f64,
    options: &NewtonOptions,
) -> Result<NewtonReport> {
    steer_newton(frame, targets, ControlledBlock::Columns(targets.len()), t, options)
}

fn steer_newton(
    frame: &SteeringFrame,
    targets: &[WaveFunction],
    block: ControlledBlock,
    t: f64,
    options: &NewtonOptions,
) -> Result<NewtonReport> {
    let m = frame.modes();
    let n = block.n();
    if n == 0 || n > m {
        return Err(SteerError::InvalidIndex(n));
    }
    let n_cols = match block {
        ControlledBlock::Rows(_) => m,
        ControlledBlock::Columns(nn) => nn,
    };
    if targets.len() > n_cols {
        return Err(SteerError::DimensionMismatch { expected: n_cols, got: targets.len() });
    }

    // target overlap block X̂_{k,j} = ⟨φ_k^{u0}(T), ψ_j⟩ = e^{i h_k T}·(V†ψ_j)_k;
    // absent columns default to the free-evolved frame states
    let (rows, cols) = block.shape(m);
    let mut x_hat = CMatrix::zeros(rows, cols);
    for j in 0..cols {
        let frame_coeffs = if j < targets.len() {
            if targets[j].coeffs().len() != m {
                return Err(SteerError::DimensionMismatch { expected: m, got: targets[j].coeffs().len() });
            }
            frame.to_frame(targets[j].coeffs())
        } else {
            let mut e = CVector::zeros(m);
            let th = -frame.h[j] * t;
            e[j] = c64(th.cos(), th.sin());
            e
        };
        for k in 0..rows {
            let th = frame.h[k] * t;
            x_hat[(k, j)] = c64(th.cos(), th.sin()) * frame_coeffs[k];
        }
    }

    validate_targets(frame, targets, t, options.neighborhood)?;
    let (x_norm, target_phases) = phase_normalize(&x_hat, n)?;

    // fixed moment skeleton: one constraint per controlled entry (k ≠ j),
    // plus the zero-frequency constraint labeled (1,1)
    let mut constraints = vec![MomentConstraint { j: 1, k: 1, frequency: 0.0, target: c64(0.0, 0.0) }];
    for k in 0..rows {
        for j in 0..cols {
            if j == k {
                continue;
            }
            if frame.bf[(k, j)].norm() < 1e-14 {
                return Err(SteerError::InvalidScenario(format!(
                    "frame coupling vanishes at ({},{}): coupling persistence does not hold",
                    k + 1,
                    j + 1
                )));
            }
            constraints.push(MomentConstraint {
                j: j + 1,
                k: k + 1,
                frequency: frame.h[j] - frame.h[k],
                target: c64(0.0, 0.0),
            });
        }
    }
    let mut system = MomentSystem::new(t, constraints)?;

    let dt = t / options.segments as f64;
    let mut u1 = vec![0.0f64; options.segments];
    let mut defect_history = Vec::new();
    let mut best = f64::INFINITY;

    for iter in 0..=options.max_iter {
        let signal = ControlSignal::from_uniform_values(0.0, dt, &u1)?;
        let f = frame.evolve(&signal);
        let alpha_hat = frame.overlap_block(&f, t);
        let (alpha_norm, alpha_phases) = phase_normalize(&alpha_hat, n)?;

        // projected defect on the controlled block
        let mut delta = CMatrix::zeros(rows, cols);
        for k in 0..rows {
            for j in 0..cols {
                delta[(k, j)] = x_norm[(k, j)] - alpha_norm[(k, j)];
            }
        }
        // G-structure projection on the N×N corner: skew, zero diagonal
        for k in 0..n {
            for j in 0..n {
                if j == k {
                    delta[(k, k)] = c64(0.0, 0.0);
                } else if j < k {
                    let g = (delta[(k, j)] - delta[(j, k)].conj()) * c64(0.5, 0.0);
                    delta[(k, j)] = g;
                    delta[(j, k)] = -g.conj();
                }
            }
        }
        let defect = delta.map(|z| z.norm()).max();
        defect_history.push(defect);
        best = best.min(defect);

        if defect < options.tol {
            // e^{iθ_j} = (conj(α̂_jj)/|α̂_jj|) / (conj(X̂_jj)/|X̂_jj|), i.e.
            // θ_j = arg(X̂_jj) − arg(α̂_jj)
            let phases = (0..n)
                .map(|j| normalize_angle(alpha_phases[j] - target_phases[j]))
                .collect();
            let control = ControlSignal::from_uniform_values(frame.u0, dt, &u1)?;
            return Ok(NewtonReport {
                control,
                phases,
                defect_history,
                iterations: iter,
                final_defect: defect,
                frame_propagator: f,
            });
        }
        if iter == options.max_iter {
            break;
        }

        // moment targets i·δ_{k,j}/Bf_{k,j} on every controlled constraint
        for k in 0..rows {
            for j in 0..cols {
                if j == k {
                    continue;
                }
                let target = c64(0.0, 1.0) * delta[(k, j)] / frame.bf[(k, j)];
                system.set_target(j + 1, k + 1, target)?;
            }
        }
        let solution = solve_real_moment(&system, options.segments)?;

        let mut scale = 1.0;
        if defect >= options.damping_defect {
            let du_norm = solution.signal.u1_l2_norm();
            if du_norm > options.damping_du_cap {
                scale = options.damping_du_cap / du_norm;
            }
        }
        for (u, seg) in u1.iter_mut().zip(solution.signal.segments()) {
            *u += scale * seg.value;
        }
    }

    Err(SteerError::NewtonDiverged { tol: options.tol, iterations: options.max_iter, best })
}

fn normalize_angle(a: f64) -> f64 {
    let two_pi = 2.0 * std::f64::consts::PI;
    let mut x = a % two_pi;
    if x > std::f64::consts::PI {
        x -= two_pi;
    } else if x < -std::f64::consts::PI {
        x += two_pi;
    }
    x
}

/// Orthonormality and neighborhood validation for steering targets: states
/// must be orthonormal and within `eps` of the free-evolved frame states in
/// the `‖·‖_(3)` distance, up to a phase per state.
fn validate_targets(
    frame: &SteeringFrame,
    targets: &[WaveFunction],
    t: f64,
    eps: f64,
) -> Result<()> {
    for (i, a) in targets.iter().enumerate() {
        for (j, b) in targets.iter().enumerate() {
            let g = a.inner(b);
            let expect = if i == j { 1.0 } else { 0.0 };
            if (g - c64(expect, 0.0)).norm() > 1e-8 {
                return Err(SteerError::InvalidScenario(format!(
                    "steering targets are not orthonormal: ⟨ψ_{},ψ_{}⟩ = {g}",
                    i + 1,
                    j + 1
                )));
            }
        }
    }
    for (j, psi) in targets.iter().enumerate() {
        let reference = frame.free_evolved_state(j + 1, t);
        // phase-align via the overlap before measuring the H³ distance
        let overlap = reference.dotc(psi.coeffs());
        let phase = if overlap.norm() > 0.0 {
            overlap.conj() / c64(overlap.norm(), 0.0)
        } else {
            c64(1.0, 0.0)
        };
        let diff = psi.coeffs() * phase - reference;
        let dist = sobolev_norm_of(&diff, 3.0);
        if dist > eps {
            return Err(SteerError::InvalidScenario(format!(
                "target {} is outside the local neighborhood: H³ distance {dist:.3e} > {eps:.3e}",
                j + 1
            )));
        }
    }
    Ok(())
}
