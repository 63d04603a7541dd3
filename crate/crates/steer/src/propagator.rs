//! Exact piecewise-constant-in-time propagation of `i∂ψ = (A + u(t)B)ψ`:
//! one Hermitian eigendecomposition per distinct segment value, no ODE
//! stepping error. Includes the reversed dynamics (generator `−A − ũ(t)B`
//! with `ũ(t) = u(T−t)`) and the projected overlap map in the perturbed
//! frame.

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Result, SteerError};
use crate::perturbation::PerturbedSpectrum;
use crate::spectral::{lambda, sobolev_norm_of, BasisTruncation, WaveFunction};
use crate::{c64, CMatrix, CVector};

/// One constant-control piece of a signal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Segment {
    pub dt: f64,
    pub value: f64,
}

/// Real piecewise-constant control `u(t) = u0 + u1(t)` on `[0, T]`.
///
/// `u0` is the constant offset; each segment carries the `u1` value on its
/// time slice. Serializes as `{u0, segments: [{dt, value}]}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ControlSignal {
    pub u0: f64,
    segments: Vec<Segment>,
}

impl ControlSignal {
    pub fn new(u0: f64, segments: Vec<Segment>) -> Result<Self> {
        for (i, s) in segments.iter().enumerate() {
            if !(s.dt > 0.0) || !s.dt.is_finite() || !s.value.is_finite() {
                return Err(SteerError::InvalidSignal(format!(
                    "segment {i} has dt = {}, value = {}",
                    s.dt, s.value
                )));
            }
        }
        Ok(Self { u0, segments })
    }

    /// The constant signal `u ≡ u0` over `[0, T]` as a single segment.
    pub fn constant(u0: f64, t: f64) -> Result<Self> {
        Self::new(u0, vec![Segment { dt: t, value: 0.0 }])
    }

    /// Sample a continuous `u1(t)` onto a uniform grid by midpoint values.
    pub fn sample(u0: f64, u1: impl Fn(f64) -> f64, t: f64, n_segments: usize) -> Result<Self> {
        if n_segments == 0 || !(t > 0.0) {
            return Err(SteerError::InvalidSignal(format!(
                "sampling needs T > 0 and at least one segment (T = {t}, n = {n_segments})"
            )));
        }
        let dt = t / n_segments as f64;
        let segments = (0..n_segments)
            .map(|k| Segment { dt, value: u1((k as f64 + 0.5) * dt) })
            .collect();
        Self::new(u0, segments)
    }

    pub fn from_uniform_values(u0: f64, dt: f64, values: &[f64]) -> Result<Self> {
        Self::new(u0, values.iter().map(|&value| Segment { dt, value }).collect())
    }

    pub fn segments(&self) -> &[Segment] {
        &self.segments
    }

    pub fn total_time(&self) -> f64 {
        self.segments.iter().map(|s| s.dt).sum()
    }

    /// The signal `ũ(t) = u(T − t)`: same offset, segments in reverse order.
    pub fn reversed(&self) -> Self {
        let mut segments = self.segments.clone();
        segments.reverse();
        Self { u0: self.u0, segments }
    }

    /// Append another signal in time (offsets must agree).
    pub fn concat(&self, other: &ControlSignal) -> Result<Self> {
        if (self.u0 - other.u0).abs() > 1e-14 {
            return Err(SteerError::InvalidSignal(format!(
                "cannot concatenate signals with offsets {} and {}",
                self.u0, other.u0
            )));
        }
        let mut segments = self.segments.clone();
        segments.extend_from_slice(&other.segments);
        Ok(Self { u0: self.u0, segments })
    }

    /// L² norm of the `u1` part.
    pub fn u1_l2_norm(&self) -> f64 {
        self.segments.iter().map(|s| s.value * s.value * s.dt).sum::<f64>().sqrt()
    }

    /// Sup norm of the `u1` part.
    pub fn u1_linf_norm(&self) -> f64 {
        self.segments.iter().fold(0.0f64, |acc, s| acc.max(s.value.abs()))
    }

    /// Total variation of the sampled `u1` part.
    pub fn u1_bv_norm(&self) -> f64 {
        self.segments
            .windows(2)
            .map(|w| (w[1].value - w[0].value).abs())
            .sum()
    }
}

/// Result of propagating a family of states under one signal.
#[derive(Debug, Clone)]
pub struct PropagationResult {
    pub final_states: Vec<WaveFunction>,
    /// Full propagator matrix `Γ_T^u` in the φ-basis.
    pub unitary: CMatrix,
    /// Segment end times.
    pub times: Vec<f64>,
    /// Per-state ℓ² norms after each segment.
    pub norm_history: Vec<Vec<f64>>,
    /// Per-state `‖·‖_(3)` norms after each segment.
    pub h3_history: Vec<Vec<f64>>,
}

impl PropagationResult {
    pub fn unitarity_defect(&self) -> f64 {
        let m = self.unitary.nrows();
        (&self.unitary * self.unitary.adjoint() - CMatrix::identity(m, m))
            .map(|z| z.norm())
            .max()
    }

    /// Export the per-state diagnostics as CSV rows `t,state,norm,h3norm`.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("t,state,norm,h3norm\n");
        for (step, t) in self.times.iter().enumerate() {
            for state in 0..self.norm_history.len() {
                out.push_str(&format!(
                    "{t:.16e},{},{:.16e},{:.16e}\n",
                    state + 1,
                    self.norm_history[state][step],
                    self.h3_history[state][step]
                ));
            }
        }
        out
    }
}

/// Cache of segment unitaries keyed by the exact bits of (value, dt).
pub(crate) struct SegmentCache {
    drift: Vec<f64>,
    coupling: CMatrix,
    sign: f64,
    map: HashMap<(u64, u64), CMatrix>,
}

impl SegmentCache {
    /// Propagation under `sign · (diag(drift) + u_total(t)·coupling)`.
    pub(crate) fn new(drift: Vec<f64>, coupling: CMatrix, sign: f64) -> Self {
        Self { drift, coupling, sign, map: HashMap::new() }
    }

    /// `exp(−i·dt·sign·(diag(drift) + u_total·coupling))`.
    pub(crate) fn unitary(&mut self, u_total: f64, dt: f64) -> &CMatrix {
        let key = (u_total.to_bits(), dt.to_bits());
        if !self.map.contains_key(&key) {
            let m = self.drift.len();
            let mut h = &self.coupling * c64(u_total, 0.0);
            for i in 0..m {
                h[(i, i)] += c64(self.drift[i], 0.0);
            }
            let es = h.symmetric_eigen();
            let phases = CVector::from_fn(m, |i, _| {
                let theta = -self.sign * dt * es.eigenvalues[i];
                c64(theta.cos(), theta.sin())
            });
            let u = &es.eigenvectors
                * CMatrix::from_diagonal(&phases)
                * es.eigenvectors.adjoint();
            self.map.insert(key, u);
        }
        &self.map[&key]
    }
}

/// Advance states by one constant-control step `exp(−i·dt·(diag(λ) + u·B))`.
pub fn step_constant(
    b: &crate::operators::ControlOperator,
    u_value: f64,
    dt: f64,
    states: &[WaveFunction],
) -> Result<Vec<WaveFunction>> {
    if !dt.is_finite() || dt <= 0.0 || !u_value.is_finite() {
        return Err(SteerError::InvalidSignal(format!(
            "step needs finite u and dt > 0 (u = {u_value}, dt = {dt})"
        )));
    }
    let m = b.modes();
    let basis = BasisTruncation::new(m)?;
    let drift: Vec<f64> = (1..=m).map(lambda).collect();
    let mut cache = SegmentCache::new(drift, b.matrix().clone(), 1.0);
    let u = cache.unitary(u_value, dt).clone();
    states
        .iter()
        .map(|psi| {
            if psi.coeffs().len() != m {
                return Err(SteerError::DimensionMismatch { expected: m, got: psi.coeffs().len() });
            }
            WaveFunction::new(&u * psi.coeffs(), basis)
        })
        .collect()
}

fn propagate_impl(
    b: &crate::operators::ControlOperator,
    signal: &ControlSignal,
    initial: &[WaveFunction],
    sign: f64,
) -> Result<PropagationResult> {
    let m = b.modes();
    let basis = BasisTruncation::new(m)?;
    for psi in initial {
        if psi.coeffs().len() != m {
            return Err(SteerError::DimensionMismatch { expected: m, got: psi.coeffs().len() });
        }
    }
    if signal.segments().is_empty() {
        return Ok(PropagationResult {
            final_states: initial.to_vec(),
            unitary: CMatrix::identity(m, m),
            times: Vec::new(),
            norm_history: vec![Vec::new(); initial.len()],
            h3_history: vec![Vec::new(); initial.len()],
        });
    }

    let drift: Vec<f64> = (1..=m).map(lambda).collect();
    let mut cache = SegmentCache::new(drift, b.matrix().clone(), sign);

    let k = initial.len();
    let mut states = CMatrix::zeros(m, k);
    for (i, psi) in initial.iter().enumerate() {
        states.set_column(i, psi.coeffs());
    }
    let mut gamma = CMatrix::identity(m, m);
    let mut times = Vec::with_capacity(signal.segments().len());
    let mut norm_history = vec![Vec::with_capacity(signal.segments().len()); k];
    let mut h3_history = vec![Vec::with_capacity(signal.segments().len()); k];

    let mut t = 0.0;
    for seg in signal.segments() {
        let u_total = signal.u0 + seg.value;
        let u = cache.unitary(u_total, seg.dt).clone();
        gamma = &u * gamma;
        states = &u * states;
        t += seg.dt;
        times.push(t);
        for i in 0..k {
            let col = states.column(i).clone_owned();
            norm_history[i].push(col.norm());
            h3_history[i].push(sobolev_norm_of(&col, 3.0));
        }
    }

    let final_states = (0..k)
        .map(|i| WaveFunction::new(states.column(i).clone_owned(), basis))
        .collect::<Result<Vec<_>>>()?;
    Ok(PropagationResult { final_states, unitary: gamma, times, norm_history, h3_history })
}

/// Propagate states under `i∂ψ = (A + (u0 + u1(t))B)ψ` and record norm and
/// `‖·‖_(3)` histories along with the full propagator matrix.
pub fn propagate(
    b: &crate::operators::ControlOperator,
    signal: &ControlSignal,
    initial: &[WaveFunction],
) -> Result<PropagationResult> {
    propagate_impl(b, signal, initial, 1.0)
}

/// Propagate under the reversed dynamics, generator `−A − u(t)B`.
pub fn propagate_reversed(
    b: &crate::operators::ControlOperator,
    signal: &ControlSignal,
    initial: &[WaveFunction],
) -> Result<PropagationResult> {
    propagate_impl(b, signal, initial, -1.0)
}

/// Time-reversal defect `‖Γ̃_T^ũ Γ_T^u ψ − ψ‖` with `ũ(t) = u(T−t)`.
pub fn reverse_check(
    b: &crate::operators::ControlOperator,
    signal: &ControlSignal,
    psi: &WaveFunction,
) -> Result<f64> {
    let forward = propagate(b, signal, std::slice::from_ref(psi))?;
    let back = propagate_reversed(b, &signal.reversed(), &forward.final_states)?;
    Ok((back.final_states[0].coeffs() - psi.coeffs()).norm())
}

/// Overlap matrix `α̂_{k,j} = ⟨φ_k^{u0}(T), Γ_T^u φ_j^{u0}⟩` with rows
/// `k ≤ n` and columns `j ≤ M`, where `φ_k^{u0}(T) = e^{−iλ_k^{u0}T} φ_k^{u0}`.
pub fn overlap_matrix(
    result: &PropagationResult,
    spec: &PerturbedSpectrum,
    n: usize,
    t: f64,
) -> Result<CMatrix> {
    let m = spec.modes();
    if result.unitary.nrows() != m {
        return Err(SteerError::DimensionMismatch { expected: m, got: result.unitary.nrows() });
    }
    if n > m || n == 0 {
        return Err(SteerError::InvalidIndex(n));
    }
    let frame = spec.eigenvectors().adjoint() * &result.unitary * spec.eigenvectors();
    let mut alpha = CMatrix::zeros(n, m);
    for k in 0..n {
        let theta = spec.eigenvalue(k + 1) * t;
        let phase = c64(theta.cos(), theta.sin());
        for j in 0..m {
            alpha[(k, j)] = phase * frame[(k, j)];
        }
    }
    Ok(alpha)
}
