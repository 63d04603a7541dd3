//! Global approximate steering: admissible transitions, Lie-bracket closure
//! to `su(N₁)`, factorization of an `SU(N₁)` target into planar rotations
//! routed along the transition graph, resonant rotating-wave pulses
//! realizing each factor, and the concatenation of the global stage with
//! exact local steering.
//!
//! The pulse stage runs on the unperturbed spectrum, where `λ_k = k²π²`
//! makes the free evolution exactly periodic with revival time `2/π`:
//! quantizing every pulse duration to revival multiples cancels all drift
//! phases at factor boundaries, so the concatenated propagator converges to
//! the bare product of planar rotations.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Result, SteerError};
use crate::local::{steer_states_newton, NewtonOptions, SteeringFrame};
use crate::operators::ControlOperator;
use crate::perturbation::PerturbedSpectrum;
use crate::propagator::{ControlSignal, Segment, SegmentCache};
use crate::spectral::{lambda, BasisTruncation, WaveFunction};
use crate::{c64, C64, CMatrix, CVector};

/// Free-evolution revival time of the Dirichlet spectrum: every phase
/// `e^{−i k²π² t}` returns to 1 at multiples of `2/π`.
pub const REVIVAL_TIME: f64 = 2.0 / PI;

/// Couplings below this magnitude count as absent.
const COUPLING_FLOOR: f64 = 1e-14;

/// One admissible transition: a coupled pair whose frequency no other
/// coupled pair shares.
#[derive(Debug, Clone)]
pub struct Transition {
    pub j: usize,
    pub k: usize,
    /// `|h_j − h_k|`.
    pub frequency: f64,
    /// Frame coupling entry `Bf_{j,k}`.
    pub coupling: C64,
}

/// The admissible transitions among modes `1..=N1` with their graph.
#[derive(Debug, Clone)]
pub struct AdmissibleTransitions {
    pub n1: usize,
    pub pairs: Vec<Transition>,
    pub connected: bool,
    adjacency: Vec<Vec<usize>>,
}

impl AdmissibleTransitions {
    pub fn empty(n1: usize) -> Self {
        Self { n1, pairs: Vec::new(), connected: n1 <= 1, adjacency: vec![Vec::new(); n1 + 1] }
    }

    pub fn find(&self, j: usize, k: usize) -> Option<&Transition> {
        self.pairs
            .iter()
            .find(|t| (t.j, t.k) == (j, k) || (t.j, t.k) == (k, j))
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.adjacency[node]
    }

    /// BFS order from node 1; every prefix of the order is connected.
    fn bfs_order(&self) -> Vec<usize> {
        let mut order = Vec::with_capacity(self.n1);
        let mut seen = vec![false; self.n1 + 1];
        let mut queue = std::collections::VecDeque::new();
        queue.push_back(1);
        seen[1] = true;
        while let Some(v) = queue.pop_front() {
            order.push(v);
            for &w in &self.adjacency[v] {
                if !seen[w] {
                    seen[w] = true;
                    queue.push_back(w);
                }
            }
        }
        order
    }
}

/// Scan the frame `(drift, coupling)` for admissible transitions among modes
/// `1..=n1`: coupled pairs whose frequency is shared by no other coupled
/// pair anywhere in the truncation. A disconnected graph is an error.
pub fn admissible_transitions_in(
    drift: &[f64],
    coupling: &CMatrix,
    n1: usize,
) -> Result<AdmissibleTransitions> {
    let m = drift.len();
    if n1 < 2 || n1 > m {
        return Err(SteerError::InvalidIndex(n1));
    }
    // all coupled pair frequencies in the truncation
    let mut all: Vec<(usize, usize, f64)> = Vec::new();
    for l in 1..=m {
        for mm in (l + 1)..=m {
            if coupling[(mm - 1, l - 1)].norm() > COUPLING_FLOOR {
                all.push((mm, l, (drift[mm - 1] - drift[l - 1]).abs()));
            }
        }
    }
    let scale = all.iter().fold(1.0f64, |acc, t| acc.max(t.2));
    let tol = 1e-9 * scale;

    let mut pairs = Vec::new();
    let mut adjacency = vec![Vec::new(); n1 + 1];
    for k in 1..=n1 {
        for j in (k + 1)..=n1 {
            let c = coupling[(j - 1, k - 1)];
            if c.norm() <= COUPLING_FLOOR {
                continue;
            }
            let w = (drift[j - 1] - drift[k - 1]).abs();
            let degenerate = all
                .iter()
                .any(|&(mm, l, wml)| (mm, l) != (j, k) && (wml - w).abs() <= tol);
            if degenerate {
                continue;
            }
            adjacency[j].push(k);
            adjacency[k].push(j);
            pairs.push(Transition { j, k, frequency: w, coupling: c });
        }
    }

    // prefer strongly coupled edges when walking the graph: factor routing
    // along weak couplings needs longer pulses for the same angle
    let strength = |a: usize, bb: usize| -> f64 {
        coupling[(a.max(bb) - 1, a.min(bb) - 1)].norm()
    };
    for (node, neigh) in adjacency.iter_mut().enumerate() {
        neigh.sort_by(|&x, &y| {
            strength(node, y).partial_cmp(&strength(node, x)).unwrap()
        });
    }

    let mut out = AdmissibleTransitions { n1, pairs, connected: false, adjacency };
    out.connected = out.bfs_order().len() == n1;
    if !out.connected {
        return Err(SteerError::NoChain { n1 });
    }
    Ok(out)
}

/// Admissible transitions of the unperturbed pair `(A, B)`.
pub fn admissible_transitions(b: &ControlOperator, n1: usize) -> Result<AdmissibleTransitions> {
    let m = b.modes();
    let drift: Vec<f64> = (1..=m).map(lambda).collect();
    admissible_transitions_in(&drift, b.matrix(), n1)
}

/// Admissible transitions in the perturbed frame of `spec`.
pub fn admissible_transitions_perturbed(
    spec: &PerturbedSpectrum,
    b: &ControlOperator,
    n1: usize,
) -> Result<AdmissibleTransitions> {
    let coupling = spec.coupling_in_frame(b);
    admissible_transitions_in(spec.eigenvalues(), &coupling, n1)
}

/// A planar rotation factor `exp(angle·E^θ_{j,k})` with
/// `(E^θ)_{j,k} = e^{iθ}`, `(E^θ)_{k,j} = −e^{−iθ}`.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PlanarRotation {
    pub j: usize,
    pub k: usize,
    pub angle: f64,
    pub phase: f64,
}

impl PlanarRotation {
    pub fn new(j: usize, k: usize, angle: f64, phase: f64) -> Self {
        // normalize to angle ≥ 0, phase ∈ [0, 2π)
        let (angle, phase) = if angle < 0.0 { (-angle, phase + PI) } else { (angle, phase) };
        let two_pi = 2.0 * PI;
        let phase = phase.rem_euclid(two_pi);
        Self { j, k, angle, phase }
    }

    /// The skew-Hermitian generator `E^θ_{j,k}` embedded in dimension `n`.
    pub fn generator(&self, n: usize) -> CMatrix {
        let mut g = CMatrix::zeros(n, n);
        g[(self.j - 1, self.k - 1)] = c64(self.phase.cos(), self.phase.sin());
        g[(self.k - 1, self.j - 1)] = -c64(self.phase.cos(), -self.phase.sin());
        g
    }

    /// Closed-form `exp(angle·E^θ)` embedded in dimension `n`.
    pub fn matrix(&self, n: usize) -> CMatrix {
        let mut u = CMatrix::identity(n, n);
        let (ca, sa) = (self.angle.cos(), self.angle.sin());
        let e = c64(self.phase.cos(), self.phase.sin());
        u[(self.j - 1, self.j - 1)] = c64(ca, 0.0);
        u[(self.k - 1, self.k - 1)] = c64(ca, 0.0);
        u[(self.j - 1, self.k - 1)] = e * c64(sa, 0.0);
        u[(self.k - 1, self.j - 1)] = -e.conj() * c64(sa, 0.0);
        u
    }
}

/// Product of factors in application order: `factors[p-1]·…·factors[0]`.
pub fn rotation_product(factors: &[PlanarRotation], n: usize) -> CMatrix {
    let mut acc = CMatrix::identity(n, n);
    for f in factors {
        acc = f.matrix(n) * acc;
    }
    acc
}

/// Result of the Lie-bracket closure run.
#[derive(Debug, Clone)]
pub struct LieClosure {
    pub dimension: usize,
    /// Orthonormal basis (real span, trace inner product) of the reached
    /// subalgebra of skew-Hermitian traceless matrices.
    pub basis: Vec<CMatrix>,
}

/// Span dimension of the Lie algebra generated by the admissible planar
/// generators at sampled phases (default `{0, π/2}` for `theta_samples = 2`).
/// Full controllability corresponds to dimension `n1² − 1`.
pub fn lie_closure(transitions: &AdmissibleTransitions, theta_samples: usize) -> LieClosure {
    let n1 = transitions.n1;
    let mut basis: Vec<CMatrix> = Vec::new();
    let real_inner = |a: &CMatrix, b: &CMatrix| -> f64 {
        (a.adjoint() * b).trace().re
    };
    let absorb = |mat: CMatrix, basis: &mut Vec<CMatrix>| -> bool {
        let mut v = mat;
        for _ in 0..2 {
            for e in basis.iter() {
                let p = real_inner(e, &v);
                v -= e * c64(p, 0.0);
            }
        }
        let norm = v.map(|z| z.norm_sqr()).sum().sqrt();
        if norm > 1e-10 {
            basis.push(v / c64(norm, 0.0));
            true
        } else {
            false
        }
    };

    let samples = theta_samples.max(1);
    for t in &transitions.pairs {
        for i in 0..samples {
            let theta = if samples == 1 {
                0.0
            } else {
                i as f64 * (PI / 2.0) / (samples - 1) as f64
            };
            let g = PlanarRotation::new(t.j, t.k, 1.0, theta).generator(n1);
            absorb(g, &mut basis);
        }
    }

    // bracket new elements against everything until the span stabilizes
    let mut frontier = 0;
    while frontier < basis.len() {
        let upto = basis.len();
        for i in frontier..upto {
            for jj in 0..upto {
                let a = &basis[i];
                let bmat = &basis[jj];
                let bracket = a * bmat - bmat * a;
                absorb(bracket, &mut basis);
            }
        }
        frontier = upto;
        if basis.len() >= n1 * n1 {
            break;
        }
    }

    LieClosure { dimension: basis.len(), basis }
}

fn unitarity_defect_of(r: &CMatrix) -> f64 {
    let n = r.nrows();
    (r.adjoint() * r - CMatrix::identity(n, n)).map(|z| z.norm()).max()
}

fn determinant(r: &CMatrix) -> C64 {
    r.clone().lu().determinant()
}

/// Factor a special unitary `r` into planar rotations on admissible pairs:
/// Givens-style folding along a spanning tree of the transition graph, with
/// the residual diagonal absorbed by Euler triples of planar rotations on
/// tree edges. The returned list is ordered by application time; composing
/// with [`rotation_product`] reconstructs `r`.
pub fn su_decompose(
    r: &CMatrix,
    transitions: &AdmissibleTransitions,
) -> Result<Vec<PlanarRotation>> {
    let n1 = transitions.n1;
    if r.nrows() != n1 || r.ncols() != n1 {
        return Err(SteerError::DimensionMismatch { expected: n1, got: r.nrows() });
    }
    let udef = unitarity_defect_of(r);
    if udef > 1e-10 {
        return Err(SteerError::NotUnitary(udef));
    }
    let det = determinant(r);
    if (det - c64(1.0, 0.0)).norm() > 1e-10 {
        return Err(SteerError::NotSpecialUnitary((det - c64(1.0, 0.0)).norm()));
    }
    if !transitions.connected {
        return Err(SteerError::NoChain { n1 });
    }

    let order = transitions.bfs_order();
    // spanning tree: each node attaches to its strongest already-placed
    // neighbor (adjacency lists are sorted by coupling strength)
    let mut parent = vec![0usize; n1 + 1];
    let mut tree_adj: Vec<Vec<usize>> = vec![Vec::new(); n1 + 1];
    {
        let mut placed = vec![false; n1 + 1];
        placed[order[0]] = true;
        for &v in order.iter().skip(1) {
            let p = transitions.adjacency[v]
                .iter()
                .copied()
                .find(|&w| placed[w])
                .expect("BFS order attaches to the seen set");
            parent[v] = p;
            tree_adj[v].push(p);
            tree_adj[p].push(v);
            placed[v] = true;
        }
    }

    let mut w = r.clone();
    // rotations applied to w (left multiplications), in order
    let mut applied: Vec<PlanarRotation> = Vec::new();

    // fold columns in reverse BFS order; every prefix of the BFS order is
    // connected within the spanning tree (parents precede children)
    for t in (1..n1).rev() {
        let active: Vec<usize> = order[..=t].to_vec();
        let target = order[t];
        // re-root the induced tree at `target` and fold leaves first
        let fold_order = subtree_fold_order(&active, target, &tree_adj);
        for (node, into) in fold_order {
            let b_val = w[(node - 1, target - 1)];
            if b_val.norm() < 1e-15 {
                continue;
            }
            let a_val = w[(into - 1, target - 1)];
            let rot = zeroing_rotation(transitions, into, node, a_val, b_val)?;
            apply_left(&mut w, &rot);
            applied.push(rot);
        }
    }

    // remaining diagonal: distribute phases along the tree and realize each
    // edge phase by an Euler triple of planar rotations
    let mut need: Vec<f64> = vec![0.0; n1 + 1];
    for v in 1..=n1 {
        need[v] = w[(v - 1, v - 1)].arg();
    }
    let mut diag_factors: Vec<PlanarRotation> = Vec::new();
    for &v in order.iter().skip(1).rev() {
        let phi = need[v];
        need[parent[v]] += phi;
        if phi.abs() < 1e-14 {
            continue;
        }
        // diag(e^{iφ} at v, e^{−iφ} at parent) on the (v, parent) plane:
        // e^{−(π/4)E⁰}·e^{−φE^{π/2}}·e^{(π/4)E⁰}, applied right to left
        let (j, k) = (v, parent[v]);
        diag_factors.push(PlanarRotation::new(j, k, PI / 4.0, 0.0));
        diag_factors.push(PlanarRotation::new(j, k, -phi, PI / 2.0));
        diag_factors.push(PlanarRotation::new(j, k, -(PI / 4.0), 0.0));
    }
    // the root keeps Σ arg ≈ 0 mod 2π because det(r) = 1

    // w = (Π applied)·r is diagonal D, and D = Π diag_factors (as applied),
    // so r = applied₁†…·D: first apply the diagonal factors, then the
    // adjoints of the folding rotations in reverse.
    let mut factors = diag_factors;
    for rot in applied.iter().rev() {
        factors.push(PlanarRotation::new(rot.j, rot.k, -rot.angle, rot.phase));
    }
    factors.retain(|f| f.angle.abs() > 1e-14);
    Ok(factors)
}

/// Fold order for a tree induced on `active`, rooted at `target`: pairs
/// `(node, parent-toward-target)` with children always before parents.
fn subtree_fold_order(
    active: &[usize],
    target: usize,
    adjacency: &[Vec<usize>],
) -> Vec<(usize, usize)> {
    let in_active: std::collections::HashSet<usize> = active.iter().copied().collect();
    let mut order = Vec::new();
    let mut seen = std::collections::HashSet::new();
    seen.insert(target);
    let mut queue = std::collections::VecDeque::new();
    queue.push_back(target);
    let mut bfs = Vec::new();
    while let Some(v) = queue.pop_front() {
        bfs.push(v);
        for &u in &adjacency[v] {
            if in_active.contains(&u) && !seen.contains(&u) {
                seen.insert(u);
                order.push((u, v));
                queue.push_back(u);
            }
        }
    }
    // leaves (discovered last) must fold first
    order.reverse();
    order
}

/// Rotation on the admissible pair containing rows `(keep, zero)` that
/// annihilates the `zero` component of a column with values `a` at `keep`
/// and `b` at `zero`.
fn zeroing_rotation(
    transitions: &AdmissibleTransitions,
    keep: usize,
    zero: usize,
    a: C64,
    b: C64,
) -> Result<PlanarRotation> {
    let t = transitions
        .find(keep, zero)
        .ok_or(SteerError::NotAdmissible { j: keep, k: zero })?;
    let alpha = b.norm().atan2(a.norm());
    let (j, k) = (t.j, t.k);
    if zero == k {
        // new v_k = −sinα·e^{−iθ}·a + cosα·b = 0  ⟹  θ = arg(a) − arg(b)
        let theta = if a.norm() < 1e-300 { 0.0 } else { a.arg() - b.arg() };
        Ok(PlanarRotation::new(j, k, alpha, theta))
    } else {
        // zeroing the j slot: new v_j = cosα·b + sinα·e^{iθ}·a = 0
        let theta = if a.norm() < 1e-300 { 0.0 } else { PI + b.arg() - a.arg() };
        Ok(PlanarRotation::new(j, k, alpha, theta))
    }
}

fn apply_left(w: &mut CMatrix, rot: &PlanarRotation) {
    let n = w.nrows();
    let u = rot.matrix(n);
    *w = &u * &*w;
}

/// Rotating-wave pulse synthesis parameters.
#[derive(Debug, Clone)]
pub struct PulseParams {
    /// Base amplitude A₀; default `0.3/‖B‖`.
    pub base_amplitude: Option<f64>,
    /// Sampling resolution of the cosine, segments per period.
    pub points_per_period: usize,
    /// Durations are rounded up to multiples of this (revival time by
    /// default, cancelling drift phases exactly at pulse boundaries).
    pub duration_quantum: Option<f64>,
    /// Global time at which the pulse starts (phase reference).
    pub time_offset: f64,
}

impl Default for PulseParams {
    fn default() -> Self {
        Self {
            base_amplitude: None,
            // the piecewise-constant sampling floor scales as 1/pp² and must
            // sit below the rotating-wave error at the largest usable n
            points_per_period: 256,
            duration_quantum: Some(REVIVAL_TIME),
            time_offset: 0.0,
        }
    }
}

/// A synthesized resonant pulse implementing one planar rotation.
#[derive(Debug, Clone)]
pub struct Pulse {
    pub rotation: PlanarRotation,
    /// Amplitude index: amplitude shrinks as 1/n while duration grows as n.
    pub n: usize,
    pub amplitude: f64,
    pub omega: f64,
    pub cosine_phase: f64,
    pub duration: f64,
    pub dt: f64,
    pub segments: usize,
    /// One period of segment values; segment m carries `cycle[m % len]`.
    cycle: Vec<f64>,
}

/// Sup, variation and duration-weighted bounds of the emitted signal.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct PulseInfo {
    pub linf: f64,
    pub bv: f64,
    pub t_linf: f64,
}

impl Pulse {
    pub fn value(&self, segment: usize) -> f64 {
        if self.cycle.is_empty() {
            0.0
        } else {
            self.cycle[segment % self.cycle.len()]
        }
    }

    /// Materialize the piecewise-constant signal (offset `u0 = 0`).
    pub fn signal(&self) -> ControlSignal {
        let segments = (0..self.segments)
            .map(|m| Segment { dt: self.dt, value: self.value(m) })
            .collect();
        ControlSignal::new(0.0, segments).expect("pulse segments are valid")
    }

    pub fn info(&self) -> PulseInfo {
        let linf = self.cycle.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let mut bv = 0.0;
        for m in 1..self.segments {
            bv += (self.value(m) - self.value(m - 1)).abs();
        }
        PulseInfo { linf, bv, t_linf: self.duration * linf }
    }
}

/// Synthesize the resonant pulse `u(t) = a·cos(ω_{jk}(t + t₀) + φ)` whose
/// rotating-wave limit realizes `exp(angle·E^θ_{j,k})` in the frame
/// `(drift, coupling)`. The amplitude is `A₀/n` (shrunk slightly when the
/// duration is rounded to the quantum so the pulse area stays exact).
pub fn periodic_pulse(
    transitions: &AdmissibleTransitions,
    rotation: &PlanarRotation,
    n: usize,
    drift: &[f64],
    coupling: &CMatrix,
    params: &PulseParams,
) -> Result<Pulse> {
    if n == 0 {
        return Err(SteerError::InvalidScenario("amplitude index n must be ≥ 1".into()));
    }
    let (j, k) = (rotation.j, rotation.k);
    let t = transitions
        .find(j, k)
        .ok_or(SteerError::NotAdmissible { j, k })?;
    // the transition's canonical orientation may be flipped relative to the
    // requested rotation; re-express the generator on the canonical pair
    let (rot, j, k) = if (t.j, t.k) == (j, k) {
        (*rotation, j, k)
    } else {
        // E^θ_{j,k} = E^{π−θ}_{k,j}
        (PlanarRotation::new(t.j, t.k, rotation.angle, PI - rotation.phase), t.j, t.k)
    };

    if rot.angle == 0.0 {
        return Ok(Pulse {
            rotation: rot,
            n,
            amplitude: 0.0,
            omega: t.frequency,
            cosine_phase: 0.0,
            duration: 0.0,
            dt: 1.0,
            segments: 0,
            cycle: Vec::new(),
        });
    }

    let coupling_abs = t.coupling.norm();
    let beta = t.coupling.arg();
    let delta = drift[j - 1] - drift[k - 1];
    let s = if delta >= 0.0 { 1.0 } else { -1.0 };
    let omega = delta.abs();

    let m = drift.len();
    let norm_b = coupling.clone().symmetric_eigen().eigenvalues.iter().fold(0.0f64, |a, x| a.max(x.abs()));
    let _ = m;
    let a0 = params.base_amplitude.unwrap_or(0.3 / norm_b);
    let raw_duration = 2.0 * rot.angle * n as f64 / (a0 * coupling_abs);
    let duration = match params.duration_quantum {
        Some(q) if q > 0.0 => (raw_duration / q).ceil().max(1.0) * q,
        _ => raw_duration,
    };
    let amplitude = 2.0 * rot.angle / (duration * coupling_abs);

    let phi = s * (beta - rot.phase - PI / 2.0) + omega * params.time_offset;
    let pp = params.points_per_period.max(4);
    let periods = duration * omega / (2.0 * PI);
    let segments = ((periods * pp as f64).round() as usize).max(1);
    let dt = duration / segments as f64;
    // bit-exact cycling: segment m carries cos(2π(m+1/2)/pp + φ)
    let cycle: Vec<f64> = (0..pp)
        .map(|i| amplitude * (2.0 * PI * (i as f64 + 0.5) / pp as f64 + phi).cos())
        .collect();

    Ok(Pulse {
        rotation: rot,
        n,
        amplitude,
        omega,
        cosine_phase: phi,
        duration,
        dt,
        segments,
        cycle,
    })
}

/// Exact propagator of a pulse in its frame, using the periodic structure:
/// one eigendecomposition per distinct sample and binary exponentiation of
/// the one-period product.
pub fn pulse_unitary(pulse: &Pulse, drift: &[f64], coupling: &CMatrix) -> CMatrix {
    let m = drift.len();
    if pulse.segments == 0 {
        return CMatrix::identity(m, m);
    }
    let mut cache = SegmentCache::new(drift.to_vec(), coupling.clone(), 1.0);
    let pp = pulse.cycle.len();
    let full_cycles = pulse.segments / pp;
    let remainder = pulse.segments % pp;

    let mut period = CMatrix::identity(m, m);
    for i in 0..pp.min(pulse.segments) {
        period = cache.unitary(pulse.cycle[i], pulse.dt) * period;
    }
    let mut acc = if pulse.segments >= pp {
        matrix_power(&period, full_cycles)
    } else {
        CMatrix::identity(m, m)
    };
    if pulse.segments < pp {
        acc = CMatrix::identity(m, m);
        for i in 0..pulse.segments {
            acc = cache.unitary(pulse.cycle[i], pulse.dt) * acc;
        }
        return acc;
    }
    for i in 0..remainder {
        acc = cache.unitary(pulse.cycle[i], pulse.dt) * acc;
    }
    acc
}

/// Newton-Schulz projection onto the unitary manifold: one step maps a
/// defect δ to O(δ²). Repeated squaring would otherwise amplify roundoff
/// linearly in the cycle count.
fn unitarize(u: &mut CMatrix) {
    let m = u.nrows();
    for _ in 0..2 {
        let correction = CMatrix::identity(m, m) * c64(3.0, 0.0) - u.adjoint() * &*u;
        *u = &*u * correction * c64(0.5, 0.0);
    }
}

fn matrix_power(u: &CMatrix, mut e: usize) -> CMatrix {
    let m = u.nrows();
    let mut base = u.clone();
    let mut acc = CMatrix::identity(m, m);
    while e > 0 {
        if e & 1 == 1 {
            acc = &base * &acc;
            unitarize(&mut acc);
        }
        base = &base * base.clone();
        unitarize(&mut base);
        e >>= 1;
    }
    acc
}

/// Rotating-wave target of a pulse: drift phases over the duration times
/// the ideal planar rotation.
pub fn pulse_target(pulse: &Pulse, drift: &[f64]) -> CMatrix {
    let m = drift.len();
    let phases = CVector::from_fn(m, |i, _| {
        let th = -drift[i] * pulse.duration;
        c64(th.cos(), th.sin())
    });
    let mut rot = CMatrix::identity(m, m);
    if pulse.rotation.angle != 0.0 {
        rot = pulse.rotation.matrix(m);
    }
    CMatrix::from_diagonal(&phases) * rot
}

/// Sup over columns `c ≤ n1` of the `‖·‖_(3)`-weighted defect between the
/// realized pulse propagator and its rotating-wave target.
pub fn pulse_error(pulse: &Pulse, drift: &[f64], coupling: &CMatrix, n1: usize) -> f64 {
    let gamma = pulse_unitary(pulse, drift, coupling);
    let target = pulse_target(pulse, drift);
    let m = drift.len();
    let mut worst = 0.0f64;
    for c_idx in 0..n1.min(m) {
        let mut acc = 0.0;
        for r in 0..m {
            let d = gamma[(r, c_idx)] - target[(r, c_idx)];
            acc += ((r + 1) as f64).powi(6) * d.norm_sqr();
        }
        worst = worst.max(acc.sqrt());
    }
    worst
}

/// Escalation and acceptance knobs for the global stage.
#[derive(Debug, Clone)]
pub struct GlobalOptions {
    /// Target sup `‖·‖_(3)` error over the steered states.
    pub epsilon: f64,
    /// First amplitude index tried per factor.
    pub n_start: usize,
    /// Largest amplitude index before giving up.
    pub n_budget: usize,
    pub pulse: PulseParams,
}

impl Default for GlobalOptions {
    fn default() -> Self {
        Self { epsilon: 0.05, n_start: 4, n_budget: 512, pulse: PulseParams::default() }
    }
}

/// One synthesized factor of a global steering run.
#[derive(Debug, Clone, Serialize)]
pub struct FactorSynthesis {
    pub rotation: PlanarRotation,
    pub n: usize,
    pub factor_error: f64,
    pub t_start: f64,
    pub duration: f64,
    /// Segment index range of this factor in the concatenated signal.
    pub segment_range: (usize, usize),
    pub info: PulseInfo,
}

/// Result of a global approximate steering run.
#[derive(Debug, Clone)]
pub struct GlobalReport {
    pub n1: usize,
    pub factors: Vec<FactorSynthesis>,
    pulses: Vec<Pulse>,
    /// Propagator over the concatenated pulses in the φ-basis (the
    /// reversed-dynamics propagator when `reversed` is set).
    pub unitary: CMatrix,
    /// Per-target `‖Γψ_j − ψ_j-target‖_(3)`.
    pub achieved_errors: Vec<f64>,
    pub total_time: f64,
    pub reversed: bool,
}

impl GlobalReport {
    /// Materialize the concatenated control signal (offset `u0 = 0`). For a
    /// reversed report this is the reversed-dynamics control; its
    /// time-flipped version `signal().reversed()` drives the forward system.
    pub fn signal(&self) -> ControlSignal {
        let mut segments = Vec::new();
        for p in &self.pulses {
            for mth in 0..p.segments {
                segments.push(Segment { dt: p.dt, value: p.value(mth) });
            }
        }
        ControlSignal::new(0.0, segments).expect("pulse segments are valid")
    }
}

/// Global approximate steering from the eigenmodes `{φ_j}_{j≤N}`.
pub fn steer_global(
    b: &ControlOperator,
    targets: &[WaveFunction],
    options: &GlobalOptions,
) -> Result<GlobalReport> {
    let m = b.modes();
    let basis = BasisTruncation::new(m)?;
    let initial: Vec<WaveFunction> =
        (1..=targets.len()).map(|j| basis.mode_state(j)).collect::<Result<_>>()?;
    steer_global_from(b, &initial, targets, false, options)
}

/// Global approximate steering between arbitrary orthonormal families, in
/// forward or reversed dynamics. The pipeline runs on the unperturbed
/// spectrum where revival-quantized pulses concatenate without drift phases.
pub fn steer_global_from(
    b: &ControlOperator,
    initial: &[WaveFunction],
    targets: &[WaveFunction],
    reversed: bool,
    options: &GlobalOptions,
) -> Result<GlobalReport> {
    let m = b.modes();
    let n = targets.len();
    if n == 0 || initial.len() != n {
        return Err(SteerError::DimensionMismatch { expected: n, got: initial.len() });
    }
    check_orthonormal(initial, "initial")?;
    check_orthonormal(targets, "target")?;

    let sign = if reversed { -1.0 } else { 1.0 };
    let drift: Vec<f64> = (1..=m).map(|kk| sign * lambda(kk)).collect();
    let coupling = b.matrix() * c64(sign, 0.0);

    // smallest enlarged dimension with small tails and a connected graph;
    // at least one completion column is kept so the determinant fix never
    // touches a steered column
    let eps = options.epsilon;
    let mut chosen: Option<(usize, AdmissibleTransitions)> = None;
    for n1 in (n + 1).max(2)..=m {
        let tail_ok = initial.iter().chain(targets).all(|psi| {
            let mut tail = 0.0;
            for kk in n1..m {
                tail += ((kk + 1) as f64).powi(6) * psi.coeffs()[kk].norm_sqr();
            }
            tail.sqrt() < eps / 4.0
        });
        if !tail_ok {
            continue;
        }
        if let Ok(tr) = admissible_transitions_in(&drift, &coupling, n1) {
            chosen = Some((n1, tr));
            break;
        }
    }
    let Some((n1, transitions)) = chosen else {
        return Err(SteerError::InvalidScenario(
            "no enlarged dimension with small target tails and a connected transition graph".into(),
        ));
    };

    // SU(N1) rotation mapping the projected initial family to the projected
    // target family via Gram-Schmidt completions
    let project = |family: &[WaveFunction]| -> CMatrix {
        CMatrix::from_fn(n1, n, |r, ccc| family[ccc].coeffs()[r])
    };
    let ui = complete_orthonormal(&project(initial), n1)?;
    let mut ut = complete_orthonormal(&project(targets), n1)?;
    // det has unit modulus; absorb its phase into a completion column of Ut
    // so the map on the steered family is untouched (n1 > n guarantees the
    // last column is a completion column)
    let det = determinant(&(&ut * ui.adjoint()));
    let fix = det.conj() / c64(det.norm(), 0.0);
    for r in 0..n1 {
        ut[(r, n1 - 1)] *= fix;
    }
    let rot = ut * ui.adjoint();

    let factors_list = su_decompose(&rot, &transitions)?;
    let p = factors_list.len().max(1);
    let per_factor = eps / (2.0 * p as f64);

    let mut pulses = Vec::with_capacity(factors_list.len());
    let mut factors = Vec::with_capacity(factors_list.len());
    let mut gamma = CMatrix::identity(m, m);
    let mut t_acc = 0.0;
    let mut seg_acc = 0usize;
    for rotation in &factors_list {
        let mut n_amp = options.n_start.max(1);
        let mut pp = options.pulse.points_per_period;
        let mut best: Option<(Pulse, f64)> = None;
        let mut prev_err = f64::INFINITY;
        loop {
            let params = PulseParams {
                time_offset: t_acc,
                points_per_period: pp,
                ..options.pulse.clone()
            };
            let pulse = periodic_pulse(&transitions, rotation, n_amp, &drift, &coupling, &params)?;
            let err = pulse_error(&pulse, &drift, &coupling, n1);
            let better = best.as_ref().is_none_or(|(_, e)| err < *e);
            if better {
                best = Some((pulse, err));
            }
            if best.as_ref().unwrap().1 < per_factor {
                break;
            }
            // when doubling n stops helping, the floor is the sampling
            // resolution of the cosine: refine the grid instead
            let stalled = err > 0.6 * prev_err;
            prev_err = err;
            if (stalled || n_amp >= options.n_budget) && pp < 8192 {
                pp *= 2;
                continue;
            }
            if n_amp >= options.n_budget {
                return Err(SteerError::PulseBudget {
                    n_max: options.n_budget,
                    best: best.unwrap().1,
                    target: per_factor,
                });
            }
            n_amp *= 2;
        }
        let (pulse, err) = best.unwrap();
        gamma = pulse_unitary(&pulse, &drift, &coupling) * gamma;
        factors.push(FactorSynthesis {
            rotation: pulse.rotation,
            n: pulse.n,
            factor_error: err,
            t_start: t_acc,
            duration: pulse.duration,
            segment_range: (seg_acc, seg_acc + pulse.segments),
            info: pulse.info(),
        });
        t_acc += pulse.duration;
        seg_acc += pulse.segments;
        pulses.push(pulse);
    }

    let achieved_errors = (0..n)
        .map(|jj| {
            let steered = &gamma * initial[jj].coeffs();
            let mut acc = 0.0;
            for r in 0..m {
                let d = steered[r] - targets[jj].coeffs()[r];
                acc += ((r + 1) as f64).powi(6) * d.norm_sqr();
            }
            acc.sqrt()
        })
        .collect();

    Ok(GlobalReport {
        n1,
        factors,
        pulses,
        unitary: gamma,
        achieved_errors,
        total_time: t_acc,
        reversed,
    })
}

fn check_orthonormal(family: &[WaveFunction], what: &str) -> Result<()> {
    for (i, a) in family.iter().enumerate() {
        for (jj, bb) in family.iter().enumerate() {
            let g = a.inner(bb);
            let expect = if i == jj { 1.0 } else { 0.0 };
            if (g - c64(expect, 0.0)).norm() > 1e-8 {
                return Err(SteerError::InvalidScenario(format!(
                    "{what} family is not orthonormal at ({},{})",
                    i + 1,
                    jj + 1
                )));
            }
        }
    }
    Ok(())
}

/// Extend `block` (n1 × n) to a full n1 × n1 unitary: orthonormalize the
/// given columns *without re-phasing them* (the leading columns are steering
/// targets and must be preserved as closely as possible), then append basis
/// candidates.
fn complete_orthonormal(block: &CMatrix, n1: usize) -> Result<CMatrix> {
    let n = block.ncols();
    let mut cols: Vec<CVector> = Vec::with_capacity(n1);
    let sigma_max = block.clone().svd(false, false).singular_values[0];
    let floor = 1e-10 * sigma_max.max(f64::MIN_POSITIVE);
    for j in 0..n {
        let mut v = block.column(j).clone_owned();
        for _ in 0..2 {
            for e in &cols {
                let pr = e.dotc(&v);
                v -= e * pr;
            }
        }
        let norm = v.norm();
        if norm <= floor {
            return Err(SteerError::DegenerateFamily { index: j, residual: norm });
        }
        v /= c64(norm, 0.0);
        cols.push(v);
    }
    for cand in 0..n1 {
        if cols.len() == n1 {
            break;
        }
        let mut v = CVector::zeros(n1);
        v[cand] = c64(1.0, 0.0);
        for _ in 0..2 {
            for e in &cols {
                let pr = e.dotc(&v);
                v -= e * pr;
            }
        }
        let norm = v.norm();
        if norm > 0.5 {
            v /= c64(norm, 0.0);
            cols.push(v);
        }
    }
    if cols.len() != n1 {
        return Err(SteerError::InvalidScenario("orthonormal completion failed".into()));
    }
    let mut out = CMatrix::zeros(n1, n1);
    for (j, v) in cols.iter().enumerate() {
        out.set_column(j, v);
    }
    Ok(out)
}

/// One stage of a concatenated control, kept in its compact form: local
/// stages are dense sampled signals, global stages are pulse trains whose
/// segment lists can run into the millions and are only materialized on
/// demand.
#[derive(Debug, Clone)]
pub enum StageSignal {
    Dense(ControlSignal),
    PulseTrain { pulses: Vec<Pulse>, flipped: bool, u0: f64 },
}

impl StageSignal {
    pub fn segment_count(&self) -> usize {
        match self {
            StageSignal::Dense(s) => s.segments().len(),
            StageSignal::PulseTrain { pulses, .. } => pulses.iter().map(|p| p.segments).sum(),
        }
    }

    pub fn duration(&self) -> f64 {
        match self {
            StageSignal::Dense(s) => s.total_time(),
            StageSignal::PulseTrain { pulses, .. } => pulses.iter().map(|p| p.duration).sum(),
        }
    }

    /// Materialize the stage as explicit segments with the offset folded in.
    pub fn materialize(&self) -> Vec<Segment> {
        match self {
            StageSignal::Dense(s) => s
                .segments()
                .iter()
                .map(|seg| Segment { dt: seg.dt, value: seg.value + s.u0 })
                .collect(),
            StageSignal::PulseTrain { pulses, flipped, u0 } => {
                let mut segments = Vec::with_capacity(self.segment_count());
                for p in pulses {
                    for m in 0..p.segments {
                        segments.push(Segment { dt: p.dt, value: p.value(m) + u0 });
                    }
                }
                if *flipped {
                    segments.reverse();
                }
                segments
            }
        }
    }
}

/// Result of the global+local concatenation: a control driving `N` states
/// exactly onto the targets up to per-state phases.
#[derive(Debug, Clone)]
pub struct ExactSteering {
    /// The four stages of the forward control in playback order.
    pub stages: Vec<(String, StageSignal)>,
    /// Phases `χ_j` with `Γ ψ_j¹ = e^{iχ_j} ψ_j²`.
    pub phases: Vec<f64>,
    /// `‖Γψ_j¹ − e^{iχ_j}ψ_j²‖` per state, from the composed propagator.
    pub state_defects: Vec<f64>,
    /// Composed forward propagator in the φ-basis.
    pub unitary: CMatrix,
    pub global_errors: (Vec<f64>, Vec<f64>),
    pub newton_iterations: (usize, usize),
}

impl ExactSteering {
    pub fn segment_count(&self) -> usize {
        self.stages.iter().map(|(_, s)| s.segment_count()).sum()
    }

    pub fn total_time(&self) -> f64 {
        self.stages.iter().map(|(_, s)| s.duration()).sum()
    }

    /// Concatenate all stages into one explicit signal (`u0 = 0`, offsets
    /// folded into values). Refuses to build signals beyond `max_segments`.
    pub fn materialize_control(&self, max_segments: usize) -> Result<ControlSignal> {
        let count = self.segment_count();
        if count > max_segments {
            return Err(SteerError::InvalidScenario(format!(
                "concatenated control has {count} segments, beyond the requested cap {max_segments}; \
                 use the stage descriptors instead"
            )));
        }
        let mut segments = Vec::with_capacity(count);
        for (_, stage) in &self.stages {
            segments.extend(stage.materialize());
        }
        ControlSignal::new(0.0, segments)
    }
}

/// Tuning for [`steer_states_exact`].
#[derive(Debug, Clone)]
pub struct ExactOptions {
    pub global: GlobalOptions,
    pub newton: NewtonOptions,
    /// Horizon of each local stage.
    pub t_local: f64,
}

impl Default for ExactOptions {
    fn default() -> Self {
        Self {
            global: GlobalOptions { epsilon: 0.02, ..GlobalOptions::default() },
            newton: NewtonOptions::default(),
            t_local: 0.5,
        }
    }
}

/// Steer `N` states exactly (up to phases): global approximate stages bring
/// both the initial family and the target family onto the perturbed modes,
/// exact local stages (one of them for the reversed dynamics) close the
/// remaining gap, and the four controls concatenate into one signal.
///
/// The local stages need the perturbed frame `spec` with its resonance-free
/// gap structure; the global stages run on the unperturbed spectrum.
pub fn steer_states_exact(
    b: &ControlOperator,
    spec: &PerturbedSpectrum,
    initial: &[WaveFunction],
    targets: &[WaveFunction],
    options: &ExactOptions,
) -> Result<ExactSteering> {
    let m = b.modes();
    let n = targets.len();
    if initial.len() != n || n == 0 {
        return Err(SteerError::DimensionMismatch { expected: n, got: initial.len() });
    }
    let basis = BasisTruncation::new(m)?;
    let frame_states: Vec<WaveFunction> = (0..n)
        .map(|j| WaveFunction::new(spec.eigenvectors().column(j).clone_owned(), basis))
        .collect::<Result<_>>()?;

    // stage A: drive the initial family near the perturbed modes (forward)
    let g1 = steer_global_from(b, initial, &frame_states, false, &options.global)?;
    let reached: Vec<WaveFunction> = (0..n)
        .map(|j| {
            let c = &g1.unitary * initial[j].coeffs();
            WaveFunction::new(c, basis)
        })
        .collect::<Result<_>>()?;

    // stage B: reversed-dynamics local solve onto the reached states; its
    // time-flipped control maps them exactly to the perturbed modes
    let rev_frame = SteeringFrame::reversed(spec, b);
    let l1 = steer_states_newton(&rev_frame, &reached, options.t_local, &options.newton)?;

    // stage C: reversed-dynamics global stage for the target family
    let g2 = steer_global_from(b, targets, &frame_states, true, &options.global)?;
    let xi: Vec<WaveFunction> = (0..n)
        .map(|j| {
            let c = &g2.unitary * targets[j].coeffs();
            WaveFunction::new(c, basis)
        })
        .collect::<Result<_>>()?;

    // stage D: forward local solve from the perturbed modes onto ξ
    let fwd_frame = SteeringFrame::forward(spec, b);
    let l2 = steer_states_newton(&fwd_frame, &xi, options.t_local, &options.newton)?;

    // compose: Γ = Γ̃_{G2}† · Γ_{L2} · Γ̃_{L1}† · Γ_{G1}
    let v = spec.eigenvectors();
    let gamma_l1 = v * &l1.frame_propagator * v.adjoint();
    let gamma_l2 = v * &l2.frame_propagator * v.adjoint();
    let unitary = g2.unitary.adjoint() * gamma_l2 * gamma_l1.adjoint() * &g1.unitary;

    // concatenated forward control: G1, time-flipped L1, L2, time-flipped G2
    let stages = vec![
        (
            "global-forward".to_string(),
            StageSignal::PulseTrain { pulses: g1.pulses.clone(), flipped: false, u0: 0.0 },
        ),
        ("local-reversed-flipped".to_string(), StageSignal::Dense(l1.control.reversed())),
        ("local-forward".to_string(), StageSignal::Dense(l2.control.clone())),
        (
            "global-reversed-flipped".to_string(),
            StageSignal::PulseTrain { pulses: g2.pulses.clone(), flipped: true, u0: 0.0 },
        ),
    ];

    let phases: Vec<f64> = (0..n).map(|j| l1.phases[j] - l2.phases[j]).collect();
    let state_defects: Vec<f64> = (0..n)
        .map(|j| {
            let steered = &unitary * initial[j].coeffs();
            let phase = c64(phases[j].cos(), phases[j].sin());
            (steered - targets[j].coeffs() * phase).norm()
        })
        .collect();

    Ok(ExactSteering {
        stages,
        phases,
        state_defects,
        unitary,
        global_errors: (g1.achieved_errors, g2.achieved_errors),
        newton_iterations: (l1.iterations, l2.iterations),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::operators::build_x_squared;
    use crate::perturbation::perturbed_spectrum;
    use crate::spectral::BasisTruncation;
    use rand::{Rng, SeedableRng};

    fn x2(m: usize) -> ControlOperator {
        build_x_squared(BasisTruncation::new(m).unwrap())
    }

    fn random_su(n: usize, rng: &mut impl Rng) -> CMatrix {
        let raw = CMatrix::from_fn(n, n, |_, _| {
            c64(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let q = crate::spectral::gram_schmidt_columns(&raw, 1e-10).unwrap();
        let det = determinant(&q);
        let fix = det.conj() / c64(det.norm(), 0.0);
        let mut q = q;
        for r in 0..n {
            q[(r, n - 1)] *= fix;
        }
        q
    }

    #[test]
    fn degenerate_pair_is_excluded_at_zero_perturbation() {
        let b = x2(16);
        let tr = admissible_transitions(&b, 8).unwrap();
        assert!(tr.find(7, 1).is_none(), "pair (7,1) shares its frequency with (8,4)");
        assert!(tr.find(2, 1).is_some());
        assert!(tr.connected);
    }

    #[test]
    fn perturbed_frame_makes_low_pairs_admissible() {
        let b = x2(16);
        let spec = perturbed_spectrum(&b, 0.1).unwrap();
        let tr = admissible_transitions_perturbed(&spec, &b, 4).unwrap();
        // every coupled pair below N1 = 4 is admissible after the resonance
        // lift
        for k in 1..=4usize {
            for j in (k + 1)..=4 {
                assert!(tr.find(j, k).is_some(), "pair ({j},{k}) missing");
            }
        }
    }

    #[test]
    fn diagonal_coupling_has_no_chain() {
        let id = ControlOperator::new(CMatrix::identity(8, 8), "id").unwrap();
        let err = admissible_transitions(&id, 4).unwrap_err();
        assert!(matches!(err, SteerError::NoChain { .. }));
    }

    #[test]
    fn lie_closure_dimensions() {
        let b = x2(12);
        for n1 in [2usize, 3, 4] {
            let tr = admissible_transitions(&b, n1).unwrap();
            let closure = lie_closure(&tr, 2);
            assert_eq!(closure.dimension, n1 * n1 - 1, "su({n1}) dimension");
        }
        let empty = AdmissibleTransitions::empty(3);
        assert_eq!(lie_closure(&empty, 2).dimension, 0);
    }

    #[test]
    fn single_pair_bracket_reaches_su2() {
        let mut tr = AdmissibleTransitions::empty(2);
        tr.pairs.push(Transition { j: 2, k: 1, frequency: 3.0, coupling: c64(0.1, 0.0) });
        tr.adjacency = vec![vec![], vec![2], vec![1]];
        tr.connected = true;
        let closure = lie_closure(&tr, 2);
        assert_eq!(closure.dimension, 3);
    }

    #[test]
    fn su_decompose_identity_is_empty() {
        let b = x2(8);
        let tr = admissible_transitions(&b, 3).unwrap();
        let factors = su_decompose(&CMatrix::identity(3, 3), &tr).unwrap();
        assert!(factors.is_empty());
    }

    #[test]
    fn su_decompose_fixed_point() {
        let b = x2(8);
        let tr = admissible_transitions(&b, 3).unwrap();
        let alpha = 0.8;
        let single = PlanarRotation::new(2, 1, alpha, 0.0);
        let factors = su_decompose(&single.matrix(3), &tr).unwrap();
        assert_eq!(factors.len(), 1);
        assert!((factors[0].angle - alpha).abs() < 1e-12);
        let g_in = single.generator(3);
        let g_out = factors[0].generator(3);
        assert!((g_in - g_out).map(|z| z.norm()).max() < 1e-12);
    }

    #[test]
    fn su_decompose_reconstructs_random_targets() {
        let b = x2(12);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(41);
        for n1 in [3usize, 4] {
            let tr = admissible_transitions(&b, n1).unwrap();
            for _ in 0..25 {
                let r = random_su(n1, &mut rng);
                let factors = su_decompose(&r, &tr).unwrap();
                let rec = rotation_product(&factors, n1);
                let err = (rec - &r).map(|z| z.norm()).max();
                assert!(err < 1e-9, "reconstruction error {err:.3e} for SU({n1})");
                for f in &factors {
                    assert!(tr.find(f.j, f.k).is_some(), "factor on non-admissible pair");
                    assert!(f.angle >= 0.0 && (0.0..2.0 * PI).contains(&f.phase));
                }
            }
        }
    }

    #[test]
    fn su_decompose_rejects_bad_input() {
        let b = x2(8);
        let tr = admissible_transitions(&b, 3).unwrap();
        let not_unitary = CMatrix::identity(3, 3) * c64(1.1, 0.0);
        assert!(matches!(su_decompose(&not_unitary, &tr), Err(SteerError::NotUnitary(_))));
        let mut not_su = CMatrix::identity(3, 3);
        not_su[(0, 0)] = c64(0.0, 1.0);
        assert!(matches!(su_decompose(&not_su, &tr), Err(SteerError::NotSpecialUnitary(_))));
    }

    #[test]
    fn pulse_bounds_track_the_construction() {
        let m = 12;
        let b = x2(m);
        let tr = admissible_transitions(&b, 3).unwrap();
        let drift: Vec<f64> = (1..=m).map(lambda).collect();
        let rot = PlanarRotation::new(2, 1, 0.9, 0.3);
        let params = PulseParams::default();
        for n in [4usize, 8, 16] {
            let pulse = periodic_pulse(&tr, &rot, n, &drift, b.matrix(), &params).unwrap();
            let info = pulse.info();
            // pulse area is exact and independent of n: T·a = 2α/|B_jk|
            let expect = 2.0 * 0.9 / tr.find(2, 1).unwrap().coupling.norm();
            let area = pulse.duration * pulse.amplitude;
            assert!((area - expect).abs() < 1e-9, "area {area} vs {expect}");
            // the sampled sup sits just below the amplitude (midpoint grid)
            assert!(info.linf <= pulse.amplitude + 1e-15);
            assert!(info.t_linf > 0.995 * expect && info.t_linf <= expect + 1e-12);
            // amplitude within the quantization margin of A0/n
            let a0 = 0.3 / b.operator_norm();
            assert!(pulse.amplitude <= a0 / n as f64 + 1e-12);
            assert!(pulse.amplitude >= 0.8 * a0 / n as f64);
            // durations are revival-quantized
            let r = pulse.duration / REVIVAL_TIME;
            assert!((r - r.round()).abs() < 1e-9, "duration {} not quantized", pulse.duration);
        }
        // zero angle gives an empty pulse
        let zero = PlanarRotation::new(2, 1, 0.0, 0.0);
        let pulse = periodic_pulse(&tr, &zero, 4, &drift, b.matrix(), &params).unwrap();
        assert_eq!(pulse.segments, 0);
        assert_eq!(pulse.duration, 0.0);
    }

    #[test]
    fn pulse_converges_to_its_rotation() {
        let m = 12;
        let b = x2(m);
        let tr = admissible_transitions(&b, 3).unwrap();
        let drift: Vec<f64> = (1..=m).map(lambda).collect();
        let rot = PlanarRotation::new(2, 1, std::f64::consts::FRAC_PI_3, 0.7);
        let params = PulseParams::default();
        let mut errors = Vec::new();
        for n in [4usize, 8, 16, 32] {
            let pulse = periodic_pulse(&tr, &rot, n, &drift, b.matrix(), &params).unwrap();
            errors.push(pulse_error(&pulse, &drift, b.matrix(), 3));
        }
        for w in errors.windows(2) {
            assert!(w[1] < w[0], "pulse errors not decreasing: {errors:?}");
        }
        assert!(errors.last().unwrap() < &2e-3, "final error {:?}", errors.last());
    }

    #[test]
    fn pulse_rejects_non_admissible_pairs() {
        let m = 16;
        let b = x2(m);
        let tr = admissible_transitions(&b, 8).unwrap();
        let drift: Vec<f64> = (1..=m).map(lambda).collect();
        let rot = PlanarRotation::new(7, 1, 0.4, 0.0);
        let err = periodic_pulse(&tr, &rot, 4, &drift, b.matrix(), &PulseParams::default());
        assert!(matches!(err, Err(SteerError::NotAdmissible { j: 7, k: 1 })));
    }

    #[test]
    fn global_steering_reaches_a_rotated_family() {
        let m = 12;
        let b = x2(m);
        let basis = BasisTruncation::new(m).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(4242);
        let r3 = random_su(3, &mut rng);
        // targets: SU(3) rotation of {φ1, φ2} inside the first three modes
        let targets: Vec<WaveFunction> = (0..2)
            .map(|j| {
                let mut c = CVector::zeros(m);
                for r in 0..3 {
                    c[r] = r3[(r, j)];
                }
                WaveFunction::new(c, basis).unwrap()
            })
            .collect();
        let options = GlobalOptions { epsilon: 0.05, ..GlobalOptions::default() };
        let report = steer_global(&b, &targets, &options).unwrap();
        for (j, err) in report.achieved_errors.iter().enumerate() {
            assert!(err < &0.05, "state {j} error {err:.3e}");
        }
        assert!(report.n1 >= 3);
        // factor manifest covers the emitted signal
        let signal = report.signal();
        let last = report.factors.last().unwrap();
        assert_eq!(last.segment_range.1, signal.segments().len());
        let rel = (signal.total_time() - report.total_time).abs() / report.total_time.max(1.0);
        assert!(rel < 1e-9, "total time drift {rel:.3e}");
    }

    #[test]
    fn trivial_global_target_is_free() {
        let m = 8;
        let b = x2(m);
        let basis = BasisTruncation::new(m).unwrap();
        let targets: Vec<WaveFunction> =
            (1..=2).map(|j| basis.mode_state(j).unwrap()).collect();
        let report = steer_global(&b, &targets, &GlobalOptions::default()).unwrap();
        assert!(report.factors.is_empty());
        for err in &report.achieved_errors {
            assert!(err < &1e-12);
        }
    }

    #[test]
    fn exact_steering_concatenation() {
        // a small in-block rotation keeps pulse durations short enough to
        // materialize the concatenated signal and re-propagate it
        let m = 12;
        let b = x2(m);
        let spec = perturbed_spectrum(&b, 0.1).unwrap();
        let basis = BasisTruncation::new(m).unwrap();
        let small = PlanarRotation::new(2, 1, 0.15, 0.4).matrix(3);
        let initial: Vec<WaveFunction> =
            (1..=2).map(|j| basis.mode_state(j).unwrap()).collect();
        let targets: Vec<WaveFunction> = (0..2)
            .map(|j| {
                let mut c = CVector::zeros(m);
                for r in 0..3 {
                    c[r] = small[(r, j)];
                }
                WaveFunction::new(c, basis).unwrap()
            })
            .collect();
        let options = ExactOptions {
            newton: NewtonOptions { segments: 1024, ..NewtonOptions::default() },
            ..ExactOptions::default()
        };
        let out = steer_states_exact(&b, &spec, &initial, &targets, &options).unwrap();
        for (j, d) in out.state_defects.iter().enumerate() {
            assert!(d < &1e-6, "state {j} defect {d:.3e}");
        }

        // the composed unitary agrees with re-propagating the emitted signal
        let control = out.materialize_control(8_000_000).unwrap();
        let rel = (control.total_time() - out.total_time()).abs() / out.total_time().max(1.0);
        assert!(rel < 1e-9, "total time drift {rel:.3e}");
        let result = crate::propagator::propagate(&b, &control, &initial).unwrap();
        for j in 0..2 {
            let diff =
                (result.final_states[j].coeffs() - &out.unitary * initial[j].coeffs()).norm();
            assert!(diff < 1e-8, "signal/composition mismatch {diff:.3e}");
        }
    }

    #[test]
    fn exact_steering_random_rotation() {
        let m = 12;
        let b = x2(m);
        let spec = perturbed_spectrum(&b, 0.1).unwrap();
        let basis = BasisTruncation::new(m).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let r3 = random_su(3, &mut rng);
        let initial: Vec<WaveFunction> =
            (1..=2).map(|j| basis.mode_state(j).unwrap()).collect();
        let targets: Vec<WaveFunction> = (0..2)
            .map(|j| {
                let mut c = CVector::zeros(m);
                for r in 0..3 {
                    c[r] = r3[(r, j)];
                }
                WaveFunction::new(c, basis).unwrap()
            })
            .collect();
        let options = ExactOptions {
            newton: NewtonOptions { segments: 1024, ..NewtonOptions::default() },
            ..ExactOptions::default()
        };
        let out = steer_states_exact(&b, &spec, &initial, &targets, &options).unwrap();
        for (j, d) in out.state_defects.iter().enumerate() {
            assert!(d < &1e-6, "state {j} defect {d:.3e}");
        }
        // unitary composition stays unitary
        let udef = (&out.unitary * out.unitary.adjoint() - CMatrix::identity(m, m))
            .map(|z| z.norm())
            .max();
        assert!(udef < 1e-9);
    }
}
