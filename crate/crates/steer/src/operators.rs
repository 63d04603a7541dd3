//! Control operators in the sine eigenbasis and numerical certificates for
//! the coupling, resonance and rational-relation assumptions.
//!
//! Every certificate is a statement at the stored truncation `M` and carries
//! `M` in its serialized form so no claim can be quoted without its
//! finite-dimensional context.

use std::f64::consts::PI;

use serde::Serialize;

use crate::error::{Result, SteerError};
use crate::spectral::{lambda, BasisTruncation};
use crate::{c64, C64, CMatrix, CVector};

/// Hermiticity tolerance for constructed operators.
pub const HERMITICITY_TOL: f64 = 1e-12;
/// Coupling certificates treat `k³|B_{k,j}|` below this as vanishing.
pub const COUPLING_THRESHOLD: f64 = 1e-12;
/// Resonance combinations with |D| below this count as failures.
pub const RESONANCE_TOL: f64 = 1e-10;

/// A bounded symmetric control operator in the truncated basis,
/// `B_{k,j} = ⟨φ_k, B φ_j⟩`.
#[derive(Debug, Clone)]
pub struct ControlOperator {
    matrix: CMatrix,
    label: String,
}

impl ControlOperator {
    /// Wrap a matrix, enforcing Hermiticity within [`HERMITICITY_TOL`].
    pub fn new(matrix: CMatrix, label: impl Into<String>) -> Result<Self> {
        let defect = hermiticity_defect(&matrix);
        if defect > HERMITICITY_TOL {
            return Err(SteerError::InvalidScenario(format!(
                "operator matrix is not Hermitian: defect {defect:.3e}"
            )));
        }
        Ok(Self { matrix, label: label.into() })
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn modes(&self) -> usize {
        self.matrix.nrows()
    }

    /// Entry `⟨φ_k, B φ_j⟩` with 1-based mode indices.
    pub fn entry(&self, k: usize, j: usize) -> C64 {
        self.matrix[(k - 1, j - 1)]
    }

    /// Operator 2-norm (largest |eigenvalue|).
    pub fn operator_norm(&self) -> f64 {
        self.matrix
            .clone()
            .symmetric_eigen()
            .eigenvalues
            .iter()
            .fold(0.0f64, |acc, x| acc.max(x.abs()))
    }

    pub fn hermiticity_defect(&self) -> f64 {
        hermiticity_defect(&self.matrix)
    }
}

pub(crate) fn hermiticity_defect(m: &CMatrix) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..m.nrows() {
        for j in i..m.ncols() {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// Multiplication by x²: closed-form matrix validated against quadrature.
///
/// Diagonal entries are `1/3 − 1/(2k²π²)`; off-diagonal entries are
/// `2(−1)^{j+k}·(1/((j−k)²π²) − 1/((j+k)²π²))`, the exact value of
/// `2∫₀¹ x² sin(jπx) sin(kπx) dx`.
pub fn build_x_squared(basis: BasisTruncation) -> ControlOperator {
    let m = basis.modes();
    let mat = CMatrix::from_fn(m, m, |r, c| {
        let k = r + 1;
        let j = c + 1;
        c64(x_squared_entry(k, j), 0.0)
    });
    ControlOperator::new(mat, "x^2").expect("closed form is symmetric")
}

pub(crate) fn x_squared_entry(k: usize, j: usize) -> f64 {
    if k == j {
        let k2 = (k * k) as f64;
        1.0 / 3.0 - 1.0 / (2.0 * k2 * PI * PI)
    } else {
        let diff = (j as f64 - k as f64) * PI;
        let sum = (j as f64 + k as f64) * PI;
        let sign = if (j + k) % 2 == 0 { 1.0 } else { -1.0 };
        2.0 * sign * (1.0 / (diff * diff) - 1.0 / (sum * sum))
    }
}

/// Build the matrix of a multiplication operator `ψ ↦ μ(x)ψ` by composite
/// Gauss-Legendre quadrature with at least `quadrature_points` nodes.
///
/// Requires `quadrature_points ≥ 4M`. The result is symmetrized after
/// computation, so it is Hermitian by construction.
pub fn build_multiplication<F>(
    mu: F,
    basis: BasisTruncation,
    quadrature_points: usize,
) -> Result<ControlOperator>
where
    F: Fn(f64) -> f64,
{
    let m = basis.modes();
    if quadrature_points < 4 * m {
        return Err(SteerError::InvalidScenario(format!(
            "quadrature_points = {quadrature_points} too coarse: need at least 4M = {}",
            4 * m
        )));
    }
    const NODES_PER_PANEL: usize = 16;
    let panels = quadrature_points.div_ceil(NODES_PER_PANEL).max(2 * m);
    let (gl_nodes, gl_weights) = gauss_legendre_16();

    let total = panels * NODES_PER_PANEL;
    let mut xs = Vec::with_capacity(total);
    let mut ws = Vec::with_capacity(total);
    let h = 1.0 / panels as f64;
    for p in 0..panels {
        let a = p as f64 * h;
        for (t, w) in gl_nodes.iter().zip(gl_weights) {
            xs.push(a + 0.5 * h * (t + 1.0));
            ws.push(0.5 * h * w);
        }
    }

    let mut mu_w = Vec::with_capacity(total);
    for &x in &xs {
        let v = mu(x);
        if !v.is_finite() {
            return Err(SteerError::NonFiniteSample(x));
        }
        mu_w.push(v);
    }

    // sin table: row k-1 holds sin(kπ x_i) over all nodes
    let sins: Vec<Vec<f64>> = (1..=m)
        .map(|k| xs.iter().map(|&x| (k as f64 * PI * x).sin()).collect())
        .collect();

    let mut mat = CMatrix::zeros(m, m);
    for r in 0..m {
        for c in r..m {
            let mut acc = 0.0;
            for i in 0..total {
                acc += ws[i] * mu_w[i] * 2.0 * sins[r][i] * sins[c][i];
            }
            mat[(r, c)] = c64(acc, 0.0);
            mat[(c, r)] = c64(acc, 0.0);
        }
    }
    ControlOperator::new(mat, "multiplication")
}

/// 16-point Gauss-Legendre rule on [-1, 1], computed by Newton iteration on
/// the Legendre recurrence.
fn gauss_legendre_16() -> (Vec<f64>, [f64; 16]) {
    const N: usize = 16;
    let mut nodes = [0.0f64; N];
    let mut weights = [0.0f64; N];
    for i in 0..N {
        // Chebyshev initial guess
        let mut x = (PI * (i as f64 + 0.75) / (N as f64 + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp) = legendre(N, x);
            let dx = p / dp;
            x -= dx;
            if dx.abs() < 1e-15 {
                break;
            }
        }
        let (_, dp) = legendre(N, x);
        nodes[i] = x;
        weights[i] = 2.0 / ((1.0 - x * x) * dp * dp);
    }
    (nodes.to_vec(), weights)
}

/// Value and derivative of the Legendre polynomial P_n at x.
fn legendre(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let dp = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, dp)
}

/// The index set `I^N = {(j,k) : k ≤ N, j ≠ k}` truncated at `j ≤ jmax`.
#[derive(Debug, Clone, Serialize)]
pub struct IndexPairSet {
    pub n: usize,
    pub jmax: usize,
    pub pairs: Vec<(usize, usize)>,
}

pub fn index_pairs(n: usize, jmax: usize) -> IndexPairSet {
    let mut pairs = Vec::new();
    for k in 1..=n {
        for j in 1..=jmax {
            if j != k {
                pairs.push((j, k));
            }
        }
    }
    IndexPairSet { n, jmax, pairs }
}

/// Four mode indices with `(j,k), (l,m) ∈ I^N`, `(j,k) ≠ (l,m)` and
/// `j² − k² − l² + m² = 0` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct ResonanceQuadruple {
    pub j: usize,
    pub k: usize,
    pub l: usize,
    pub m: usize,
}

impl ResonanceQuadruple {
    pub fn holds(&self) -> bool {
        let (j, k, l, m) = (self.j as i64, self.k as i64, self.l as i64, self.m as i64);
        j * j - k * k - l * l + m * m == 0
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct CouplingWitness {
    pub k: usize,
    pub j: usize,
    pub value: f64,
}

/// Certificate for the coupling lower bound `|B_{k,j}| ≥ C_N / k³`.
#[derive(Debug, Clone, Serialize)]
pub struct CouplingCertificate {
    pub assumption: String,
    pub n: usize,
    pub m: usize,
    pub ok: bool,
    pub c_n: f64,
    pub threshold: f64,
    /// The argmin of k³|B_{k,j}| followed by any near-zero products.
    pub witness_values: Vec<CouplingWitness>,
}

/// Scan `k³·|B_{k,j}|` over `j ≤ N`, `k ≤ M` and report the minimum.
pub fn check_coupling_decay(b: &ControlOperator, n: usize) -> Result<CouplingCertificate> {
    let m = b.modes();
    if n > m || n == 0 {
        return Err(SteerError::InvalidIndex(n));
    }
    let mut c_n = f64::INFINITY;
    let mut argmin = (1, 1);
    let mut violations = Vec::new();
    for j in 1..=n {
        for k in 1..=m {
            let v = (k as f64).powi(3) * b.entry(k, j).norm();
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
        assumption: "coupling-decay".into(),
        n,
        m,
        ok,
        c_n,
        threshold: COUPLING_THRESHOLD,
        witness_values,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct ResonanceWitness {
    pub quadruple: ResonanceQuadruple,
    pub combination: f64,
}

/// Certificate for the diagonal non-resonance condition: for every exact
/// integer resonance `j² − k² − l² + m² = 0` the combination
/// `B_{jj} − B_{kk} − B_{ll} + B_{mm}` must stay away from zero.
#[derive(Debug, Clone, Serialize)]
pub struct ResonanceCertificate {
    pub assumption: String,
    pub n: usize,
    pub m: usize,
    pub jmax: usize,
    pub ok: bool,
    pub tol: f64,
    pub quadruples: Vec<ResonanceWitness>,
    pub failures: Vec<ResonanceWitness>,
}

/// Enumerate all resonance quadruples with indices ≤ jmax (exact integer
/// arithmetic) and evaluate the diagonal combination for each.
pub fn check_resonance_condition(
    b: &ControlOperator,
    n: usize,
    jmax: usize,
) -> Result<ResonanceCertificate> {
    let m = b.modes();
    if jmax > m {
        return Err(SteerError::InvalidIndex(jmax));
    }
    let mut quadruples = Vec::new();
    let mut failures = Vec::new();
    for k in 1..=n {
        for j in 1..=jmax {
            if j == k {
                continue;
            }
            for mm in 1..=n {
                for l in 1..=jmax {
                    if l == mm {
                        continue;
                    }
                    // count each unordered pair of pairs once
                    if (j, k) >= (l, mm) {
                        continue;
                    }
                    let q = ResonanceQuadruple { j, k, l, m: mm };
                    if !q.holds() {
                        continue;
                    }
                    let d = (b.entry(j, j) - b.entry(k, k) - b.entry(l, l) + b.entry(mm, mm)).re;
                    let w = ResonanceWitness { quadruple: q, combination: d };
                    if d.abs() <= RESONANCE_TOL {
                        failures.push(w.clone());
                    }
                    quadruples.push(w);
                }
            }
        }
    }
    let ok = failures.is_empty();
    Ok(ResonanceCertificate {
        assumption: "resonance-combinations".into(),
        n,
        m,
        jmax,
        ok,
        tol: RESONANCE_TOL,
        quadruples,
        failures,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct RelationWitness {
    /// Integer numerators `r_1..r_N` of the rational relation (r_0 = 0).
    pub relation: Vec<i64>,
    pub diagonal_sum: f64,
    /// Series sums `Σ r_j ⟨φ_j, B̃(m,j) φ_j⟩` for m = 1.. until one is nonzero.
    pub series_values: Vec<f64>,
    pub ok: bool,
}

/// Certificate for the rational-relation condition on diagonal entries.
#[derive(Debug, Clone, Serialize)]
pub struct RationalRelationCertificate {
    pub assumption: String,
    pub n: usize,
    pub m: usize,
    pub height: i64,
    pub ok: bool,
    pub tol: f64,
    pub relations_checked: usize,
    pub min_diagonal_sum: f64,
    /// Relations that needed the series fallback, or failed outright.
    pub witness_values: Vec<RelationWitness>,
}

/// Bounded certification of the rational-relation condition.
///
/// Since `λ_j = j²π²` with π² irrational, a rational relation
/// `r_0 + Σ r_j λ_j = 0` forces `r_0 = 0` and `Σ r_j j² = 0`; all primitive
/// integer vectors with numerators bounded by `height` satisfying that
/// constraint are enumerated. Each must give `Σ r_j B_{j,j} ≠ 0`, falling
/// back to the series terms `Σ r_j ⟨φ_j, B̃(m,j) φ_j⟩` for `m ≤ m_terms`.
pub fn check_assumption_a(
    b: &ControlOperator,
    n: usize,
    height: i64,
    m_terms: usize,
) -> Result<RationalRelationCertificate> {
    let m = b.modes();
    if n > m || n == 0 {
        return Err(SteerError::InvalidIndex(n));
    }
    if height < 1 {
        return Err(SteerError::InvalidScenario("height must be >= 1".into()));
    }
    let tol = RESONANCE_TOL;
    let relations = enumerate_relations(n, height);
    let mut ok = true;
    let mut min_abs = f64::INFINITY;
    let mut witnesses = Vec::new();
    for r in &relations {
        let s1: f64 = r
            .iter()
            .enumerate()
            .map(|(i, &ri)| ri as f64 * b.entry(i + 1, i + 1).re)
            .sum();
        min_abs = min_abs.min(s1.abs());
        if s1.abs() > tol {
            continue;
        }
        // diagonal sum vanished: consult the series terms
        let mut series = Vec::new();
        let mut passed = false;
        for mt in 1..=m_terms {
            let s2: f64 = r
                .iter()
                .enumerate()
                .map(|(i, &ri)| ri as f64 * b_tilde_diagonal(b, mt, i + 1))
                .sum();
            series.push(s2);
            if s2.abs() > tol {
                passed = true;
                break;
            }
        }
        if !passed {
            ok = false;
        }
        if witnesses.len() < 32 {
            witnesses.push(RelationWitness {
                relation: r.clone(),
                diagonal_sum: s1,
                series_values: series,
                ok: passed,
            });
        }
    }
    Ok(RationalRelationCertificate {
        assumption: "rational-relations".into(),
        n,
        m,
        height,
        ok,
        tol,
        relations_checked: relations.len(),
        min_diagonal_sum: if relations.is_empty() { f64::NAN } else { min_abs },
        witness_values: witnesses,
    })
}

/// Primitive integer vectors r with |r_i| ≤ height, Σ r_i·i² = 0, r ≠ 0,
/// first nonzero entry positive.
fn enumerate_relations(n: usize, height: i64) -> Vec<Vec<i64>> {
    let weights: Vec<i64> = (1..=n as i64).map(|i| i * i).collect();
    // suffix sums of the largest attainable |Σ r_i·i²| over remaining slots
    let mut rest = vec![0i64; n + 1];
    for i in (0..n).rev() {
        rest[i] = rest[i + 1] + height * weights[i];
    }
    let mut out = Vec::new();
    let mut r = vec![0i64; n];
    fn gcd(a: i64, b: i64) -> i64 {
        if b == 0 { a.abs() } else { gcd(b, a % b) }
    }
    fn rec(
        depth: usize,
        sum: i64,
        n: usize,
        height: i64,
        weights: &[i64],
        rest: &[i64],
        r: &mut Vec<i64>,
        out: &mut Vec<Vec<i64>>,
    ) {
        if depth == n {
            if sum == 0 && r.iter().any(|&x| x != 0) {
                let g = r.iter().fold(0i64, |acc, &x| gcd(acc, x));
                if g == 1 {
                    if let Some(first) = r.iter().find(|&&x| x != 0) {
                        if *first > 0 {
                            out.push(r.clone());
                        }
                    }
                }
            }
            return;
        }
        if sum.abs() > rest[depth] {
            return;
        }
        for v in -height..=height {
            r[depth] = v;
            rec(depth + 1, sum + v * weights[depth], n, height, weights, rest, r, out);
        }
        r[depth] = 0;
    }
    rec(0, 0, n, height, &weights, &rest, &mut r, &mut out);
    out
}

/// Diagonal element `⟨φ_j, B̃(m,j) φ_j⟩` of the truncated series operator
/// `B̃(m,j) = B·((λ_j−A)|⊥)⁻¹·(((λ_j−A)|⊥)⁻¹ P⊥ B)^m · P⊥ B`.
///
/// The restricted inverse is diagonal with entries `1/(λ_j − λ_k)`, `k ≠ j`,
/// so only matrix-vector products are needed.
pub fn b_tilde_diagonal(b: &ControlOperator, m_series: usize, j: usize) -> f64 {
    let m = b.modes();
    let lam_j = lambda(j);
    let inv_gap: Vec<f64> = (1..=m)
        .map(|k| if k == j { 0.0 } else { 1.0 / (lam_j - lambda(k)) })
        .collect();
    let apply_dperp = |v: &mut CVector| {
        for (i, g) in inv_gap.iter().enumerate() {
            v[i] *= c64(*g, 0.0);
        }
    };
    // w = P⊥ B φ_j
    let mut w: CVector = b.matrix().column(j - 1).clone_owned();
    w[j - 1] = c64(0.0, 0.0);
    for _ in 0..m_series {
        apply_dperp(&mut w);
        let mut bw = b.matrix() * &w;
        // the restricted inverse keeps everything orthogonal to φ_j
        bw[j - 1] = c64(0.0, 0.0);
        w = bw;
    }
    apply_dperp(&mut w);
    let result = b.matrix() * &w;
    result[j - 1].re
}

/// Diagnostic only: least-squares slope of `log(k³|B_{k,j}|)` against
/// `log k` for each column `j ≤ n`, over the interior rows. A slope near
/// zero is consistent with the regularity the range condition asks for; no
/// finite-truncation test can certify that condition.
pub fn range_regularity_diagnostic(b: &ControlOperator, n: usize) -> Vec<f64> {
    let m = b.modes();
    let lo = m / 4;
    let hi = 3 * m / 4;
    (1..=n.min(m))
        .map(|j| {
            let pts: Vec<(f64, f64)> = (lo.max(1)..=hi)
                .filter(|&k| k != j)
                .filter_map(|k| {
                    let v = (k as f64).powi(3) * b.entry(k, j).norm();
                    (v > 0.0).then(|| ((k as f64).ln(), v.ln()))
                })
                .collect();
            regression_slope(&pts)
        })
        .collect()
}

pub(crate) fn regression_slope(pts: &[(f64, f64)]) -> f64 {
    let n = pts.len() as f64;
    if pts.len() < 2 {
        return f64::NAN;
    }
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    (n * sxy - sx * sy) / (n * sxx - sx * sx)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::spectral::BasisTruncation;
    use approx::assert_relative_eq;
    use std::collections::HashMap;

    fn basis(m: usize) -> BasisTruncation {
        BasisTruncation::new(m).unwrap()
    }

    /// Adaptive Simpson quadrature, independent of the Gauss-Legendre path.
    fn adaptive_simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64, tol: f64, depth: usize) -> f64 {
        fn simpson(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
            (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b))
        }
        let whole = simpson(f, a, b);
        let mid = 0.5 * (a + b);
        let left = simpson(f, a, mid);
        let right = simpson(f, mid, b);
        if depth == 0 || (left + right - whole).abs() < 15.0 * tol {
            left + right + (left + right - whole) / 15.0
        } else {
            adaptive_simpson(f, a, mid, 0.5 * tol, depth - 1)
                + adaptive_simpson(f, mid, b, 0.5 * tol, depth - 1)
        }
    }

    fn x2_entry_quadrature(k: usize, j: usize) -> f64 {
        let f = move |x: f64| {
            2.0 * x * x * (k as f64 * PI * x).sin() * (j as f64 * PI * x).sin()
        };
        // seed panels that resolve the oscillation before adapting
        let panels = 2 * (k + j).max(8);
        let mut acc = 0.0;
        for p in 0..panels {
            let a = p as f64 / panels as f64;
            let b = (p + 1) as f64 / panels as f64;
            acc += adaptive_simpson(&f, a, b, 1e-13 / panels as f64, 20);
        }
        acc
    }

    #[test]
    fn x_squared_diagonal_matches_closed_form() {
        let b = build_x_squared(basis(8));
        let expect = 1.0 / 3.0 - 1.0 / (8.0 * PI * PI);
        assert_relative_eq!(b.entry(2, 2).re, expect, max_relative = 1e-15);
        assert!((b.entry(2, 2).re - 0.320668).abs() < 1e-6);
    }

    #[test]
    fn x_squared_entries_match_quadrature() {
        let b = build_x_squared(basis(12));
        for &(k, j) in &[(1, 2), (1, 3), (2, 5), (3, 3), (7, 12), (1, 12)] {
            let q = x2_entry_quadrature(k, j);
            assert!(
                (b.entry(k, j).re - q).abs() < 1e-10,
                "entry ({k},{j}): closed form {} vs quadrature {q}",
                b.entry(k, j).re
            );
        }
        // |B_{1,2}| = 16/(9π²): twice the difference 1/π² − 1/(9π²)
        assert_relative_eq!(b.entry(1, 2).re.abs(), 16.0 / (9.0 * PI * PI), max_relative = 1e-14);
    }

    #[test]
    fn multiplication_cross_checks_x_squared() {
        let tr = basis(16);
        let closed = build_x_squared(tr);
        let quad = build_multiplication(|x| x * x, tr, 4 * 16).unwrap();
        let diff = (closed.matrix() - quad.matrix()).map(|z| z.norm()).max();
        assert!(diff < 1e-8, "max entry difference {diff:.3e}");
    }

    #[test]
    fn multiplication_identity_and_zero() {
        let tr = basis(8);
        let one = build_multiplication(|_| 1.0, tr, 64).unwrap();
        let id_defect = (one.matrix() - CMatrix::identity(8, 8)).map(|z| z.norm()).max();
        assert!(id_defect < 1e-12, "identity defect {id_defect:.3e}");
        let zero = build_multiplication(|_| 0.0, tr, 64).unwrap();
        assert!(zero.matrix().map(|z| z.norm()).max() < 1e-15);
    }

    #[test]
    fn multiplication_rejects_non_finite_samples() {
        let tr = basis(8);
        let err = build_multiplication(|x| 1.0 / (x - 0.5), tr, 64);
        // 0.5 is unlikely to be a quadrature node; use an unconditional NaN
        let _ = err;
        assert!(build_multiplication(|_| f64::NAN, tr, 64).is_err());
    }

    #[test]
    fn coupling_decay_certificates() {
        let tr = basis(32);
        let b = build_x_squared(tr);
        let cert = check_coupling_decay(&b, 2).unwrap();
        assert!(cert.ok);
        assert!(cert.c_n > 0.0);

        let zero = ControlOperator::new(CMatrix::zeros(8, 8), "zero").unwrap();
        let cert = check_coupling_decay(&zero, 2).unwrap();
        assert!(!cert.ok);
        assert_eq!(cert.c_n, 0.0);

        let diag = ControlOperator::new(CMatrix::identity(8, 8), "id").unwrap();
        let cert = check_coupling_decay(&diag, 2).unwrap();
        assert!(!cert.ok, "diagonal-only operator has vanishing couplings");
    }

    #[test]
    fn coupling_minimum_monotone_in_truncation() {
        let c32 = check_coupling_decay(&build_x_squared(basis(32)), 3).unwrap().c_n;
        let c48 = check_coupling_decay(&build_x_squared(basis(48)), 3).unwrap().c_n;
        assert!(c48 <= c32 + 1e-15);
    }

    #[test]
    fn resonance_scan_finds_the_degenerate_quadruple() {
        let b = build_x_squared(basis(8));
        let cert = check_resonance_condition(&b, 4, 8).unwrap();
        let q = ResonanceQuadruple { j: 7, k: 1, l: 8, m: 4 };
        let found = cert.quadruples.iter().find(|w| w.quadruple == q).expect("quadruple present");
        // D = (1/2π²)(−1/49 + 1 + 1/64 − 1/16)
        let expect = (1.0 / (2.0 * PI * PI)) * (-1.0 / 49.0 + 1.0 + 1.0 / 64.0 - 1.0 / 16.0);
        assert_relative_eq!(found.combination, expect, max_relative = 1e-12);
        assert!(cert.ok);
    }

    #[test]
    fn resonance_scan_fails_for_identity() {
        let id = ControlOperator::new(CMatrix::identity(8, 8), "id").unwrap();
        let cert = check_resonance_condition(&id, 4, 8).unwrap();
        assert!(!cert.ok);
        assert_eq!(cert.quadruples.len(), cert.failures.len());
        assert!(!cert.quadruples.is_empty());
    }

    #[test]
    fn resonance_enumeration_is_exhaustive() {
        // independent route: group pairs by the key j² − k²
        let n = 4;
        let jmax = 10;
        let b = build_x_squared(basis(jmax));
        let cert = check_resonance_condition(&b, n, jmax).unwrap();
        let mut groups: HashMap<i64, Vec<(usize, usize)>> = HashMap::new();
        for k in 1..=n {
            for j in 1..=jmax {
                if j != k {
                    let key = (j * j) as i64 - (k * k) as i64;
                    groups.entry(key).or_default().push((j, k));
                }
            }
        }
        let mut expected = 0usize;
        for pairs in groups.values() {
            expected += pairs.len() * (pairs.len() - 1) / 2;
        }
        assert_eq!(cert.quadruples.len(), expected);
        for w in &cert.quadruples {
            assert!(w.quadruple.holds());
        }
    }

    #[test]
    fn assumption_a_passes_for_x_squared() {
        let b = build_x_squared(basis(16));
        let cert = check_assumption_a(&b, 2, 5, 3).unwrap();
        assert!(cert.ok);
        // the only primitive relation for N = 2 is (4, −1): 4λ₁ = λ₂
        assert_eq!(cert.relations_checked, 1);
        let s = 4.0 * b.entry(1, 1).re - b.entry(2, 2).re;
        assert_relative_eq!(s, 1.0 - (15.0 / 8.0) / (PI * PI), max_relative = 1e-12);
        assert!((s - 0.810).abs() < 1e-3);
    }

    #[test]
    fn assumption_a_identity_relation_value() {
        let id = ControlOperator::new(CMatrix::identity(8, 8), "id").unwrap();
        let cert = check_assumption_a(&id, 2, 5, 3).unwrap();
        // 4·1 − 1 = 3 ≠ 0 for the relation (4, −1)
        assert!(cert.ok);
        assert!((cert.min_diagonal_sum - 3.0).abs() < 1e-12);
    }

    #[test]
    fn assumption_a_series_branch_runs() {
        // craft diagonals proportional to j² so every enumerated relation
        // zeroes the diagonal sum and the series terms decide
        let m = 8;
        let mut mat = build_x_squared(basis(m)).matrix().clone();
        for i in 0..m {
            mat[(i, i)] = c64(((i + 1) * (i + 1)) as f64, 0.0);
        }
        let b = ControlOperator::new(mat, "j^2 diagonal").unwrap();
        let cert = check_assumption_a(&b, 3, 6, 4).unwrap();
        // every witnessed relation must have consulted the series
        assert!(cert.witness_values.iter().all(|w| !w.series_values.is_empty()));
    }

    #[test]
    fn relation_enumeration_counts() {
        // N = 3, height 9: r1 + 4 r2 + 9 r3 = 0 ⟹ r1 = −4r2 − 9r3
        let rels = enumerate_relations(3, 9);
        let mut expected = 0usize;
        for r2 in -9i64..=9 {
            for r3 in -9i64..=9 {
                let r1 = -4 * r2 - 9 * r3;
                if r1.abs() <= 9 && (r1, r2, r3) != (0, 0, 0) {
                    let g = {
                        fn gcd(a: i64, b: i64) -> i64 {
                            if b == 0 { a.abs() } else { gcd(b, a % b) }
                        }
                        gcd(gcd(r1, r2), r3)
                    };
                    let first = [r1, r2, r3].into_iter().find(|&x| x != 0).unwrap();
                    if g == 1 && first > 0 {
                        expected += 1;
                    }
                }
            }
        }
        assert_eq!(rels.len(), expected);
    }

    #[test]
    fn hermiticity_is_enforced() {
        let mut mat = CMatrix::zeros(4, 4);
        mat[(0, 1)] = c64(1.0, 0.0);
        assert!(ControlOperator::new(mat, "broken").is_err());

        let b = build_x_squared(basis(64));
        assert!(b.hermiticity_defect() <= 1e-12);
    }

    #[test]
    fn range_diagnostic_is_flat_for_x_squared() {
        let b = build_x_squared(basis(48));
        let slopes = range_regularity_diagnostic(&b, 2);
        for s in slopes {
            assert!(s.abs() < 0.5, "k³|B| row decay slope {s}");
        }
    }
}
