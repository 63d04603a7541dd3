//! Error type shared across the crate.

use thiserror::Error;

/// Errors produced by construction, certification and steering routines.
#[derive(Debug, Error)]
pub enum SteerError {
    #[error("invalid mode index {0}: mode indices start at 1")]
    InvalidIndex(usize),

    #[error("point {0} lies outside the domain [0, 1]")]
    OutsideDomain(f64),

    #[error("invalid Sobolev exponent {0}: must be nonnegative and finite")]
    InvalidExponent(f64),

    #[error("family member {index} is linearly dependent on its predecessors (residual norm {residual:.3e})")]
    DegenerateFamily { index: usize, residual: f64 },

    #[error("non-finite sample of the multiplication function at x = {0}")]
    NonFiniteSample(f64),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("perturbation u0 = {u0} too large: |u0|·‖B‖ = {product:.3e} exceeds half the first spectral gap")]
    PerturbationTooLarge { u0: f64, product: f64 },

    #[error("branch tracking ambiguous at u0 = {u0}: perturbed vectors {first} and {second} both dominated by mode {mode}; try smaller |u0|")]
    BranchTrackingAmbiguous { u0: f64, first: usize, second: usize, mode: usize },

    #[error("gap collapse: (A + u0 B - mu) is numerically singular at gap midpoint index {gap_index} for u0 = {u0}")]
    GapCollapse { u0: f64, gap_index: usize },

    #[error("invalid control signal: {0}")]
    InvalidSignal(String),

    #[error("frequency collision between index pairs ({j1},{k1}) and ({j2},{k2}): |{w1:.6e} - {w2:.6e}| below tolerance")]
    FrequencyCollision { j1: usize, k1: usize, j2: usize, k2: usize, w1: f64, w2: f64 },

    #[error("moment problem ill-posed: Gram condition number {cond:.3e} exceeds {limit:.1e}; increase the horizon T")]
    IllPosedGram { cond: f64, limit: f64 },

    #[error("horizon T = {t} too short: the moment problem needs T > {required:.6} = 2π/min_gap")]
    HorizonTooShort { t: f64, required: f64 },

    #[error("lost phase reference: |diagonal overlap| = {value:.3e} at column {index}; state left the local neighborhood")]
    LostPhase { index: usize, value: f64 },

    #[error("Newton steering did not reach tol {tol:.1e} in {iterations} iterations; best defect {best:.3e}")]
    NewtonDiverged { tol: f64, iterations: usize, best: f64 },

    #[error("admissible transition graph on modes 1..={n1} is disconnected: no chain of connectedness")]
    NoChain { n1: usize },

    #[error("matrix is not unitary: defect {0:.3e}")]
    NotUnitary(f64),

    #[error("matrix is not special unitary: |det - 1| = {0:.3e}")]
    NotSpecialUnitary(f64),

    #[error("pair ({j},{k}) is not an admissible transition")]
    NotAdmissible { j: usize, k: usize },

    #[error("pulse budget exhausted at n = {n_max}; best factor error {best:.3e} above {target:.3e}")]
    PulseBudget { n_max: usize, best: f64, target: f64 },

    #[error("invalid density ensemble: {0}")]
    InvalidEnsemble(String),

    #[error("invalid scenario: {0}")]
    InvalidScenario(String),

    #[error("serialization failed: {0}")]
    Serialization(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, SteerError>;
