//! Spectral-Galerkin toolkit for 1D bilinear Schrödinger equations
//! `i ∂ψ = (A + u(t) B) ψ` on the interval (0,1) with Dirichlet boundary
//! conditions, together with constructive control synthesis:
//!
//! - [`spectral`]: the truncated sine eigenbasis of the Dirichlet Laplacian,
//!   weighted Sobolev norms and orthonormalization,
//! - [`operators`]: control operators in the eigenbasis and numerical
//!   certificates for the coupling/resonance assumptions,
//! - [`perturbation`]: the spectrum of `A + u0·B`, eigenbranch tracking and
//!   resonance-removal certificates,
//! - [`propagator`]: exact piecewise-constant-in-time propagation, time
//!   reversal and projected overlaps,
//! - [`moment`]: trigonometric moment problems solved by real controls,
//! - [`local`]: local exact steering in projection via Newton iteration on
//!   the linearized overlap map,
//! - [`global`]: Lie-algebraic global approximate steering with resonant
//!   pulses and its concatenation with the local stage,
//! - [`density`]: density matrices, Von Neumann evolution and projected
//!   equality checks,
//! - [`scenario`]: JSON-configured pipeline runner backing the `steer` CLI.
//!
//! All certificates are statements about a fixed truncation `M` and report
//! `M` alongside their verdicts. Every runnable capability has a matching
//! program under `examples/`.

pub mod density;
pub mod error;
pub mod global;
pub mod local;
pub mod moment;
pub mod operators;
pub mod perturbation;
pub mod propagator;
pub mod scenario;
pub mod spectral;

pub use error::{Result, SteerError};

/// Complex scalar used throughout.
pub type C64 = nalgebra::Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<C64>;

pub(crate) fn c64(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}
