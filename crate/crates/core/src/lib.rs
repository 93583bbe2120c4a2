//! Numerical laboratory for real trigonometric-polynomial potentials on the
//! d-torus and the quasiperiodic Schrödinger operators they generate.
//!
//! The crate is organized around one experimental pipeline:
//!
//! - [`potential`] — coefficient vectors in R^N, the canonical cosine/sine
//!   basis, and exact value/gradient/Hessian jets of V on T^d.
//! - [`morse`] — Newton search for all critical points of V, with Morse
//!   (non-degeneracy) and unique-global-extrema certification.
//! - [`cartan`] — Monte-Carlo estimates of the torus measure of sublevel sets
//!   of the form { min(|F|, |G|) < exp(-K) }, with exact binomial confidence
//!   bounds and decay sweeps in K.
//! - [`spectrum`] — finite Dirichlet truncations of the operator
//!   H(x)ψ(n) = -ψ(n+1) - ψ(n-1) + λV(x + nω)ψ(n), a Sturm-bisection
//!   eigensolver, phase unions, and spectral-gap detection.
//! - [`survey`] — randomized surveys over coefficient space classifying each
//!   sample against the four potential-class conditions, plus parameter-line
//!   slice experiments.
//!
//! All randomness flows through [`rng`]: splitmix64 seed derivation feeding
//! xoshiro256++ streams, so every experiment is a pure function of its
//! configuration and master seed, independent of thread count.

pub mod cartan;
pub mod error;
pub mod morse;
pub mod potential;
pub mod rng;
pub mod spectrum;
pub mod stats;
pub mod survey;

pub use error::{Error, Result};
pub use potential::{
    dimension_count, index_table, BasisLabel, CoefficientVector, MultiIndex, PotentialShape,
    TorusPoint, TrigPolynomial,
};

/// Crate version string recorded in run manifests.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
