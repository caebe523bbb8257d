//! Numerical laboratory for perturbed Green's functions of `-Δ + V` and
//! `-div (1+V)∇` with slowly decaying divergence-form potentials, spatial
//! amplitude asymptotics on the sphere, model integral operators, contour
//! wave propagators and wave-operator convergence experiments.
//!
//! Everything runs on a periodic cubic box at complex spectral parameters
//! `z = k²`, `Im k > 0`, where all kernels decay exponentially and the box
//! truncation is benign.

pub mod amplitude;
pub mod error;
pub mod fields;
pub mod oracles;
pub mod potentials;
pub mod quad;
pub mod radial1d;
pub mod resolvent;
pub mod waveprop;

pub use error::{Error, Result};
pub use num_complex::Complex64;
