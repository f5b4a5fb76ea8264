//! Direct quantitative photoacoustic tomography (QPAT).
//!
//! Optical absorption `μ` and diffusion `κ` maps are reconstructed directly
//! from time series of boundary pressure. The forward model composes a P1
//! finite-element diffusion approximation (light) with a k-space
//! pseudo-spectral time-domain solver (sound) in a heterogeneous,
//! power-law-absorbing medium. Derivatives are applied matrix-free: the
//! optical Fréchet derivative and its adjoint reuse one sparse Cholesky
//! factorisation, and the acoustic adjoint is the exact transpose of the
//! discrete time stepping.
//!
//! Three TV-regularised reconstruction drivers live in [`solvers`]:
//! ADMM with an L-BFGS inner solver, and two priorconditioned inexact
//! Gauss-Newton methods (lagged diffusivity and primal-dual interior point).
//!
//! The experiment harness ([`harness`]) builds phantoms, synthesises noisy
//! data on a finer grid with corrupted acoustic maps, runs a reconstruction
//! and writes a result bundle.

pub mod acoustic;
pub mod composite;
pub mod error;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod optical;
pub mod regularization;
pub mod solvers;

pub use error::{Error, Result};
