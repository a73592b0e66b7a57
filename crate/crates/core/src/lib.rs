//! Numerical laboratory for the time-fractional stochastic PDE
//!
//! ```text
//! d^a/dt^a u = phi(Laplacian) u + f + d^b/dt^b sum_k int g^k dw^k
//! ```
//!
//! where `phi` is a Bernstein function (so `phi(Laplacian)` is the generator
//! of a subordinate Brownian motion) and the time derivatives are Caputo /
//! Riemann-Liouville operators.  The crate computes the fundamental-solution
//! kernels of that equation by two independent routes (radial Fourier
//! inversion of the Mittag-Leffler symbol, and subordination against the
//! inverse stable subordinator), simulates solutions spectrally on periodic
//! lattices, and verifies the quantitative kernel / regularity estimates that
//! govern the equation at desk scale.
//!
//! Module map:
//! - [`bernstein`]: catalog and verification of Bernstein functions.
//! - [`fraccalc`]: Riemann-Liouville / Caputo calculus on uniform time grids.
//! - [`special`]: Mittag-Leffler function, one-sided stable densities,
//!   inverse-subordinator density.
//! - [`kernel`]: transition density `p(t,x)`, fundamental solutions
//!   `q`, `q_{a,b}`, `q^g_{a,b}`, Sobolev multipliers, white-noise kernel.
//! - [`spde`]: spectral simulation of the model equation (exact-Gaussian and
//!   Euler-type schemes, Picard iteration, white-noise forcing).
//! - [`analysis`]: discrete maximal/sharp functions over anisotropic
//!   parabolic cubes and the estimate-verification harness.
//! - [`config`] / [`report`]: experiment configs, reports, CSV/JSON output.

pub mod analysis;
pub mod bernstein;
pub mod config;
pub mod fraccalc;
pub mod grid;
pub mod kernel;
pub mod noise;
pub mod par;
pub mod quad;
pub mod report;
pub mod spde;
pub mod special;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),
    /// Argument outside the floating-point window an operation supports.
    #[error("outside supported floating-point range: {0}")]
    Clamp(String),
    /// A quadrature failed to converge to the requested tolerance.
    #[error("quadrature non-convergence: {0}")]
    Quadrature(String),
    /// A Fourier inversion was requested for a symbol that is not integrable.
    #[error("divergent inversion: {0}")]
    Divergent(String),
    /// A parameter window required by the estimate theory is violated.
    /// The message names the violated inequality.
    #[error("parameter window violated: {0}")]
    ParameterWindow(String),
    /// Unknown catalog entry or suite name.
    #[error("unknown name: {0}")]
    UnknownName(String),
    /// Configuration file problem, with field-level diagnostics.
    #[error("config error: {0}")]
    Config(String),
    /// An iteration diverged (e.g. Picard with too-large Lipschitz constant).
    #[error("iteration diverged: {0}")]
    Diverged(String),
    /// Requested evaluation regime is not supported.
    #[error("unsupported regime: {0}")]
    Unsupported(String),
    /// I/O error while writing artifacts.
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

/// Positive part `max(a, 0)`.
#[inline]
pub(crate) fn pos(a: f64) -> f64 {
    a.max(0.0)
}
