//! Koopman-eigenfunction toolkit for global stability analysis of
//! polynomial dynamical systems.
//!
//! The crate computes Koopman eigenfunctions `φ_λ` — solutions of
//! `F·∇φ_λ = λ φ_λ` for a vector field `F` — around stable fixed points
//! (Taylor and Bernstein collocation solvers) and stable limit cycles
//! (Fourier–Bernstein collocation on an annular chart), then uses them to
//! build Lyapunov functions, certify contraction on boxes, and estimate
//! basins of attraction.

pub mod bernstein;
pub mod bernstein_fp;
pub mod comb;
pub mod cycle;
pub mod error;
pub mod limit_cycle;
pub mod linalg;
pub mod ode;
pub mod poly;
pub mod presets;
pub mod stability;
pub mod system;
pub mod taylor;

pub use error::{Error, Result};
pub use poly::{MonomialPoly, MultiIndex};
