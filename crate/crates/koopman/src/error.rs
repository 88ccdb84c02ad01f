//! Crate-wide error type.

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A point or vector had the wrong number of components.
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    /// Two polynomials were combined but are expanded about different points.
    #[error("polynomial centers differ; recenter before combining")]
    CenterMismatch,

    /// An axis index was outside `0..dim`.
    #[error("axis {axis} out of range for dimension {dim}")]
    AxisOutOfRange { axis: usize, dim: usize },

    /// A polynomial's per-axis degree exceeds the requested Bernstein degree.
    #[error("degree {degree} on axis {axis} exceeds the Bernstein degree {limit}")]
    DegreeOverflow {
        axis: usize,
        degree: usize,
        limit: usize,
    },

    /// Bernstein degrees are capped so binomial tables stay accurate in f64.
    #[error("Bernstein degree {degree} exceeds the supported cap {cap}")]
    DegreeCap { degree: usize, cap: usize },

    /// The operation requires a polynomial vector field.
    #[error("operation requires a polynomial vector field")]
    NotPolynomial,

    /// Newton iteration failed to reach the tolerance.
    #[error("fixed-point search did not converge within {iters} iterations")]
    NoConvergence { iters: usize },

    /// A linear solve hit a (numerically) singular matrix.
    #[error("singular matrix in {context}")]
    Singular { context: &'static str },

    /// The Jacobian eigenvector basis is too ill-conditioned to trust.
    #[error("Jacobian is numerically defective (eigenvector condition {cond:.3e})")]
    DefectiveJacobian { cond: f64 },

    /// A graded Taylor system was near-singular: eigenvalue resonance.
    #[error(
        "graded system at order {order} is near-singular (condition {cond:.3e}); \
         eigenvalue resonance suspected"
    )]
    Resonance { order: usize, cond: f64 },

    /// Requested eigenvalue index does not exist.
    #[error("eigenvalue index {index} out of range ({count} available)")]
    EigIndexOutOfRange { index: usize, count: usize },

    /// A trajectory left the configured safety ball: finite-time escape.
    #[error("trajectory escaped (norm exceeded {bound:.1e}) at t = {time:.6}")]
    Escape { time: f64, bound: f64 },

    /// The integrator exceeded its step budget.
    #[error("integrator exceeded {max_steps} steps before reaching the target time")]
    StepBudget { max_steps: usize },

    /// No return to the Poincaré section was observed.
    #[error("no return to the Poincaré section within t = {max_time}")]
    NoReturn { max_time: f64 },

    /// The periodic orbit is not star-shaped about the origin.
    #[error("orbit is not star-shaped: polar angle is non-monotone along the cycle")]
    NotStarShaped,

    /// The monodromy matrix has no multiplier acceptably close to 1.
    #[error("trivial Floquet multiplier deviates from 1 by {dev:.3e} (cycle or integration inaccurate)")]
    TrivialMultiplier { dev: f64 },

    /// The annulus parametrization degenerates (radius reaches zero).
    #[error("annulus touches the origin at theta = {theta:.6} (denominator {value:.3e})")]
    AnnulusDegenerate { theta: f64, value: f64 },

    /// A point fell outside the annulus chart.
    #[error("point outside the annulus: y = {y:.6} not in [0, 1]")]
    OutsideAnnulus { y: f64 },

    /// A point fell outside an eigenfunction's trusted evaluation region.
    #[error("point outside the valid region of eigenfunction member {index}")]
    OutsideDomain { index: usize },

    /// The angular speed changes sign on the cycle: θ is not a valid time-like
    /// parameter there.
    #[error("F_theta changes sign on the cycle (min {min:.3e}, max {max:.3e})")]
    ThetaSpeedSignChange { min: f64, max: f64 },

    /// Field projection onto the Fourier–Bernstein basis is not accurate enough.
    #[error(
        "field projection error {err:.3e} exceeds {bound:.3e}; \
         increase the Fourier truncation or the radial degree"
    )]
    ProjectionError { err: f64, bound: f64 },

    /// The boundary weight function failed its periodicity consistency check.
    #[error("boundary function g is not periodic: |g(2\u{3c0}) - g(0)| = {dev:.3e}")]
    BoundaryInconsistent { dev: f64 },

    /// A symmetry stride was requested but the field has energy on skipped harmonics.
    #[error(
        "harmonic stride {stride} invalid: field has magnitude {magnitude:.3e} \
         on harmonic {harmonic}"
    )]
    StrideUnsound {
        stride: usize,
        harmonic: i64,
        magnitude: f64,
    },

    /// NaN or infinity appeared where a finite value is required.
    #[error("non-finite value encountered in {context}")]
    NonFinite { context: &'static str },

    /// A LAPACK routine reported failure.
    #[error("LAPACK {routine} failed with info = {info}")]
    Lapack { routine: &'static str, info: i32 },

    /// Text input could not be parsed.
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse {
        line: usize,
        col: usize,
        msg: String,
    },

    /// Box bounds were not strictly increasing per axis.
    #[error("invalid box: upper bound must exceed lower bound on axis {axis}")]
    InvalidBox { axis: usize },

    /// Catch-all for invalid arguments with context.
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
