//! Limit-cycle location, annular charts, and Floquet exponents.
//!
//! A stable planar limit cycle that winds once around the origin with
//! monotone polar angle is located by Poincaré-section returns, resampled
//! at uniform polar angles, and stored as a periodic-spline radius function
//! `R(θ)`. The annular chart
//! `x(θ, y) = (R(θ) + (y + Δ)‖e_r‖)(cos θ, sin θ)` maps `[0, 2π) × [0, 1]`
//! to a neighborhood of the cycle on which the eigenfunction PDE is solved;
//! the cycle itself sits at `y = −Δ`. Floquet exponents come from the
//! monodromy matrix (trivial multiplier check) together with the divergence
//! integral `λ = (1/T)∮ ∇·F dt`, which stays accurate even when the
//! nontrivial multiplier is far below machine precision relative to 1.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg;
use crate::ode::{self, OdeOptions, Section};
use crate::system::DynamicalSystem;

// ---------------------------------------------------------------------------
// Periodic cubic splines on [0, 2π)
// ---------------------------------------------------------------------------

/// Natural periodic cubic spline through uniform samples on `[0, 2π)`.
#[derive(Clone, Debug)]
pub struct PeriodicSpline {
    values: Vec<f64>,
    /// Second derivatives at the nodes.
    moments: Vec<f64>,
    h: f64,
}

impl PeriodicSpline {
    /// Interpolate `values[j]` at `θ_j = 2πj/M`.
    pub fn from_samples(values: Vec<f64>) -> Self {
        let m = values.len();
        assert!(m >= 3, "periodic spline needs at least 3 samples");
        let h = std::f64::consts::TAU / m as f64;
        // Moment equations: (h/6)M_{j−1} + (2h/3)M_j + (h/6)M_{j+1}
        //                   = (v_{j+1} − 2v_j + v_{j−1})/h, cyclically.
        let rhs: Vec<f64> = (0..m)
            .map(|j| {
                let vm = values[(j + m - 1) % m];
                let vp = values[(j + 1) % m];
                (vp - 2.0 * values[j] + vm) / h
            })
            .collect();
        let moments = solve_cyclic_tridiagonal(h / 6.0, 2.0 * h / 3.0, h / 6.0, &rhs);
        Self {
            values,
            moments,
            h,
        }
    }

    /// Number of interpolation nodes.
    pub fn len(&self) -> usize {
        self.values.len()
    }

    /// True when empty (never, by construction).
    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Node values.
    pub fn samples(&self) -> &[f64] {
        &self.values
    }

    fn locate(&self, theta: f64) -> (usize, f64) {
        let m = self.values.len();
        let tau = std::f64::consts::TAU;
        let mut t = theta % tau;
        if t < 0.0 {
            t += tau;
        }
        let mut j = (t / self.h) as usize;
        if j >= m {
            j = m - 1;
        }
        (j, t - j as f64 * self.h)
    }

    /// Spline value at `θ` (any real; 2π-periodic).
    pub fn eval(&self, theta: f64) -> f64 {
        let m = self.values.len();
        let (j, d) = self.locate(theta);
        let jp = (j + 1) % m;
        let h = self.h;
        let a = h - d;
        self.moments[j] * a * a * a / (6.0 * h)
            + self.moments[jp] * d * d * d / (6.0 * h)
            + (self.values[j] - self.moments[j] * h * h / 6.0) * a / h
            + (self.values[jp] - self.moments[jp] * h * h / 6.0) * d / h
    }

    /// Spline derivative at `θ`.
    pub fn deriv(&self, theta: f64) -> f64 {
        let m = self.values.len();
        let (j, d) = self.locate(theta);
        let jp = (j + 1) % m;
        let h = self.h;
        let a = h - d;
        -self.moments[j] * a * a / (2.0 * h)
            + self.moments[jp] * d * d / (2.0 * h)
            + (self.values[jp] - self.values[j]) / h
            - (self.moments[jp] - self.moments[j]) * h / 6.0
    }
}

/// Solve the cyclic tridiagonal system with constant bands via the
/// Sherman–Morrison correction of a plain tridiagonal (Thomas) solve.
fn solve_cyclic_tridiagonal(sub: f64, diag: f64, sup: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    assert!(n >= 3);
    let gamma = -diag;
    // A = A_tri + u vᵀ with u = (γ, 0, …, 0, sup)ᵀ, v = (1, 0, …, 0, sub/γ)ᵀ.
    let mut d = vec![diag; n];
    d[0] = diag - gamma;
    d[n - 1] = diag - sup * sub / gamma;
    let y = thomas(sub, &d, sup, rhs);
    let mut u = vec![0.0; n];
    u[0] = gamma;
    u[n - 1] = sup;
    let z = thomas(sub, &d, sup, &u);
    let vy = y[0] + sub / gamma * y[n - 1];
    let vz = z[0] + sub / gamma * z[n - 1];
    let factor = vy / (1.0 + vz);
    y.iter().zip(&z).map(|(yi, zi)| yi - factor * zi).collect()
}

/// Thomas algorithm with constant off-diagonals and a general diagonal.
fn thomas(sub: f64, diag: &[f64], sup: f64, rhs: &[f64]) -> Vec<f64> {
    let n = rhs.len();
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    c[0] = sup / diag[0];
    d[0] = rhs[0] / diag[0];
    for i in 1..n {
        let m = diag[i] - sub * c[i - 1];
        c[i] = sup / m;
        d[i] = (rhs[i] - sub * d[i - 1]) / m;
    }
    let mut x = vec![0.0; n];
    x[n - 1] = d[n - 1];
    for i in (0..n - 1).rev() {
        x[i] = d[i] - c[i] * x[i + 1];
    }
    x
}

// ---------------------------------------------------------------------------
// Limit-cycle parametrization
// ---------------------------------------------------------------------------

/// Controls for limit-cycle location and the annular chart.
#[derive(Clone, Debug)]
pub struct CycleConfig {
    /// Plain integration time before watching Poincaré returns.
    pub transient_time: f64,
    /// Budget for each Poincaré return (per revolution).
    pub max_return_time: f64,
    /// Cap on observed returns before giving up.
    pub max_returns: usize,
    /// Number of uniform-angle samples of the radius function.
    pub samples: usize,
    /// Chart offset: the cycle sits at `y = −delta`.
    pub delta: f64,
    /// Radial chart scale `‖e_r‖`; `None` selects twice the maximum cycle
    /// radius, so the chart spans a wide attraction collar outside the cycle.
    pub e_r_norm: Option<f64>,
    /// Integrator settings for all flow computations.
    pub ode: OdeOptions,
}

impl Default for CycleConfig {
    fn default() -> Self {
        Self {
            transient_time: 0.0,
            max_return_time: 200.0,
            max_returns: 500,
            samples: 1024,
            delta: 0.0,
            e_r_norm: None,
            ode: OdeOptions::default(),
        }
    }
}

/// Relative tolerance for Poincaré-return convergence onto the cycle.
const RETURN_TOL: f64 = 1e-12;
/// Relative closure tolerance for the recomputed cycle after one period.
const CLOSURE_TOL: f64 = 1e-8;

/// A located limit cycle with its annular chart.
#[derive(Clone, Debug)]
pub struct LimitCycleParam {
    period: f64,
    /// +1 for counterclockwise traversal, −1 for clockwise.
    orientation: f64,
    radius: PeriodicSpline,
    e_r_norm: f64,
    delta: f64,
    /// The nontrivial Floquet exponent, filled in by [`floquet_exponents`].
    floquet_exponent: Option<Complex64>,
}

impl LimitCycleParam {
    /// Rebuild a chart from stored uniform-angle radius samples (the
    /// serialization format used by reports).
    pub fn from_samples(
        period: f64,
        orientation: f64,
        radius_samples: Vec<f64>,
        e_r_norm: f64,
        delta: f64,
    ) -> Result<Self> {
        if radius_samples.len() < 3 {
            return Err(Error::InvalidArgument(
                "need at least 3 radius samples".into(),
            ));
        }
        if !(period > 0.0) || !(e_r_norm > 0.0) {
            return Err(Error::InvalidArgument(
                "period and e_r_norm must be positive".into(),
            ));
        }
        for (j, &r) in radius_samples.iter().enumerate() {
            if !(r > 0.0) {
                return Err(Error::AnnulusDegenerate {
                    theta: std::f64::consts::TAU * j as f64 / radius_samples.len() as f64,
                    value: r,
                });
            }
        }
        Ok(Self {
            period,
            orientation,
            radius: PeriodicSpline::from_samples(radius_samples),
            e_r_norm,
            delta,
            floquet_exponent: None,
        })
    }

    /// Cycle period.
    pub fn period(&self) -> f64 {
        self.period
    }

    /// The nontrivial Floquet exponent, once computed.
    pub fn floquet_exponent(&self) -> Option<Complex64> {
        self.floquet_exponent
    }

    /// Record the nontrivial Floquet exponent on the chart.
    pub fn set_floquet_exponent(&mut self, lambda: Complex64) {
        self.floquet_exponent = Some(lambda);
    }

    /// Traversal orientation: +1 counterclockwise, −1 clockwise.
    pub fn orientation(&self) -> f64 {
        self.orientation
    }

    /// Radial chart scale `‖e_r‖`.
    pub fn e_r_norm(&self) -> f64 {
        self.e_r_norm
    }

    /// Chart offset: the cycle sits at `y = −delta`.
    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Cycle radius `R(θ)`.
    pub fn radius(&self, theta: f64) -> f64 {
        self.radius.eval(theta)
    }

    /// `dR/dθ`.
    pub fn radius_deriv(&self, theta: f64) -> f64 {
        self.radius.deriv(theta)
    }

    /// Uniform-angle radius samples (serialization).
    pub fn radius_samples(&self) -> &[f64] {
        self.radius.samples()
    }

    /// Ordered `(θⱼ, x^γ(θⱼ))` sample pairs with θ uniform on `[0, 2π)`.
    pub fn samples(&self) -> Vec<(f64, [f64; 2])> {
        let m = self.radius.len();
        (0..m)
            .map(|j| {
                let theta = std::f64::consts::TAU * j as f64 / m as f64;
                (theta, self.gamma(theta))
            })
            .collect()
    }

    /// Point on the cycle at polar angle `θ`.
    pub fn gamma(&self, theta: f64) -> [f64; 2] {
        let r = self.radius(theta);
        [r * theta.cos(), r * theta.sin()]
    }

    /// Tangent `dγ/dθ`.
    pub fn dgamma(&self, theta: f64) -> [f64; 2] {
        let r = self.radius(theta);
        let dr = self.radius_deriv(theta);
        let (s, c) = theta.sin_cos();
        [dr * c - r * s, dr * s + r * c]
    }

    /// Chart map `(θ, y) → x`.
    pub fn to_cartesian(&self, theta: f64, y: f64) -> [f64; 2] {
        let rho = self.radius(theta) + (y + self.delta) * self.e_r_norm;
        let (s, c) = theta.sin_cos();
        [rho * c, rho * s]
    }

    /// Inverse chart map `x → (θ, y)` with `θ ∈ [0, 2π)`.
    pub fn to_annulus(&self, x: &[f64]) -> (f64, f64) {
        let mut theta = x[1].atan2(x[0]);
        if theta < 0.0 {
            theta += std::f64::consts::TAU;
        }
        let rho = x[0].hypot(x[1]);
        let y = (rho - self.radius(theta)) / self.e_r_norm - self.delta;
        (theta, y)
    }

    /// True when `x` falls in the chart strip `y ∈ [0, 1]`.
    pub fn in_chart(&self, x: &[f64]) -> bool {
        let (_, y) = self.to_annulus(x);
        (0.0..=1.0).contains(&y)
    }
}

/// Chart velocity components at `(θ, y)`: the PDE coefficients
/// `θ̇ = F·(−sin θ, cos θ)/ρ` and `ẏ = (F·(cos θ, sin θ) − θ̇ R′(θ))/‖e_r‖`.
pub fn polar_dynamics(
    sys: &DynamicalSystem,
    lc: &LimitCycleParam,
    theta: f64,
    y: f64,
) -> Result<(f64, f64)> {
    let rho = lc.radius(theta) + (y + lc.delta()) * lc.e_r_norm();
    if rho <= 0.0 {
        return Err(Error::AnnulusDegenerate {
            theta,
            value: rho,
        });
    }
    let (s, c) = theta.sin_cos();
    let x = [rho * c, rho * s];
    let f = sys.eval(&x);
    let f_theta = (-s * f[0] + c * f[1]) / rho;
    let f_y = (c * f[0] + s * f[1] - f_theta * lc.radius_deriv(theta)) / lc.e_r_norm();
    Ok((f_theta, f_y))
}

/// Instantaneous polar-angle speed `θ̇ = (x₁ẋ₂ − x₂ẋ₁)/r²` along the flow.
fn theta_speed(x: &[f64], f: &[f64]) -> f64 {
    (x[0] * f[1] - x[1] * f[0]) / (x[0] * x[0] + x[1] * x[1])
}

/// Locate a stable limit cycle of a planar system from `guess`.
///
/// The flow is followed through Poincaré-section returns on
/// `{x₂ = 0, x₁ > 0}` until consecutive return points agree to relative
/// machine accuracy; the last full revolution is then resampled at uniform
/// polar angles to build the chart. Fails with typed errors when the
/// trajectory escapes, never returns, or winds non-monotonically.
pub fn find_limit_cycle(
    sys: &DynamicalSystem,
    guess: &[f64],
    config: &CycleConfig,
) -> Result<LimitCycleParam> {
    if sys.dim() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: sys.dim(),
        });
    }
    let rhs = sys.rhs();
    let mut t = 0.0;
    let mut x = guess.to_vec();
    if config.transient_time > 0.0 {
        let traj = ode::integrate(rhs, &x, 0.0, config.transient_time, &config.ode)?;
        t = traj.end_time();
        x = traj.end_state().to_vec();
    }

    // Converge the positive-x₁ Poincaré return map.
    let section = Section {
        axis: 1,
        value: 0.0,
        direction: 0.0,
    };
    let guess_norm = guess.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut returns: Vec<(f64, f64)> = Vec::new(); // (time, x₁)
    let mut consecutive_converged = 0usize;
    for _ in 0..config.max_returns {
        let (tc, xc) = ode::next_crossing(
            rhs,
            &x,
            t,
            section,
            1e-9,
            config.max_return_time,
            &config.ode,
        )?;
        t = tc;
        x = xc;
        if x[0] <= 0.0 {
            continue;
        }
        // A spiral onto a focus at the origin shows up as section returns
        // collapsing toward radius zero; that is not a limit cycle.
        if x[0] < 1e-10 * (1.0 + guess_norm) {
            return Err(Error::AnnulusDegenerate {
                theta: 0.0,
                value: x[0],
            });
        }
        if let Some(&(_, r_prev)) = returns.last() {
            if (x[0] - r_prev).abs() < RETURN_TOL * (1.0 + x[0].abs()) {
                consecutive_converged += 1;
            } else {
                consecutive_converged = 0;
            }
        }
        returns.push((t, x[0]));
        if consecutive_converged >= 2 {
            break;
        }
    }
    if consecutive_converged < 2 {
        return Err(Error::NoConvergence {
            iters: config.max_returns,
        });
    }
    let n_ret = returns.len();
    let period = returns[n_ret - 1].0 - returns[n_ret - 2].0;
    let start = vec![x[0], 0.0];

    // One dense revolution from the converged section point.
    let traj = ode::integrate(rhs, &start, 0.0, period, &config.ode)?;
    let endpoint = traj.end_state();
    let closure = ((endpoint[0] - start[0]).powi(2) + endpoint[1].powi(2)).sqrt();
    if closure > CLOSURE_TOL * (1.0 + start[0].abs()) {
        return Err(Error::BoundaryInconsistent { dev: closure });
    }

    // Polar angle must advance monotonically along the whole revolution.
    let mut w_min = f64::INFINITY;
    let mut w_max = f64::NEG_INFINITY;
    for (xs, fs) in traj.states.iter().zip(&traj.derivs) {
        let w = theta_speed(xs, fs);
        w_min = w_min.min(w);
        w_max = w_max.max(w);
    }
    if !(w_min > 0.0 || w_max < 0.0) {
        return Err(Error::ThetaSpeedSignChange {
            min: w_min,
            max: w_max,
        });
    }
    let orientation = if w_min > 0.0 { 1.0 } else { -1.0 };

    // Unwrapped polar angle at the trajectory nodes.
    let mut unwrapped = Vec::with_capacity(traj.len());
    let mut prev = 0.0_f64;
    for (i, xs) in traj.states.iter().enumerate() {
        let mut a = xs[1].atan2(xs[0]);
        if i == 0 {
            prev = a;
        } else {
            // Shift by whole turns to stay within π of the previous node.
            while a - prev > std::f64::consts::PI {
                a -= std::f64::consts::TAU;
            }
            while a - prev < -std::f64::consts::PI {
                a += std::f64::consts::TAU;
            }
            prev = a;
        }
        unwrapped.push(a);
    }
    let total_turn = unwrapped[traj.len() - 1] - unwrapped[0];
    if (total_turn.abs() - std::f64::consts::TAU).abs() > 1e-6 {
        return Err(Error::NotStarShaped);
    }

    // Resample at uniform polar angles by Newton in time, re-integrating
    // from the bracketing node for full accuracy.
    let m = config.samples;
    let mut radius_samples = vec![0.0; m];
    let mut fx = [0.0, 0.0];
    for j in 0..m {
        let target = unwrapped[0] + orientation * std::f64::consts::TAU * j as f64 / m as f64;
        // Bracket the target among the nodes (monotone unwrapped angle).
        let mut lo = 0usize;
        let mut hi = traj.len() - 1;
        while hi - lo > 1 {
            let mid = (lo + hi) / 2;
            let passed = if orientation > 0.0 {
                unwrapped[mid] <= target
            } else {
                unwrapped[mid] >= target
            };
            if passed {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        let ta = traj.times[lo];
        let xa = traj.states[lo].clone();
        let frac = if unwrapped[hi] != unwrapped[lo] {
            ((target - unwrapped[lo]) / (unwrapped[hi] - unwrapped[lo])).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let mut tc = ta + frac * (traj.times[hi] - ta);
        let mut xc = xa.clone();
        if j == 0 {
            radius_samples[0] = xa[0].hypot(xa[1]);
            continue;
        }
        for _ in 0..30 {
            xc = ode::flow_to(rhs, &xa, ta, tc, &config.ode)?;
            let mut a = xc[1].atan2(xc[0]);
            // Compare against the target modulo full turns.
            let mut diff = a - target;
            while diff > std::f64::consts::PI {
                a -= std::f64::consts::TAU;
                diff = a - target;
            }
            while diff < -std::f64::consts::PI {
                a += std::f64::consts::TAU;
                diff = a - target;
            }
            rhs(tc, &xc, &mut fx);
            let w = theta_speed(&xc, &fx);
            if diff.abs() < 1e-13 {
                break;
            }
            tc -= diff / w;
        }
        radius_samples[j] = xc[0].hypot(xc[1]);
    }

    let r_max = radius_samples.iter().fold(0.0_f64, |a, &b| a.max(b));
    let e_r_norm = config.e_r_norm.unwrap_or(2.0 * r_max);
    LimitCycleParam::from_samples(period, orientation, radius_samples, e_r_norm, config.delta)
}

// ---------------------------------------------------------------------------
// Floquet exponents
// ---------------------------------------------------------------------------

/// Floquet data for a planar limit cycle.
#[derive(Clone, Debug)]
pub struct FloquetReport {
    /// Cycle period.
    pub period: f64,
    /// Nontrivial Floquet exponents (the trivial 0 is excluded). For a
    /// planar cycle this holds one entry, computed from the divergence
    /// integral `(1/T)∮ ∇·F dt` (the trivial exponent is 0, so the integral
    /// equals the nontrivial exponent on the plane).
    pub nontrivial_exponents: Vec<Complex64>,
    /// Monodromy-matrix eigenvalues.
    pub monodromy_multipliers: Vec<Complex64>,
    /// `|μ − 1|` for the multiplier closest to the mandatory trivial 1.
    pub trivial_deviation: f64,
}

impl FloquetReport {
    /// The planar nontrivial exponent (real by construction on ℝ²).
    pub fn planar_exponent(&self) -> f64 {
        self.nontrivial_exponents[0].re
    }
}

/// Deviation of the trivial Floquet multiplier from 1 beyond which the
/// located cycle (or the integration) is considered inconsistent.
const TRIVIAL_MULTIPLIER_TOL: f64 = 1e-4;

/// Compute Floquet exponents by integrating the augmented system
/// `[x, Ψ, q]` with `Ψ̇ = J(x)Ψ`, `q̇ = ∇·F(x)` over one period from the
/// chart's θ = 0 cycle point. The nontrivial exponent is stored back on the
/// chart (`lc.floquet_exponent()`).
///
/// The monodromy spectrum is used only to verify the trivial multiplier:
/// the nontrivial exponent comes from `q(T)/T`, which resolves strongly
/// attracting cycles whose multiplier underflows the monodromy eigenvalue
/// problem's accuracy.
pub fn floquet_exponents(
    sys: &DynamicalSystem,
    lc: &mut LimitCycleParam,
    opts: &OdeOptions,
) -> Result<FloquetReport> {
    let start = lc.to_cartesian(0.0, -lc.delta());
    // State layout: [x₀, x₁, Ψ₀₀, Ψ₁₀, Ψ₀₁, Ψ₁₁, q] (Ψ column-major).
    let mut z0 = vec![0.0; 7];
    z0[0] = start[0];
    z0[1] = start[1];
    z0[2] = 1.0;
    z0[5] = 1.0;
    let rhs = |_t: f64, z: &[f64], dz: &mut [f64]| {
        let x = [z[0], z[1]];
        let f = sys.eval(&x);
        dz[0] = f[0];
        dz[1] = f[1];
        let j = sys.jacobian(&x);
        // Ψ̇ = J Ψ, column by column.
        for col in 0..2 {
            let (p0, p1) = (z[2 + 2 * col], z[3 + 2 * col]);
            dz[2 + 2 * col] = j[[0, 0]] * p0 + j[[0, 1]] * p1;
            dz[3 + 2 * col] = j[[1, 0]] * p0 + j[[1, 1]] * p1;
        }
        dz[6] = sys.divergence(&x);
    };
    let end = ode::flow_to(rhs, &z0, 0.0, lc.period(), opts)?;
    let psi = Array2::from_shape_vec((2, 2), vec![end[2], end[4], end[3], end[5]])
        .expect("2x2 monodromy");
    let (multipliers, _) = linalg::eig(&psi)?;
    let trivial_deviation = multipliers
        .iter()
        .map(|m| (m - Complex64::new(1.0, 0.0)).norm())
        .fold(f64::INFINITY, f64::min);
    if trivial_deviation > TRIVIAL_MULTIPLIER_TOL {
        return Err(Error::TrivialMultiplier {
            dev: trivial_deviation,
        });
    }
    let nontrivial = Complex64::new(end[6] / lc.period(), 0.0);
    lc.set_floquet_exponent(nontrivial);
    Ok(FloquetReport {
        period: lc.period(),
        nontrivial_exponents: vec![nontrivial],
        monodromy_multipliers: multipliers,
        trivial_deviation,
    })
}
