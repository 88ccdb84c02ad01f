//! Stability artifacts built from Koopman eigenfunctions.
//!
//! A set of eigenfunctions with stable eigenvalues yields a candidate
//! Lyapunov function 𝒱(x) = (Σᵢ |φ_{λᵢ}(x)|^p)^{1/p}, which decays along
//! trajectories like e^{Re(λ₁)t} when the φᵢ are exact. Truncated or
//! least-squares eigenfunctions are only approximate, so this module pairs
//! the construction with independent trajectory-based checks: a
//! flow-difference decrease test on a lattice, extraction of the largest
//! certified sublevel set (a basin-of-attraction inner estimate), a
//! semigroup identity check, and a decay-envelope check. All flow
//! computations use the adaptive integrator in [`crate::ode`].

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::ode::{self, OdeOptions, Trajectory};
use crate::system::DynamicalSystem;
use crate::taylor::{self, TaylorEigenfunction};

/// Default short flow time for the Lyapunov decrease test. 𝒱 need not be
/// differentiable, so decrease is tested by comparing 𝒱 at `x` and at the
/// time-δ flow image of `x` instead of by differentiating 𝒱.
pub const DECREASE_DELTA: f64 = 1e-3;

/// Relative floor used in semigroup error denominators so points where the
/// eigenfunction nearly vanishes do not dominate the report.
pub const SEMIGROUP_FLOOR: f64 = 1e-9;

/// Multiplicative slack allowed on the decay envelope
/// 𝒱(φᵗ(x)) ≤ e^{Re(λ₁)t}·𝒱(x).
pub const ENVELOPE_SLACK: f64 = 1e-3;

/// Number of checkpoint times per trajectory in the verification routines.
const CHECKPOINTS: usize = 8;

/// A pointwise-evaluable eigenfunction paired with its eigenvalue and a
/// trusted evaluation region. Implemented by every solver output in the
/// crate and by closed-form test functions.
pub trait Eigenfunction {
    /// The eigenvalue λ with F·∇φ = λφ.
    fn eigenvalue(&self) -> Complex64;

    /// Evaluate φ at `x`.
    fn eval(&self, x: &[f64]) -> Result<Complex64>;

    /// Whether `x` lies in the region where the evaluation is trusted
    /// (everywhere for polynomials, inside the fit box or annulus for
    /// least-squares solutions).
    fn in_domain(&self, x: &[f64]) -> bool;
}

impl Eigenfunction for TaylorEigenfunction {
    fn eigenvalue(&self) -> Complex64 {
        TaylorEigenfunction::eigenvalue(self)
    }

    fn eval(&self, x: &[f64]) -> Result<Complex64> {
        taylor::eval_taylor(self, x, None)
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.center().len()
    }
}

/// A candidate Lyapunov function 𝒱(x) = (Σᵢ |φᵢ(x)|^p)^{1/p} built from
/// eigenfunctions with strictly stable eigenvalues.
pub struct LyapunovFunction {
    members: Vec<Box<dyn Eigenfunction>>,
    p: u32,
    dominant_rate: f64,
}

impl LyapunovFunction {
    /// Build from eigenfunctions and a norm exponent `p ≥ 1`. All member
    /// eigenvalues must have strictly negative real part; the dominant
    /// rate is the least-negative real part among them.
    pub fn new(members: Vec<Box<dyn Eigenfunction>>, p: u32) -> Result<Self> {
        if members.is_empty() {
            return Err(Error::InvalidArgument(
                "a Lyapunov function needs at least one eigenfunction".into(),
            ));
        }
        if p < 1 {
            return Err(Error::InvalidArgument(format!(
                "norm exponent must be at least 1, got {p}"
            )));
        }
        let mut rate = f64::NEG_INFINITY;
        for (i, m) in members.iter().enumerate() {
            let re = m.eigenvalue().re;
            if re >= 0.0 {
                return Err(Error::InvalidArgument(format!(
                    "member {i} has eigenvalue {} with non-negative real part",
                    m.eigenvalue()
                )));
            }
            rate = rate.max(re);
        }
        Ok(Self {
            members,
            p,
            dominant_rate: rate,
        })
    }

    /// Build with the default norm exponent: `p = 1` when the members form
    /// a single complex-conjugate pair (whose magnitudes coincide on real
    /// points), `p = 2` otherwise.
    pub fn with_default_p(members: Vec<Box<dyn Eigenfunction>>) -> Result<Self> {
        let p = match members.len() {
            1 if members[0].eigenvalue().im != 0.0 => 1,
            2 => {
                let (a, b) = (members[0].eigenvalue(), members[1].eigenvalue());
                let conj = (a - b.conj()).norm() <= 1e-12 * (1.0 + a.norm());
                if a.im != 0.0 && conj {
                    1
                } else {
                    2
                }
            }
            _ => 2,
        };
        Self::new(members, p)
    }

    /// Build with an explicitly claimed decay rate instead of the rate
    /// derived from the member eigenvalues. Used for negative controls
    /// and rate-sensitivity studies; the envelope check fails when the
    /// claimed rate is faster than the true one.
    pub fn with_rate(members: Vec<Box<dyn Eigenfunction>>, p: u32, rate: f64) -> Result<Self> {
        let mut v = Self::new(members, p)?;
        v.dominant_rate = rate;
        Ok(v)
    }

    /// The member eigenfunctions.
    pub fn members(&self) -> &[Box<dyn Eigenfunction>] {
        &self.members
    }

    /// The norm exponent p.
    pub fn p(&self) -> u32 {
        self.p
    }

    /// Re(λ₁): the least-negative real part among member eigenvalues, the
    /// decay rate in 𝒱(φᵗ(x)) ≤ e^{Re(λ₁)t}·𝒱(x).
    pub fn dominant_rate(&self) -> f64 {
        self.dominant_rate
    }
}

/// Evaluate 𝒱(x) = (Σᵢ |φᵢ(x)|^p)^{1/p}. Fails when `x` lies outside a
/// member's trusted region.
pub fn lyapunov_value(v: &LyapunovFunction, x: &[f64]) -> Result<f64> {
    let mut acc = 0.0_f64;
    for (index, m) in v.members.iter().enumerate() {
        if !m.in_domain(x) {
            return Err(Error::OutsideDomain { index });
        }
        let mag = m.eval(x)?.norm();
        acc += mag.powi(v.p as i32);
    }
    Ok(acc.powf(1.0 / v.p as f64))
}

/// Flow the system for time `t` from `x0` with tight tolerances
/// (relative 1e−10, absolute 1e−12) and return the endpoint. States whose
/// max-norm exceeds 1e8 produce a typed escape error carrying the escape
/// time.
pub fn integrate_flow(sys: &DynamicalSystem, x0: &[f64], t: f64) -> Result<Vec<f64>> {
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "flow duration must be finite, got {t}"
        )));
    }
    if x0.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: x0.len(),
        });
    }
    ode::flow_to(
        |_t, x, dx| sys.eval_into(x, dx),
        x0,
        0.0,
        t,
        &OdeOptions::default(),
    )
}

/// Like [`integrate_flow`] but returns the dense trajectory (accepted
/// integrator nodes with derivatives, resampleable by cubic Hermite
/// interpolation).
pub fn flow_trajectory(sys: &DynamicalSystem, x0: &[f64], t: f64) -> Result<Trajectory> {
    if !t.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "flow duration must be finite, got {t}"
        )));
    }
    if x0.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: x0.len(),
        });
    }
    ode::integrate(
        |_t, x, dx| sys.eval_into(x, dx),
        x0,
        0.0,
        t,
        &OdeOptions::default(),
    )
}

/// A rectangular sample lattice: `resolution[a]` evenly spaced points per
/// axis spanning `[lower[a], upper[a]]` inclusive. Flat indexing is
/// row-major with the last axis fastest.
#[derive(Clone, Debug)]
pub struct GridSpec {
    lower: Vec<f64>,
    upper: Vec<f64>,
    resolution: Vec<usize>,
}

impl GridSpec {
    /// Build a lattice; bounds must be finite with `upper > lower` and at
    /// least two points per axis.
    pub fn new(lower: Vec<f64>, upper: Vec<f64>, resolution: Vec<usize>) -> Result<Self> {
        if lower.len() != upper.len() || lower.len() != resolution.len() {
            return Err(Error::DimensionMismatch {
                expected: lower.len(),
                got: upper.len().max(resolution.len()),
            });
        }
        if lower.is_empty() {
            return Err(Error::InvalidArgument("empty grid specification".into()));
        }
        for a in 0..lower.len() {
            if !(lower[a].is_finite() && upper[a].is_finite() && upper[a] > lower[a]) {
                return Err(Error::InvalidBox { axis: a });
            }
            if resolution[a] < 2 {
                return Err(Error::InvalidArgument(format!(
                    "grid needs at least 2 points per axis, got {} on axis {a}",
                    resolution[a]
                )));
            }
        }
        Ok(Self {
            lower,
            upper,
            resolution,
        })
    }

    /// Number of axes.
    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Lower bounds per axis.
    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    /// Upper bounds per axis.
    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    /// Points per axis.
    pub fn resolution(&self) -> &[usize] {
        &self.resolution
    }

    /// Total number of lattice points.
    pub fn len(&self) -> usize {
        self.resolution.iter().product()
    }

    /// True when the lattice has no points (never, for a valid spec).
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Lattice spacing along an axis.
    pub fn spacing(&self, axis: usize) -> f64 {
        (self.upper[axis] - self.lower[axis]) / (self.resolution[axis] - 1) as f64
    }

    /// The multi-index of a flat index (last axis fastest).
    pub fn unravel(&self, flat: usize) -> Vec<usize> {
        let mut idx = vec![0usize; self.dim()];
        let mut rem = flat;
        for a in (0..self.dim()).rev() {
            idx[a] = rem % self.resolution[a];
            rem /= self.resolution[a];
        }
        idx
    }

    /// The flat index of a multi-index (last axis fastest).
    pub fn flat_index(&self, idx: &[usize]) -> usize {
        let mut flat = 0usize;
        for a in 0..self.dim() {
            flat = flat * self.resolution[a] + idx[a];
        }
        flat
    }

    /// Coordinates of the lattice point with the given flat index.
    pub fn point(&self, flat: usize) -> Vec<f64> {
        self.unravel(flat)
            .iter()
            .enumerate()
            .map(|(a, &i)| self.lower[a] + self.spacing(a) * i as f64)
            .collect()
    }

    /// Flat index of the lattice point nearest to `x` (clamped to the box).
    pub fn nearest_index(&self, x: &[f64]) -> usize {
        let idx: Vec<usize> = (0..self.dim())
            .map(|a| {
                let t = (x[a] - self.lower[a]) / self.spacing(a);
                (t.round().max(0.0) as usize).min(self.resolution[a] - 1)
            })
            .collect();
        self.flat_index(&idx)
    }

    /// Flat indices of the face neighbors (2·dim in the interior; fewer on
    /// the lattice boundary). In the plane this is 4-neighbor connectivity.
    pub fn face_neighbors(&self, flat: usize) -> Vec<usize> {
        let idx = self.unravel(flat);
        let mut out = Vec::with_capacity(2 * self.dim());
        for a in 0..self.dim() {
            if idx[a] > 0 {
                let mut j = idx.clone();
                j[a] -= 1;
                out.push(self.flat_index(&j));
            }
            if idx[a] + 1 < self.resolution[a] {
                let mut j = idx.clone();
                j[a] += 1;
                out.push(self.flat_index(&j));
            }
        }
        out
    }

    /// True when the flat index lies on the outermost lattice ring.
    pub fn on_boundary(&self, flat: usize) -> bool {
        self.unravel(flat)
            .iter()
            .enumerate()
            .any(|(a, &i)| i == 0 || i + 1 == self.resolution[a])
    }
}

/// Controls for the flow-difference decrease test.
#[derive(Clone, Debug)]
pub struct DecreaseOptions {
    /// Short flow time δ in the comparison 𝒱(φ^δ(x)) < 𝒱(x).
    pub delta: f64,
}

impl Default for DecreaseOptions {
    fn default() -> Self {
        Self {
            delta: DECREASE_DELTA,
        }
    }
}

/// Lattice evaluation of a Lyapunov candidate: 𝒱 values, the decrease
/// flags from the flow-difference test, and the per-point decrease margins
/// (𝒱(x) − 𝒱(φ^δ(x)))/δ ≈ −d𝒱/dt. Entries are NaN where evaluation or
/// integration failed.
#[derive(Clone, Debug)]
pub struct DecreaseGrid {
    /// The lattice.
    pub spec: GridSpec,
    /// 𝒱 at each lattice point.
    pub values: Vec<f64>,
    /// Whether 𝒱 strictly decreases over the δ-flow at each point (points
    /// where 𝒱 is exactly zero — the fixed point — count as decreasing).
    pub decreasing: Vec<bool>,
    /// Forward difference quotient (𝒱(x) − 𝒱(φ^δ(x)))/δ.
    pub margins: Vec<f64>,
}

/// Mark, at every lattice point, whether 𝒱 decreases along the flow: the
/// short-time comparison 𝒱(φ^δ(x)) < 𝒱(x) with δ from `opts`. The flow
/// comparison avoids differentiating 𝒱, which need not be smooth.
pub fn decrease_region(
    v: &LyapunovFunction,
    sys: &DynamicalSystem,
    spec: &GridSpec,
    opts: &DecreaseOptions,
) -> Result<DecreaseGrid> {
    if spec.dim() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: spec.dim(),
        });
    }
    if !(opts.delta.is_finite() && opts.delta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "decrease-test flow time must be positive, got {}",
            opts.delta
        )));
    }
    let n = spec.len();
    let mut values = vec![f64::NAN; n];
    let mut decreasing = vec![false; n];
    let mut margins = vec![f64::NAN; n];
    for flat in 0..n {
        let x = spec.point(flat);
        let Ok(val) = lyapunov_value(v, &x) else {
            continue;
        };
        values[flat] = val;
        let Ok(x_next) = integrate_flow(sys, &x, opts.delta) else {
            continue;
        };
        let Ok(val_next) = lyapunov_value(v, &x_next) else {
            continue;
        };
        if !(val.is_finite() && val_next.is_finite()) {
            continue;
        }
        decreasing[flat] = val_next < val || val == 0.0;
        margins[flat] = (val - val_next) / opts.delta;
    }
    Ok(DecreaseGrid {
        spec: spec.clone(),
        values,
        decreasing,
        margins,
    })
}

/// The largest certified sublevel set of a Lyapunov candidate on a lattice.
#[derive(Clone, Debug)]
pub struct BasinEstimate {
    /// The certified level c (0 when nothing could be certified).
    pub level: f64,
    /// The decrease-test lattice the estimate was extracted from.
    pub grid: DecreaseGrid,
    /// Per-point flag: in the certified sublevel component containing x*.
    pub inside: Vec<bool>,
    /// Per-point flag: the one-cell safety ring around the component.
    pub boundary: Vec<bool>,
    /// Whether a positive level was certified.
    pub certified: bool,
    /// Minimum of (𝒱(x) − 𝒱(φ^δ(x)))/δ over the component (excluding the
    /// equilibrium's own cell, where the quotient is rounding noise);
    /// positive when certified.
    pub decrease_margin: f64,
}

impl BasinEstimate {
    /// Number of lattice points inside the certified component.
    pub fn inside_count(&self) -> usize {
        self.inside.iter().filter(|&&b| b).count()
    }
}

/// Extract the largest level `c` such that the connected c-sublevel
/// component containing `x_star` consists of decreasing-marked cells
/// (the equilibrium's own cell excepted — the flow is stationary there)
/// and is surrounded by a one-cell ring of decreasing-marked cells (so
/// the true level set cannot graze a non-decreasing region between
/// samples). The component growing to touch the lattice boundary limits
/// `c`. When no positive level passes, the estimate is returned
/// uncertified with c = 0.
pub fn basin_estimate(
    v: &LyapunovFunction,
    sys: &DynamicalSystem,
    spec: &GridSpec,
    x_star: &[f64],
    opts: &DecreaseOptions,
) -> Result<BasinEstimate> {
    let grid = decrease_region(v, sys, spec, opts)?;
    basin_from_grid(grid, x_star)
}

/// [`basin_estimate`] starting from an already computed decrease lattice.
pub fn basin_from_grid(grid: DecreaseGrid, x_star: &[f64]) -> Result<BasinEstimate> {
    if x_star.len() != grid.spec.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.spec.dim(),
            got: x_star.len(),
        });
    }
    let spec = &grid.spec;
    let seed = spec.nearest_index(x_star);
    let n = spec.len();

    // Candidate levels: distinct positive lattice values, ascending. The
    // pass predicate is monotone (a larger level only grows the component
    // and its ring), so the largest passing level is found by bisection.
    let mut candidates: Vec<f64> = grid
        .values
        .iter()
        .copied()
        .filter(|v| v.is_finite() && *v > 0.0)
        .collect();
    candidates.sort_by(|a, b| a.partial_cmp(b).unwrap());
    candidates.dedup();

    let component_at = |c: f64| -> Option<Vec<usize>> {
        if !(grid.values[seed].is_finite() && grid.values[seed] <= c) {
            return None;
        }
        let mut seen = vec![false; n];
        let mut queue = vec![seed];
        let mut cells = Vec::new();
        seen[seed] = true;
        while let Some(cell) = queue.pop() {
            cells.push(cell);
            for nb in spec.face_neighbors(cell) {
                if !seen[nb] && grid.values[nb].is_finite() && grid.values[nb] <= c {
                    seen[nb] = true;
                    queue.push(nb);
                }
            }
        }
        Some(cells)
    };

    // The equilibrium's own cell is exempt from the strict-decrease
    // requirement: the flow is (numerically) stationary there, so the
    // comparison 𝒱(φ^δ(x)) < 𝒱(x) degenerates to rounding noise whenever
    // 𝒱(x*) is merely close to zero rather than exactly zero.
    let passes = |c: f64| -> bool {
        let Some(cells) = component_at(c) else {
            return false;
        };
        for &cell in &cells {
            if cell != seed && !grid.decreasing[cell] {
                return false;
            }
            // One-cell safety margin: every neighbor must exist (the
            // component may not touch the lattice edge) and be decreasing.
            if spec.on_boundary(cell) {
                return false;
            }
            for nb in spec.face_neighbors(cell) {
                if nb != seed && !grid.decreasing[nb] {
                    return false;
                }
            }
        }
        true
    };

    let mut best: Option<f64> = None;
    if !candidates.is_empty() && passes(candidates[0]) {
        let (mut lo, mut hi) = (0usize, candidates.len() - 1);
        if passes(candidates[hi]) {
            lo = hi;
        } else {
            // Invariant: passes(candidates[lo]) && !passes(candidates[hi]).
            while hi - lo > 1 {
                let mid = (lo + hi) / 2;
                if passes(candidates[mid]) {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
        }
        best = Some(candidates[lo]);
    }

    let mut inside = vec![false; n];
    let mut boundary = vec![false; n];
    let (level, certified, decrease_margin) = match best {
        Some(c) => {
            let cells = component_at(c).expect("certified level lost its component");
            for &cell in &cells {
                inside[cell] = true;
            }
            for &cell in &cells {
                for nb in spec.face_neighbors(cell) {
                    if !inside[nb] {
                        boundary[nb] = true;
                    }
                }
            }
            let margin = cells
                .iter()
                .filter(|&&cell| cell != seed && grid.values[cell] > 0.0)
                .map(|&cell| grid.margins[cell])
                .fold(f64::INFINITY, f64::min);
            let margin = if margin.is_finite() { margin } else { 0.0 };
            (c, true, margin)
        }
        None => (0.0, false, 0.0),
    };

    Ok(BasinEstimate {
        level,
        grid,
        inside,
        boundary,
        certified,
        decrease_margin,
    })
}

/// Outcome of a semigroup identity check.
#[derive(Clone, Copy, Debug)]
pub struct SemigroupReport {
    /// Max over points and checkpoints of
    /// |φ(φᵗ(x)) − e^{λt}φ(x)| / max(|φ(x)|, 1e−9).
    pub max_rel_error: f64,
    /// Points abandoned because the trajectory left the eigenfunction's
    /// trusted region or escaped.
    pub skipped: usize,
    /// Total point–checkpoint comparisons performed.
    pub checked: usize,
}

/// Check the evolution identity φ(φᵗ(x)) = e^{λt}·φ(x) along trajectories
/// from the given points, at eight checkpoint times spanning `(0, horizon]`.
/// Each point's error is normalized by max(|φ(x)|, 1e−9). Trajectories that
/// leave the trusted region or escape are skipped and counted.
pub fn verify_semigroup(
    ef: &dyn Eigenfunction,
    lambda: Complex64,
    sys: &DynamicalSystem,
    points: &[Vec<f64>],
    horizon: f64,
) -> Result<SemigroupReport> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "verification horizon must be positive, got {horizon}"
        )));
    }
    let mut max_rel_error = 0.0_f64;
    let mut skipped = 0usize;
    let mut checked = 0usize;
    'points: for x0 in points {
        if !ef.in_domain(x0) {
            skipped += 1;
            continue;
        }
        let phi0 = ef.eval(x0)?;
        let denom = phi0.norm().max(SEMIGROUP_FLOOR);
        let mut x = x0.clone();
        let mut t = 0.0;
        for j in 1..=CHECKPOINTS {
            let t_j = horizon * j as f64 / CHECKPOINTS as f64;
            x = match integrate_flow(sys, &x, t_j - t) {
                Ok(x) => x,
                Err(Error::Escape { .. }) => {
                    skipped += 1;
                    continue 'points;
                }
                Err(e) => return Err(e),
            };
            t = t_j;
            if !ef.in_domain(&x) {
                skipped += 1;
                continue 'points;
            }
            let phi_t = ef.eval(&x)?;
            let predicted = (lambda * t_j).exp() * phi0;
            max_rel_error = max_rel_error.max((phi_t - predicted).norm() / denom);
            checked += 1;
        }
    }
    Ok(SemigroupReport {
        max_rel_error,
        skipped,
        checked,
    })
}

/// Check the decay envelope 𝒱(φᵗ(x)) ≤ e^{Re(λ₁)t}·𝒱(x) at eight
/// checkpoint times per point, allowing a multiplicative slack of
/// 1 + 1e−3. Points whose trajectories escape or leave a member's trusted
/// region are skipped. Returns true when every performed comparison holds.
pub fn verify_decay_envelope(
    v: &LyapunovFunction,
    sys: &DynamicalSystem,
    points: &[Vec<f64>],
    horizon: f64,
) -> Result<bool> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "verification horizon must be positive, got {horizon}"
        )));
    }
    'points: for x0 in points {
        let Ok(v0) = lyapunov_value(v, x0) else {
            continue;
        };
        let mut x = x0.clone();
        let mut t = 0.0;
        for j in 1..=CHECKPOINTS {
            let t_j = horizon * j as f64 / CHECKPOINTS as f64;
            x = match integrate_flow(sys, &x, t_j - t) {
                Ok(x) => x,
                Err(Error::Escape { .. }) => continue 'points,
                Err(e) => return Err(e),
            };
            t = t_j;
            let Ok(v_t) = lyapunov_value(v, &x) else {
                continue 'points;
            };
            let envelope = (v.dominant_rate * t_j).exp() * v0;
            if v_t > envelope * (1.0 + ENVELOPE_SLACK) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_indexing_round_trips_with_last_axis_fastest() {
        let spec = GridSpec::new(vec![0.0, -1.0], vec![1.0, 1.0], vec![3, 5]).unwrap();
        assert_eq!(spec.len(), 15);
        // Flat index 1 advances the LAST axis.
        assert_eq!(spec.point(0), vec![0.0, -1.0]);
        assert_eq!(spec.point(1), vec![0.0, -0.5]);
        assert_eq!(spec.point(5), vec![0.5, -1.0]);
        for flat in 0..spec.len() {
            assert_eq!(spec.flat_index(&spec.unravel(flat)), flat);
            assert_eq!(spec.nearest_index(&spec.point(flat)), flat);
        }
        assert!(spec.on_boundary(0));
        assert!(!spec.on_boundary(spec.flat_index(&[1, 2])));
        assert_eq!(spec.face_neighbors(spec.flat_index(&[1, 2])).len(), 4);
        assert_eq!(spec.face_neighbors(0).len(), 2);
    }

    #[test]
    fn invalid_grids_are_rejected() {
        assert!(matches!(
            GridSpec::new(vec![0.0], vec![0.0], vec![4]),
            Err(Error::InvalidBox { axis: 0 })
        ));
        assert!(GridSpec::new(vec![0.0], vec![1.0], vec![1]).is_err());
        assert!(GridSpec::new(vec![0.0, 0.0], vec![1.0], vec![2]).is_err());
    }
}
