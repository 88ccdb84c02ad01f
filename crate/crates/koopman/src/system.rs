//! Dynamical systems: vector fields, linearization data, and box charts.
//!
//! Fields come in two shapes. Polynomial fields carry one [`MonomialPoly`]
//! per component and support exact differentiation, recentering, and
//! pull-back onto a unit-box chart. Polar fields describe planar systems
//! `ṙ = f_r(r,θ)`, `θ̇ = ω(r,θ)` whose Cartesian right-hand side is not
//! polynomial (trigonometric modulation); they evaluate exactly through
//! trigonometric-radial series and provide analytic Jacobians and
//! divergence, which the limit-cycle pipeline needs along the cycle.

use ndarray::Array2;
use num_complex::Complex64;
use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::linalg;
use crate::poly::MonomialPoly;

// ---------------------------------------------------------------------------
// Trigonometric-radial series for polar fields
// ---------------------------------------------------------------------------

/// A finite series `Σ c_{k,n} r^k e^{inθ}` with conjugate-symmetric
/// coefficients (`c_{k,−n} = conj(c_{k,n})`), so values are real.
#[derive(Clone, Debug, Default)]
pub struct TrigRadial {
    terms: BTreeMap<(u32, i32), Complex64>,
}

/// Coefficients below this magnitude are dropped.
const TRIG_PRUNE_EPS: f64 = 1e-300;

impl TrigRadial {
    /// The zero series.
    pub fn zero() -> Self {
        Self::default()
    }

    /// The constant `c`.
    pub fn constant(c: f64) -> Self {
        let mut s = Self::zero();
        s.add_term(0, 0, Complex64::new(c, 0.0));
        s
    }

    /// The monomial `r^k`.
    pub fn radial_power(k: u32) -> Self {
        let mut s = Self::zero();
        s.add_term(k, 0, Complex64::new(1.0, 0.0));
        s
    }

    /// `amp · cos(nθ)`.
    pub fn cosine(n: u32, amp: f64) -> Self {
        let mut s = Self::zero();
        let half = Complex64::new(amp / 2.0, 0.0);
        s.add_term(0, n as i32, half);
        s.add_term(0, -(n as i32), half);
        s
    }

    /// `amp · sin(nθ)`.
    pub fn sine(n: u32, amp: f64) -> Self {
        let mut s = Self::zero();
        // sin(nθ) = (e^{inθ} − e^{−inθ}) / (2i).
        s.add_term(0, n as i32, Complex64::new(0.0, -amp / 2.0));
        s.add_term(0, -(n as i32), Complex64::new(0.0, amp / 2.0));
        s
    }

    /// Add `c · r^k e^{inθ}` (caller is responsible for keeping the series
    /// conjugate-symmetric; the built-in constructors are).
    pub fn add_term(&mut self, k: u32, n: i32, c: Complex64) {
        let entry = self
            .terms
            .entry((k, n))
            .or_insert(Complex64::new(0.0, 0.0));
        *entry += c;
        if entry.norm() < TRIG_PRUNE_EPS {
            self.terms.remove(&(k, n));
        }
    }

    /// Iterate `((k, n), coefficient)` pairs.
    pub fn terms(&self) -> impl Iterator<Item = (&(u32, i32), &Complex64)> {
        self.terms.iter()
    }

    /// True when every coefficient satisfies `c_{k,−n} = conj(c_{k,n})`.
    pub fn is_conjugate_symmetric(&self) -> bool {
        self.terms.iter().all(|(&(k, n), &c)| {
            let mirror = self
                .terms
                .get(&(k, -n))
                .copied()
                .unwrap_or(Complex64::new(0.0, 0.0));
            (mirror - c.conj()).norm() < 1e-12 * (1.0 + c.norm())
        })
    }

    /// Largest harmonic index |n| present.
    pub fn max_harmonic(&self) -> u32 {
        self.terms
            .keys()
            .map(|&(_, n)| n.unsigned_abs())
            .max()
            .unwrap_or(0)
    }

    /// Largest radial power present.
    pub fn max_power(&self) -> u32 {
        self.terms.keys().map(|&(k, _)| k).max().unwrap_or(0)
    }

    /// Evaluate (real part; exact for conjugate-symmetric series).
    pub fn eval(&self, r: f64, theta: f64) -> f64 {
        let mut acc = Complex64::new(0.0, 0.0);
        for (&(k, n), &c) in &self.terms {
            let phase = Complex64::from_polar(1.0, n as f64 * theta);
            acc += c * r.powi(k as i32) * phase;
        }
        acc.re
    }

    /// Partial derivative in `r`.
    pub fn d_r(&self) -> Self {
        let mut out = Self::zero();
        for (&(k, n), &c) in &self.terms {
            if k > 0 {
                out.add_term(k - 1, n, c * k as f64);
            }
        }
        out
    }

    /// Partial derivative in `θ`.
    pub fn d_theta(&self) -> Self {
        let mut out = Self::zero();
        for (&(k, n), &c) in &self.terms {
            if n != 0 {
                out.add_term(k, n, c * Complex64::new(0.0, n as f64));
            }
        }
        out
    }

    /// Sum with `other` scaled by `factor`.
    pub fn add_scaled(&self, other: &Self, factor: f64) -> Self {
        let mut out = self.clone();
        for (&(k, n), &c) in &other.terms {
            out.add_term(k, n, c * factor);
        }
        out
    }

    /// Product series (convolution in both indices).
    pub fn multiply(&self, other: &Self) -> Self {
        let mut out = Self::zero();
        for (&(ka, na), &ca) in &self.terms {
            for (&(kb, nb), &cb) in &other.terms {
                out.add_term(ka + kb, na + nb, ca * cb);
            }
        }
        out
    }

    /// Integer power by repeated multiplication.
    pub fn powi(&self, e: u32) -> Self {
        let mut out = Self::constant(1.0);
        for _ in 0..e {
            out = out.multiply(self);
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Vector fields and systems
// ---------------------------------------------------------------------------

/// Right-hand side of `ẋ = F(x)`.
#[derive(Clone, Debug)]
pub enum VectorField {
    /// One polynomial component per coordinate, sharing dimension and center.
    Polynomial(Vec<MonomialPoly>),
    /// Planar polar field `ṙ = f_r(r,θ)`, `θ̇ = ω(r,θ)`; Cartesian value is
    /// `F(x) = f_r·x/r + ω·(−x₂, x₁)`.
    Polar {
        /// Radial velocity as a trigonometric-radial series.
        f_r: TrigRadial,
        /// Angular velocity as a trigonometric-radial series.
        omega: TrigRadial,
    },
}

/// An autonomous dynamical system `ẋ = F(x)` with cached derivative data.
#[derive(Clone, Debug)]
pub struct DynamicalSystem {
    dim: usize,
    field: VectorField,
    /// For polynomial fields: jacobian entries ∂f_i/∂x_j, row-major.
    jac: Option<Vec<MonomialPoly>>,
    /// For polynomial fields: the divergence polynomial.
    div: Option<MonomialPoly>,
}

impl DynamicalSystem {
    /// Build from polynomial components (all sharing dimension and an
    /// origin center).
    pub fn polynomial(components: Vec<MonomialPoly>) -> Result<Self> {
        if components.is_empty() {
            return Err(Error::InvalidArgument("empty field".into()));
        }
        let dim = components.len();
        for f in &components {
            if f.dim() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: f.dim(),
                });
            }
            if f.center().iter().any(|&c| c != 0.0) {
                return Err(Error::CenterMismatch);
            }
        }
        let mut jac = Vec::with_capacity(dim * dim);
        for f in &components {
            for j in 0..dim {
                jac.push(f.partial_derivative(j)?);
            }
        }
        let mut div = MonomialPoly::zero_origin(dim);
        for i in 0..dim {
            div.add_assign_scaled(&jac[i * dim + i], Complex64::new(1.0, 0.0))?;
        }
        Ok(Self {
            dim,
            field: VectorField::Polynomial(components),
            jac: Some(jac),
            div: Some(div),
        })
    }

    /// Build a planar polar field.
    pub fn polar(f_r: TrigRadial, omega: TrigRadial) -> Result<Self> {
        if !f_r.is_conjugate_symmetric() || !omega.is_conjugate_symmetric() {
            return Err(Error::InvalidArgument(
                "polar field series must be conjugate-symmetric (real-valued)".into(),
            ));
        }
        Ok(Self {
            dim: 2,
            field: VectorField::Polar { f_r, omega },
            jac: None,
            div: None,
        })
    }

    /// State dimension.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The underlying field.
    pub fn field(&self) -> &VectorField {
        &self.field
    }

    /// Polynomial components, or a typed error for polar fields.
    pub fn polynomial_components(&self) -> Result<&[MonomialPoly]> {
        match &self.field {
            VectorField::Polynomial(c) => Ok(c),
            VectorField::Polar { .. } => Err(Error::NotPolynomial),
        }
    }

    /// True when the field is polynomial in Cartesian coordinates.
    pub fn is_polynomial(&self) -> bool {
        matches!(self.field, VectorField::Polynomial(_))
    }

    /// Evaluate `F(x)` into `out`.
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        assert_eq!(x.len(), self.dim);
        assert_eq!(out.len(), self.dim);
        match &self.field {
            VectorField::Polynomial(comps) => {
                for (o, f) in out.iter_mut().zip(comps) {
                    *o = f.eval_real(x);
                }
            }
            VectorField::Polar { f_r, omega } => {
                let r = x[0].hypot(x[1]);
                let theta = x[1].atan2(x[0]);
                let fr = f_r.eval(r, theta);
                let om = omega.eval(r, theta);
                // F = f_r·x/r + ω·(−x₂, x₁).
                out[0] = fr * x[0] / r - om * x[1];
                out[1] = fr * x[1] / r + om * x[0];
            }
        }
    }

    /// Evaluate `F(x)`.
    pub fn eval(&self, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dim];
        self.eval_into(x, &mut out);
        out
    }

    /// RHS adapter for the integrator.
    pub fn rhs(&self) -> impl Fn(f64, &[f64], &mut [f64]) + Copy + '_ {
        move |_t, x, dx| self.eval_into(x, dx)
    }

    /// Jacobian matrix at `x`.
    pub fn jacobian(&self, x: &[f64]) -> Array2<f64> {
        match &self.field {
            VectorField::Polynomial(_) => {
                let jac = self.jac.as_ref().expect("cached jacobian");
                Array2::from_shape_fn((self.dim, self.dim), |(i, j)| {
                    jac[i * self.dim + j].eval_real(x)
                })
            }
            VectorField::Polar { f_r, omega } => {
                let r = x[0].hypot(x[1]);
                let theta = x[1].atan2(x[0]);
                let u = [x[0] / r, x[1] / r];
                let v = [-x[1], x[0]];
                let fr = f_r.eval(r, theta);
                let om = omega.eval(r, theta);
                // Cartesian gradient of a scalar g(r,θ):
                // ∇g = g_r·u + g_θ·v/r².
                let grad = |g: &TrigRadial| {
                    let gr = g.d_r().eval(r, theta);
                    let gt = g.d_theta().eval(r, theta);
                    [
                        gr * u[0] + gt * v[0] / (r * r),
                        gr * u[1] + gt * v[1] / (r * r),
                    ]
                };
                let gfr = grad(f_r);
                let gom = grad(omega);
                let mut j = Array2::zeros((2, 2));
                for a in 0..2 {
                    for b in 0..2 {
                        let uu = if a == b { 1.0 } else { 0.0 } - u[a] * u[b];
                        j[[a, b]] = u[a] * gfr[b] + fr * uu / r + v[a] * gom[b];
                    }
                }
                // ω · d(−x₂, x₁)/dx.
                j[[0, 1]] -= om;
                j[[1, 0]] += om;
                j
            }
        }
    }

    /// Divergence `∇·F` at `x`.
    pub fn divergence(&self, x: &[f64]) -> f64 {
        match &self.field {
            VectorField::Polynomial(_) => self.div.as_ref().expect("cached divergence").eval_real(x),
            VectorField::Polar { f_r, omega } => {
                let r = x[0].hypot(x[1]);
                let theta = x[1].atan2(x[0]);
                f_r.d_r().eval(r, theta) + f_r.eval(r, theta) / r
                    + omega.d_theta().eval(r, theta)
            }
        }
    }

    /// Field components recentered at `x_star`, expressed in the
    /// displacement variable `y = x − x_star` (origin-centered output).
    pub fn recentered_components(&self, x_star: &[f64]) -> Result<Vec<MonomialPoly>> {
        let comps = self.polynomial_components()?;
        comps
            .iter()
            .map(|f| {
                f.recenter(x_star)?
                    .reinterpret_center(&vec![0.0; self.dim])
            })
            .collect()
    }
}

// ---------------------------------------------------------------------------
// Fixed points and linearization spectra
// ---------------------------------------------------------------------------

/// Newton iteration tolerance: absolute ∞-norm of the residual F(x).
const NEWTON_TOL: f64 = 1e-12;
/// Newton iteration cap.
const NEWTON_MAX_ITERS: usize = 100;

/// Find a fixed point of the system near `guess` by Newton's method.
/// On success `‖F(x*)‖∞ < 1e−12` (absolute).
pub fn find_fixed_point(sys: &DynamicalSystem, guess: &[f64]) -> Result<Vec<f64>> {
    let mut x = guess.to_vec();
    let mut fx = vec![0.0; sys.dim()];
    for _ in 0..NEWTON_MAX_ITERS {
        sys.eval_into(&x, &mut fx);
        let fmax = fx.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        if !fmax.is_finite() {
            return Err(Error::NonFinite {
                context: "newton residual".into(),
            });
        }
        if fmax < NEWTON_TOL {
            return Ok(x);
        }
        let j = sys.jacobian(&x);
        let rhs: Vec<f64> = fx.iter().map(|v| -v).collect();
        let step = linalg::solve_real(&j, &rhs)?;
        for (xi, si) in x.iter_mut().zip(&step) {
            *xi += si;
        }
    }
    Err(Error::NoConvergence {
        iters: NEWTON_MAX_ITERS,
    })
}

/// Linearization data at a fixed point: eigenvalues, left eigenvectors,
/// and a nonresonance flag.
#[derive(Clone, Debug)]
pub struct SpectrumReport {
    /// The fixed point the Jacobian was taken at.
    pub fixed_point: Vec<f64>,
    /// The Jacobian matrix at the fixed point.
    pub jacobian: Array2<f64>,
    /// Eigenvalues sorted by descending real part, then ascending imaginary
    /// part (the slowest—dominant—mode first for a stable spectrum).
    pub eigenvalues: Vec<Complex64>,
    /// Matching left eigenvectors `w` (`wᵀJ = λwᵀ`), unit 2-norm, phased so
    /// the first significant entry is real positive.
    pub left_eigenvectors: Vec<Vec<Complex64>>,
    /// True when no integer eigenvalue combination of total weight in
    /// `[2, 10]` reproduces an eigenvalue (see [`check_nonresonance`]).
    pub nonresonant: bool,
    /// 1-norm condition estimate of the eigenvector matrix.
    pub condition: f64,
}

/// Eigenvector-matrix condition number beyond which the Jacobian is treated
/// as defective.
const DEFECTIVE_COND: f64 = 1e10;

/// Combination order used for the `nonresonant` flag in a
/// [`SpectrumReport`]. Solvers re-check at their own truncation order.
const NONRESONANCE_REPORT_ORDER: u32 = 10;

/// Evaluate the Jacobian at a fixed point and report its spectrum.
pub fn jacobian_spectrum(sys: &DynamicalSystem, x_star: &[f64]) -> Result<SpectrumReport> {
    if x_star.len() != sys.dim() {
        return Err(Error::DimensionMismatch {
            expected: sys.dim(),
            got: x_star.len(),
        });
    }
    let j = sys.jacobian(x_star);
    spectrum_at(x_star.to_vec(), j)
}

/// Compute the sorted spectrum and left eigenvectors of the Jacobian `j`
/// taken at `fixed_point`.
fn spectrum_at(fixed_point: Vec<f64>, j: Array2<f64>) -> Result<SpectrumReport> {
    let n = j.nrows();
    let jt = j.t().to_owned();
    // Left eigenvectors of J are right eigenvectors of Jᵀ.
    let (mut vals, mut vecs) = linalg::eig(&jt)?;
    // Sort jointly: descending real part, ties by ascending imaginary part.
    let mut order: Vec<usize> = (0..vals.len()).collect();
    order.sort_by(|&a, &b| {
        vals[b]
            .re
            .partial_cmp(&vals[a].re)
            .unwrap()
            .then(vals[a].im.partial_cmp(&vals[b].im).unwrap())
    });
    vals = order.iter().map(|&i| vals[i]).collect();
    vecs = order.iter().map(|&i| vecs[i].clone()).collect();

    // Normalize: unit norm, first significant entry real positive.
    for w in &mut vecs {
        let norm = w.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt();
        for c in w.iter_mut() {
            *c /= norm;
        }
        let maxmag = w.iter().map(|c| c.norm()).fold(0.0_f64, f64::max);
        if let Some(lead) = w.iter().find(|c| c.norm() > 1e-12 * maxmag).copied() {
            let phase = lead / lead.norm();
            for c in w.iter_mut() {
                *c /= phase;
            }
        }
    }

    // Condition of the eigenvector matrix flags defective linearizations.
    let mut vm = crate::linalg::ColMat::zeros(n, n);
    for (col, w) in vecs.iter().enumerate() {
        for (row, &c) in w.iter().enumerate() {
            vm.set(row, col, c);
        }
    }
    let rcond = linalg::rcond_1(vm)?;
    let condition = if rcond > 0.0 { 1.0 / rcond } else { f64::INFINITY };
    if condition > DEFECTIVE_COND {
        return Err(Error::DefectiveJacobian { cond: condition });
    }
    let nonresonant = check_nonresonance(&vals, NONRESONANCE_REPORT_ORDER);
    Ok(SpectrumReport {
        fixed_point,
        jacobian: j,
        eigenvalues: vals,
        left_eigenvectors: vecs,
        nonresonant,
        condition,
    })
}

/// Margin below which an eigenvalue combination counts as resonant.
const RESONANCE_TOL: f64 = 1e-8;

/// Smallest margin `|λ_target − ⟨k, λ⟩|` over integer multi-indices
/// `k ≥ 0` with total weight `2 ≤ |k| ≤ max_order`, together with the
/// weight achieving it.
pub fn resonance_margin(
    eigenvalues: &[Complex64],
    target: usize,
    max_order: u32,
) -> Result<(f64, u32)> {
    if target >= eigenvalues.len() {
        return Err(Error::EigIndexOutOfRange {
            index: target,
            count: eigenvalues.len(),
        });
    }
    let lam_t = eigenvalues[target];
    let mut min_margin = f64::INFINITY;
    let mut worst_order = 0u32;
    // Depth-first enumeration of multi-indices with total degree in
    // [2, max_order].
    fn rec(
        axis: usize,
        remaining: u32,
        partial: Complex64,
        degree: u32,
        eigenvalues: &[Complex64],
        lam_t: Complex64,
        min_margin: &mut f64,
        worst_order: &mut u32,
    ) {
        if axis == eigenvalues.len() {
            if degree >= 2 {
                let margin = (partial - lam_t).norm();
                if margin < *min_margin {
                    *min_margin = margin;
                    *worst_order = degree;
                }
            }
            return;
        }
        for k in 0..=remaining {
            rec(
                axis + 1,
                remaining - k,
                partial + eigenvalues[axis] * k as f64,
                degree + k,
                eigenvalues,
                lam_t,
                min_margin,
                worst_order,
            );
        }
    }
    rec(
        0,
        max_order,
        Complex64::new(0.0, 0.0),
        0,
        eigenvalues,
        lam_t,
        &mut min_margin,
        &mut worst_order,
    );
    Ok((min_margin, worst_order))
}

/// True iff no relation `λᵢ = Σ c_k λ_k` with integer `c_k ≥ 0` and
/// `2 ≤ Σc_k ≤ max_order` holds within absolute tolerance 1e−8, for any
/// eigenvalue `λᵢ` of the list.
pub fn check_nonresonance(eigenvalues: &[Complex64], max_order: u32) -> bool {
    (0..eigenvalues.len()).all(|i| {
        resonance_margin(eigenvalues, i, max_order)
            .map(|(margin, _)| margin >= RESONANCE_TOL)
            .unwrap_or(false)
    })
}

// ---------------------------------------------------------------------------
// Box charts
// ---------------------------------------------------------------------------

/// Affine chart between the unit cube `[0,1]^N` and an axis-aligned box.
#[derive(Clone, Debug)]
pub struct BoxMap {
    /// Lower corner.
    pub lo: Vec<f64>,
    /// Upper corner (strictly above `lo` on every axis).
    pub hi: Vec<f64>,
}

impl BoxMap {
    /// Validate corners and build the chart.
    pub fn new(lo: Vec<f64>, hi: Vec<f64>) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                got: hi.len(),
            });
        }
        for (axis, (l, h)) in lo.iter().zip(&hi).enumerate() {
            if !(h > l) || !l.is_finite() || !h.is_finite() {
                return Err(Error::InvalidBox { axis });
            }
        }
        Ok(Self { lo, hi })
    }

    /// Dimension.
    pub fn dim(&self) -> usize {
        self.lo.len()
    }

    /// Per-axis widths.
    pub fn scale(&self) -> Vec<f64> {
        self.lo.iter().zip(&self.hi).map(|(l, h)| h - l).collect()
    }

    /// Map unit-cube coordinates to state space.
    pub fn to_state(&self, u: &[f64]) -> Vec<f64> {
        u.iter()
            .enumerate()
            .map(|(i, &ui)| self.lo[i] + (self.hi[i] - self.lo[i]) * ui)
            .collect()
    }

    /// Map state-space coordinates to the unit cube.
    pub fn to_unit(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .enumerate()
            .map(|(i, &xi)| (xi - self.lo[i]) / (self.hi[i] - self.lo[i]))
            .collect()
    }

    /// True when `x` lies inside the closed box.
    pub fn contains(&self, x: &[f64]) -> bool {
        x.iter()
            .enumerate()
            .all(|(i, &xi)| xi >= self.lo[i] && xi <= self.hi[i])
    }
}

/// Pull a polynomial system back onto the unit cube: with `x = lo + w∘u`
/// (w the box widths), the returned system satisfies
/// `u̇_i = f_i(lo + w∘u) / w_i`.
pub fn pull_back_field(sys: &DynamicalSystem, chart: &BoxMap) -> Result<DynamicalSystem> {
    let components = sys.polynomial_components()?;
    let dim = chart.dim();
    if components.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: components.len(),
        });
    }
    let scale = chart.scale();
    let pulled: Result<Vec<MonomialPoly>> = components
        .iter()
        .enumerate()
        .map(|(i, f)| {
            let on_unit = f.affine_substitute(&chart.lo, &scale)?;
            Ok(on_unit.scale(Complex64::new(1.0 / scale[i], 0.0)))
        })
        .collect();
    DynamicalSystem::polynomial(pulled?)
}
