//! Fourier–Bernstein eigenfunctions on an annulus around a planar limit
//! cycle.
//!
//! In the annular chart `(θ, y)` of a located cycle, the eigenfunction
//! equation F·∇φ = λφ reads F_y ∂φ/∂y + F_θ ∂φ/∂θ = λφ with λ the
//! nontrivial Floquet exponent. The ansatz is a tensor basis of Fourier
//! harmonics e^{inθ} (|n| ≤ n̄) against Bernstein polynomials b_k^s(y) on
//! the radial strip. The chart velocities are first projected onto the
//! same kind of basis at a lower degree s′, which turns multiplication and
//! differentiation into structured (Kronecker) coefficient operators:
//! harmonic shifts in θ, banded degree-raising products in y. Boundary
//! rows pin φ = 0 on the cycle and ∂φ/∂y = g(θ) there, where g solves a
//! scalar linear ODE along the cycle and normalizes the eigenfunction via
//! g(0) = 1. The stacked system is solved by minimum-norm least squares
//! and the relative residual certifies the result, exactly as in the
//! fixed-point box solver.

use ndarray::Array2;
use num_complex::Complex64;

use crate::bernstein::{
    basis_mult_matrix_1d, diff_matrix_1d, eval_basis_1d, eval_basis_deriv_1d, raise_matrix_1d,
    to_complex, KronMat, KronSum,
};
use crate::cycle::{polar_dynamics, LimitCycleParam};
use crate::error::{Error, Result};
use crate::linalg::{self, ColMat};
use crate::stability::Eigenfunction;
use crate::system::DynamicalSystem;

/// Relative residual at or below which a solution is certified accurate.
pub const LC_RESIDUAL_THRESHOLD: f64 = 1e-3;

/// Relative grid deviation above which a field projection is rejected.
pub const PROJECTION_TOL: f64 = 1e-4;

/// Permitted drift |g(2π) − g(0)| of the boundary derivative function; a
/// larger value means λ is not the Floquet exponent of this cycle.
pub const BOUNDARY_PERIODICITY_TOL: f64 = 1e-6;

/// Relative magnitude above which a skipped harmonic makes a symmetry
/// stride unsound.
const STRIDE_TOL: f64 = 1e-10;

/// Relative magnitude below which projected field coefficients are dropped.
const DROP_TOL: f64 = 1e-12;

/// Slack in chart coordinates when testing annulus membership.
const ANNULUS_EDGE_TOL: f64 = 1e-9;

/// Finite-difference step for ∂F_y/∂y on the cycle.
const FD_STEP: f64 = 1e-6;

/// Solver configuration.
#[derive(Clone, Debug)]
pub struct LcOptions {
    /// Weight applied to the boundary rows; `None` uses
    /// √(PDE rows / boundary rows), balancing the two blocks.
    pub boundary_weight: Option<f64>,
    /// Residual threshold for the certified flag.
    pub residual_threshold: f64,
    /// Relative singular-value cutoff for the pseudoinverse.
    pub sv_cutoff: f64,
}

impl Default for LcOptions {
    fn default() -> Self {
        Self {
            boundary_weight: None,
            residual_threshold: LC_RESIDUAL_THRESHOLD,
            sv_cutoff: 1e-12,
        }
    }
}

/// Chart velocity components in the Fourier–Bernstein basis.
#[derive(Clone, Debug)]
pub struct FieldProjection {
    n_bar: usize,
    s_prime: usize,
    /// Sparse F_θ coefficients as (harmonic n, Bernstein index k, value).
    f_theta: Vec<(i64, usize, Complex64)>,
    /// Sparse F_y coefficients in the same layout.
    f_y: Vec<(i64, usize, Complex64)>,
    /// Max deviation of the F_θ projection on the sampling grid.
    pub grid_error_theta: f64,
    /// Max deviation of the F_y projection on the sampling grid.
    pub grid_error_y: f64,
    /// Max |F_θ| over the grid.
    pub scale_theta: f64,
    /// Max |F_y| over the grid.
    pub scale_y: f64,
}

impl FieldProjection {
    /// Harmonic truncation of the representation.
    pub fn n_bar(&self) -> usize {
        self.n_bar
    }

    /// Bernstein degree of the representation.
    pub fn s_prime(&self) -> usize {
        self.s_prime
    }

    /// Retained F_θ coefficients as (n, k, value).
    pub fn theta_terms(&self) -> &[(i64, usize, Complex64)] {
        &self.f_theta
    }

    /// Retained F_y coefficients as (n, k, value).
    pub fn y_terms(&self) -> &[(i64, usize, Complex64)] {
        &self.f_y
    }

    /// Largest coefficient magnitude on harmonic n of F_y.
    pub fn y_harmonic_magnitude(&self, n: i64) -> f64 {
        self.f_y
            .iter()
            .filter(|(m, _, _)| *m == n)
            .map(|(_, _, c)| c.norm())
            .fold(0.0, f64::max)
    }
}

/// Chebyshev-spaced sample points on [0, 1] (first kind, no endpoints).
fn chebyshev_nodes(count: usize) -> Vec<f64> {
    (0..count)
        .map(|j| {
            let t = std::f64::consts::PI * (2.0 * j as f64 + 1.0) / (2.0 * count as f64);
            0.5 * (1.0 - t.cos())
        })
        .collect()
}

/// Uniform angles θ_i = 2πi/m.
fn uniform_angles(m: usize) -> Vec<f64> {
    (0..m)
        .map(|i| std::f64::consts::TAU * i as f64 / m as f64)
        .collect()
}

/// Least-squares Fourier coefficients (|n| ≤ n_max) of values sampled on
/// the uniform angles; with 4(2n̄+1) samples this is the plain discrete
/// transform.
fn fourier_fit(values: &[Complex64], angles: &[f64], n_max: i64) -> Vec<Complex64> {
    let m = values.len() as f64;
    (-n_max..=n_max)
        .map(|n| {
            values
                .iter()
                .zip(angles)
                .map(|(v, &t)| v * Complex64::from_polar(1.0, -(n as f64) * t))
                .sum::<Complex64>()
                / m
        })
        .collect()
}

/// Project the chart velocities (F_θ, F_y) onto e^{inθ} b_k^{s′}(y) by
/// sampling on a 4(2n̄+1) × 2(s′+1) tensor grid (uniform θ, Chebyshev y)
/// and least-squares fitting. The reported grid errors are the max
/// deviations of the fit on that grid; a deviation above 1e−4 of the
/// component scale fails with a typed error — raise n̄ or s′ to fix.
pub fn project_field(
    sys: &DynamicalSystem,
    lc: &LimitCycleParam,
    n_bar: usize,
    s_prime: usize,
) -> Result<FieldProjection> {
    let thetas = uniform_angles(4 * (2 * n_bar + 1));
    let ys = chebyshev_nodes(2 * (s_prime + 1));

    let mut samples_theta = vec![vec![Complex64::new(0.0, 0.0); ys.len()]; thetas.len()];
    let mut samples_y = samples_theta.clone();
    for (i, &t) in thetas.iter().enumerate() {
        for (j, &y) in ys.iter().enumerate() {
            let (ft, fy) = polar_dynamics(sys, lc, t, y)?;
            samples_theta[i][j] = Complex64::new(ft, 0.0);
            samples_y[i][j] = Complex64::new(fy, 0.0);
        }
    }

    let mut out = FieldProjection {
        n_bar,
        s_prime,
        f_theta: Vec::new(),
        f_y: Vec::new(),
        grid_error_theta: 0.0,
        grid_error_y: 0.0,
        scale_theta: 0.0,
        scale_y: 0.0,
    };
    for comp in 0..2 {
        let samples = if comp == 0 { &samples_theta } else { &samples_y };
        let scale = samples
            .iter()
            .flatten()
            .map(|v| v.norm())
            .fold(0.0, f64::max);

        // Fourier transform each radial node, then fit the Bernstein
        // profile of every harmonic on the Chebyshev nodes.
        let mut harmonics = vec![vec![Complex64::new(0.0, 0.0); ys.len()]; 2 * n_bar + 1];
        for j in 0..ys.len() {
            let column: Vec<Complex64> = samples.iter().map(|row| row[j]).collect();
            let coeffs = fourier_fit(&column, &thetas, n_bar as i64);
            for (h, c) in coeffs.into_iter().enumerate() {
                harmonics[h][j] = c;
            }
        }
        let mut terms: Vec<(i64, usize, Complex64)> = Vec::new();
        for (h, profile) in harmonics.iter().enumerate() {
            let n = h as i64 - n_bar as i64;
            let mut mat = ColMat::zeros(ys.len(), s_prime + 1);
            for (j, &y) in ys.iter().enumerate() {
                for (k, &b) in eval_basis_1d(s_prime, y).iter().enumerate() {
                    mat.add(j, k, Complex64::new(b, 0.0));
                }
            }
            let fit = linalg::lstsq_min_norm(mat, profile, 1e-13)?;
            for (k, c) in fit.solution.into_iter().enumerate() {
                if c.norm() > DROP_TOL * scale {
                    terms.push((n, k, c));
                }
            }
        }

        // Grid deviation of the retained representation.
        let mut err: f64 = 0.0;
        for (i, &t) in thetas.iter().enumerate() {
            for (j, &y) in ys.iter().enumerate() {
                let basis = eval_basis_1d(s_prime, y);
                let recon: Complex64 = terms
                    .iter()
                    .map(|&(n, k, c)| c * basis[k] * Complex64::from_polar(1.0, n as f64 * t))
                    .sum();
                err = err.max((recon - samples[i][j]).norm());
            }
        }
        let bound = PROJECTION_TOL * scale;
        if err > bound {
            return Err(Error::ProjectionError { err, bound });
        }
        if comp == 0 {
            out.f_theta = terms;
            out.grid_error_theta = err;
            out.scale_theta = scale;
        } else {
            out.f_y = terms;
            out.grid_error_y = err;
            out.scale_y = scale;
        }
    }
    Ok(out)
}

/// Boundary derivative function g(θ) = ∂φ/∂y on the cycle and its Fourier
/// coefficients (|n| ≤ n̄, centered layout).
///
/// Differentiating the eigenfunction equation transversally on the cycle
/// (where φ ≡ 0 and F_y = 0) gives a scalar linear ODE along the cycle:
/// F_θ g′ = (λ − ∂F_y/∂y) g, solved by
/// g(θ) = exp(∫₀^θ (λ − ∂F_y/∂y)/F_θ dσ) with the scale fixed by g(0)=1.
/// The integrand is sampled on 4(2n̄+1) uniform nodes and integrated
/// through its trigonometric interpolant. When λ is the true Floquet
/// exponent the integrand has zero mean, making g periodic; a drift
/// |g(2π) − g(0)| beyond 1e−6 is a typed error.
pub fn boundary_c2(
    sys: &DynamicalSystem,
    lc: &LimitCycleParam,
    lambda: Complex64,
    n_bar: usize,
) -> Result<Vec<Complex64>> {
    let m = 4 * (2 * n_bar + 1);
    let thetas = uniform_angles(m);
    let y0 = -lc.delta();

    let mut integrand = vec![Complex64::new(0.0, 0.0); m];
    let mut ft_min = f64::INFINITY;
    let mut ft_max = f64::NEG_INFINITY;
    for (i, &t) in thetas.iter().enumerate() {
        let (ft, _) = polar_dynamics(sys, lc, t, y0)?;
        ft_min = ft_min.min(ft);
        ft_max = ft_max.max(ft);
        let (_, fy_up) = polar_dynamics(sys, lc, t, y0 + FD_STEP)?;
        let (_, fy_dn) = polar_dynamics(sys, lc, t, y0 - FD_STEP)?;
        let dfy_dy = (fy_up - fy_dn) / (2.0 * FD_STEP);
        integrand[i] = (lambda - dfy_dy) / ft;
    }
    if ft_min <= 0.0 && ft_max >= 0.0 {
        return Err(Error::ThetaSpeedSignChange {
            min: ft_min,
            max: ft_max,
        });
    }

    // Cumulative integral of the trigonometric interpolant: the mean term
    // integrates linearly, every other harmonic analytically.
    let k_max = (m / 2 - 1) as i64;
    let spectrum = fourier_fit(&integrand, &thetas, k_max);
    let mean = spectrum[k_max as usize];
    let drift = ((std::f64::consts::TAU * mean).exp() - Complex64::new(1.0, 0.0)).norm();
    if drift > BOUNDARY_PERIODICITY_TOL {
        return Err(Error::BoundaryInconsistent { dev: drift });
    }
    let g: Vec<Complex64> = thetas
        .iter()
        .map(|&t| {
            let mut acc = mean * t;
            for (h, &c) in spectrum.iter().enumerate() {
                let n = h as i64 - k_max;
                if n != 0 {
                    let i_n = Complex64::new(0.0, n as f64);
                    acc += c * (Complex64::from_polar(1.0, n as f64 * t) - 1.0) / i_n;
                }
            }
            acc.exp()
        })
        .collect();
    Ok(fourier_fit(&g, &thetas, n_bar as i64))
}

/// The stacked least-squares system on the annulus.
pub struct LcSystem {
    lc: LimitCycleParam,
    /// Retained unknown harmonics, ascending.
    harmonics_in: Vec<i64>,
    /// Product-space harmonics carried by the PDE rows, ascending.
    harmonics_out: Vec<i64>,
    degree: usize,
    s_prime: usize,
    n_bar: usize,
    stride: usize,
    eigenvalue: Complex64,
    pde: KronSum,
    /// b^s(−Δ) and (db^s/dy)(−Δ) for the boundary rows.
    b_row: Vec<f64>,
    db_row: Vec<f64>,
    /// c2 restricted to the retained harmonics (boundary rhs).
    c2_sel: Vec<Complex64>,
    /// Full c2 vector (stored on the eigenfunction for reporting).
    c2_full: Vec<Complex64>,
    weight: f64,
    residual_threshold: f64,
    sv_cutoff: f64,
}

impl LcSystem {
    /// Rows in the PDE block.
    pub fn pde_rows(&self) -> usize {
        self.pde.nrows()
    }

    /// Boundary rows (value + derivative per retained harmonic).
    pub fn boundary_rows(&self) -> usize {
        2 * self.harmonics_in.len()
    }

    /// Total rows.
    pub fn rows(&self) -> usize {
        self.pde_rows() + self.boundary_rows()
    }

    /// Unknown coefficients: retained harmonics × (s+1).
    pub fn unknowns(&self) -> usize {
        self.harmonics_in.len() * (self.degree + 1)
    }

    /// Bernstein degree of the field representation the rows were built at.
    pub fn s_prime(&self) -> usize {
        self.s_prime
    }

    /// The weight multiplying the boundary rows.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Retained unknown harmonics.
    pub fn harmonics(&self) -> &[i64] {
        &self.harmonics_in
    }

    /// Product-space harmonics indexing the PDE rows of [`Self::apply`].
    pub fn pde_harmonics(&self) -> &[i64] {
        &self.harmonics_out
    }

    /// Apply the weighted stacked matrix to a reduced coefficient vector.
    pub fn apply(&self, phi: &[Complex64]) -> Vec<Complex64> {
        let cols = self.degree + 1;
        let mut out = self.pde.apply(phi);
        out.reserve(self.boundary_rows());
        for block in 0..2 {
            let row = if block == 0 { &self.b_row } else { &self.db_row };
            for h in 0..self.harmonics_in.len() {
                let dot: Complex64 = (0..cols).map(|k| phi[h * cols + k] * row[k]).sum();
                out.push(dot * self.weight);
            }
        }
        out
    }

    /// The weighted right-hand side.
    pub fn rhs(&self) -> Vec<Complex64> {
        let mut b = vec![Complex64::new(0.0, 0.0); self.rows()];
        let deriv_offset = self.pde_rows() + self.harmonics_in.len();
        for (h, &c) in self.c2_sel.iter().enumerate() {
            b[deriv_offset + h] = c * self.weight;
        }
        b
    }

    /// Materialize the weighted stacked matrix column-major for LAPACK.
    pub fn to_dense(&self) -> ColMat {
        let cols = self.degree + 1;
        let mut a = ColMat::zeros(self.rows(), self.unknowns());
        self.pde.add_into(&mut a, 0, Complex64::new(1.0, 0.0));
        for block in 0..2 {
            let row = if block == 0 { &self.b_row } else { &self.db_row };
            let offset = self.pde_rows() + block * self.harmonics_in.len();
            for h in 0..self.harmonics_in.len() {
                for k in 0..cols {
                    if row[k] != 0.0 {
                        a.add(offset + h, h * cols + k, Complex64::new(row[k] * self.weight, 0.0));
                    }
                }
            }
        }
        a
    }
}

/// Check that no skipped harmonic carries energy when a stride is used.
fn check_stride(
    stride: usize,
    terms: &[(i64, usize, Complex64)],
    scale: f64,
) -> Result<()> {
    if stride <= 1 {
        return Ok(());
    }
    for &(n, _, c) in terms {
        if n.rem_euclid(stride as i64) != 0 && c.norm() > STRIDE_TOL * scale {
            return Err(Error::StrideUnsound {
                stride,
                harmonic: n,
                magnitude: c.norm(),
            });
        }
    }
    Ok(())
}

/// Dense θ-factor of one Kronecker term: shifts unknown harmonics by n_f,
/// optionally multiplying by the θ-differentiation diagonal (i·n).
fn shift_factor(
    harmonics_out: &[i64],
    harmonics_in: &[i64],
    n_f: i64,
    differentiate: bool,
) -> Array2<Complex64> {
    let mut m = Array2::zeros((harmonics_out.len(), harmonics_in.len()));
    for (j, &n_in) in harmonics_in.iter().enumerate() {
        let target = n_in + n_f;
        if let Ok(i) = harmonics_out.binary_search(&target) {
            m[[i, j]] = if differentiate {
                Complex64::new(0.0, n_in as f64)
            } else {
                Complex64::new(1.0, 0.0)
            };
        }
    }
    m
}

/// Assemble the stacked system: PDE rows in the product space (harmonics
/// up to n̄ plus the field's harmonic width, Bernstein degree s+s′),
/// then boundary value rows (φ = 0 on the cycle) and boundary derivative
/// rows (∂φ/∂y = g). With a symmetry stride m > 1, unknowns and rows for
/// harmonics not divisible by m are dropped; the stride is first checked
/// against the field and boundary spectra.
pub fn assemble_lc_system(
    lc: &LimitCycleParam,
    proj: &FieldProjection,
    c2: &[Complex64],
    lambda: Complex64,
    n_bar: usize,
    s: usize,
    harmonic_stride: usize,
    opts: &LcOptions,
) -> Result<LcSystem> {
    if harmonic_stride == 0 {
        return Err(Error::InvalidArgument("stride must be at least 1".into()));
    }
    if c2.len() != 2 * n_bar + 1 {
        return Err(Error::DimensionMismatch {
            expected: 2 * n_bar + 1,
            got: c2.len(),
        });
    }
    if proj.n_bar != n_bar {
        return Err(Error::DimensionMismatch {
            expected: n_bar,
            got: proj.n_bar,
        });
    }
    let m = harmonic_stride;
    check_stride(m, &proj.f_theta, proj.scale_theta)?;
    check_stride(m, &proj.f_y, proj.scale_y)?;
    if m > 1 {
        let c2_scale = c2.iter().map(|c| c.norm()).fold(0.0, f64::max);
        for (h, c) in c2.iter().enumerate() {
            let n = h as i64 - n_bar as i64;
            if n.rem_euclid(m as i64) != 0 && c.norm() > STRIDE_TOL * c2_scale {
                return Err(Error::StrideUnsound {
                    stride: m,
                    harmonic: n,
                    magnitude: c.norm(),
                });
            }
        }
    }

    let retained = |limit: i64| -> Vec<i64> {
        (-limit..=limit)
            .filter(|n| n.rem_euclid(m as i64) == 0)
            .collect()
    };
    let harmonics_in = retained(n_bar as i64);
    let width = proj
        .f_theta
        .iter()
        .chain(&proj.f_y)
        .map(|&(n, _, _)| n.abs())
        .max()
        .unwrap_or(0);
    let harmonics_out = retained(n_bar as i64 + width);

    let s_prime = proj.s_prime;
    // −λ·T̄ seeds the sum; each field term contributes a shifted product.
    let raise = to_complex(&raise_matrix_1d(s, s_prime)?);
    let diff = to_complex(&diff_matrix_1d(s));
    let eye_theta = shift_factor(&harmonics_out, &harmonics_in, 0, false);
    let mut pde = KronSum::new(vec![(
        -lambda,
        KronMat::new(vec![eye_theta, raise]),
    )]);
    for &(n_f, k_f, c) in &proj.f_y {
        let y_factor = to_complex(&basis_mult_matrix_1d(s_prime, k_f, s)?).dot(&diff);
        let theta_factor = shift_factor(&harmonics_out, &harmonics_in, n_f, false);
        pde.push(c, KronMat::new(vec![theta_factor, y_factor]));
    }
    for &(n_f, k_f, c) in &proj.f_theta {
        let y_factor = to_complex(&basis_mult_matrix_1d(s_prime, k_f, s)?);
        let theta_factor = shift_factor(&harmonics_out, &harmonics_in, n_f, true);
        pde.push(c, KronMat::new(vec![theta_factor, y_factor]));
    }

    let y0 = -lc.delta();
    let b_row = eval_basis_1d(s, y0);
    let db_row = eval_basis_deriv_1d(s, y0);
    let c2_sel: Vec<Complex64> = harmonics_in
        .iter()
        .map(|&n| c2[(n + n_bar as i64) as usize])
        .collect();

    let pde_rows = harmonics_out.len() * (s + s_prime + 1);
    let boundary_rows = 2 * harmonics_in.len();
    let weight = opts
        .boundary_weight
        .unwrap_or_else(|| (pde_rows as f64 / boundary_rows as f64).sqrt());
    if !(weight.is_finite() && weight > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "boundary weight must be positive, got {weight}"
        )));
    }

    Ok(LcSystem {
        lc: lc.clone(),
        harmonics_in,
        harmonics_out,
        degree: s,
        s_prime,
        n_bar,
        stride: m,
        eigenvalue: lambda,
        pde,
        b_row,
        db_row,
        c2_sel,
        c2_full: c2.to_vec(),
        weight,
        residual_threshold: opts.residual_threshold,
        sv_cutoff: opts.sv_cutoff,
    })
}

/// An eigenfunction on the annulus in the Fourier–Bernstein basis.
#[derive(Clone, Debug)]
pub struct FourierBernsteinEigenfunction {
    lc: LimitCycleParam,
    n_bar: usize,
    degree: usize,
    eigenvalue: Complex64,
    /// Full (2n̄+1)(s+1) coefficients, harmonics ascending (−n̄ … n̄),
    /// each block holding the s+1 Bernstein coefficients. Stride-skipped
    /// harmonics hold exact zeros.
    coeffs: Vec<Complex64>,
    /// Fourier coefficients of ∂φ/∂y on the cycle.
    c2: Vec<Complex64>,
    lsq_residual: f64,
    harmonic_stride: usize,
    certified: bool,
}

impl FourierBernsteinEigenfunction {
    /// The cycle chart.
    pub fn lc(&self) -> &LimitCycleParam {
        &self.lc
    }

    /// Harmonic truncation n̄.
    pub fn n_bar(&self) -> usize {
        self.n_bar
    }

    /// Bernstein degree s.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// The eigenvalue λ (nontrivial Floquet exponent).
    pub fn eigenvalue(&self) -> Complex64 {
        self.eigenvalue
    }

    /// Full coefficient vector, harmonic-major.
    pub fn coeffs(&self) -> &[Complex64] {
        &self.coeffs
    }

    /// Fourier coefficients of the boundary derivative g.
    pub fn c2(&self) -> &[Complex64] {
        &self.c2
    }

    /// Relative residual of the stacked system.
    pub fn lsq_residual(&self) -> f64 {
        self.lsq_residual
    }

    /// The symmetry stride used (1 = none).
    pub fn harmonic_stride(&self) -> usize {
        self.harmonic_stride
    }

    /// Whether the residual met the certification threshold.
    pub fn certified(&self) -> bool {
        self.certified
    }

    /// Rebuild from stored parts (e.g. a report file).
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        lc: LimitCycleParam,
        n_bar: usize,
        degree: usize,
        eigenvalue: Complex64,
        coeffs: Vec<Complex64>,
        c2: Vec<Complex64>,
        lsq_residual: f64,
        harmonic_stride: usize,
        certified: bool,
    ) -> Result<Self> {
        if coeffs.len() != (2 * n_bar + 1) * (degree + 1) {
            return Err(Error::InvalidArgument(format!(
                "expected {} coefficients, got {}",
                (2 * n_bar + 1) * (degree + 1),
                coeffs.len()
            )));
        }
        if c2.len() != 2 * n_bar + 1 {
            return Err(Error::DimensionMismatch {
                expected: 2 * n_bar + 1,
                got: c2.len(),
            });
        }
        Ok(Self {
            lc,
            n_bar,
            degree,
            eigenvalue,
            coeffs,
            c2,
            lsq_residual,
            harmonic_stride,
            certified,
        })
    }

    /// Evaluate in chart coordinates (no domain check).
    pub fn eval_chart(&self, theta: f64, y: f64) -> Complex64 {
        let basis = eval_basis_1d(self.degree, y);
        self.eval_with_basis(theta, &basis, false)
    }

    /// ∂φ/∂y in chart coordinates.
    pub fn eval_chart_dy(&self, theta: f64, y: f64) -> Complex64 {
        let basis = eval_basis_deriv_1d(self.degree, y);
        self.eval_with_basis(theta, &basis, false)
    }

    /// ∂φ/∂θ in chart coordinates.
    pub fn eval_chart_dtheta(&self, theta: f64, y: f64) -> Complex64 {
        let basis = eval_basis_1d(self.degree, y);
        self.eval_with_basis(theta, &basis, true)
    }

    fn eval_with_basis(&self, theta: f64, basis: &[f64], differentiate: bool) -> Complex64 {
        let cols = self.degree + 1;
        let mut acc = Complex64::new(0.0, 0.0);
        for h in 0..(2 * self.n_bar + 1) {
            let n = h as i64 - self.n_bar as i64;
            let block = &self.coeffs[h * cols..(h + 1) * cols];
            let mut radial = Complex64::new(0.0, 0.0);
            for (k, &b) in basis.iter().enumerate() {
                radial += block[k] * b;
            }
            if radial == Complex64::new(0.0, 0.0) {
                continue;
            }
            let mut factor = Complex64::from_polar(1.0, n as f64 * theta);
            if differentiate {
                factor *= Complex64::new(0.0, n as f64);
            }
            acc += radial * factor;
        }
        acc
    }
}

/// Solve the stacked system by minimum-norm least squares; the reduced
/// solution is scattered back into the full harmonic layout (skipped
/// harmonics stay exactly zero). A residual above the threshold flags the
/// result not-certified rather than failing.
pub fn solve_lc(system: &LcSystem) -> Result<FourierBernsteinEigenfunction> {
    let a = system.to_dense();
    let b = system.rhs();
    let sol = linalg::lstsq_min_norm(a, &b, system.sv_cutoff)?;
    let phi = sol.solution;
    if phi.iter().any(|c| !(c.re.is_finite() && c.im.is_finite())) {
        return Err(Error::NonFinite {
            context: "least-squares solution",
        });
    }
    let ax = system.apply(&phi);
    let defect: f64 = ax
        .iter()
        .zip(&b)
        .map(|(y, bb)| (y - bb).norm_sqr())
        .sum::<f64>()
        .sqrt();
    let scale = linalg::norm2(&b);
    let lsq_residual = if scale > 0.0 { defect / scale } else { defect };

    let cols = system.degree + 1;
    let mut coeffs = vec![Complex64::new(0.0, 0.0); (2 * system.n_bar + 1) * cols];
    for (h, &n) in system.harmonics_in.iter().enumerate() {
        let full = (n + system.n_bar as i64) as usize;
        coeffs[full * cols..(full + 1) * cols]
            .copy_from_slice(&phi[h * cols..(h + 1) * cols]);
    }
    Ok(FourierBernsteinEigenfunction {
        lc: system.lc.clone(),
        n_bar: system.n_bar,
        degree: system.degree,
        eigenvalue: system.eigenvalue,
        coeffs,
        c2: system.c2_full.clone(),
        lsq_residual,
        harmonic_stride: system.stride,
        certified: lsq_residual <= system.residual_threshold,
    })
}

/// Evaluate at a Cartesian point. The point must map into the annulus
/// strip y ∈ [0, 1]; outside it the typed error reports the computed y.
pub fn eval_lc(ef: &FourierBernsteinEigenfunction, x: &[f64]) -> Result<Complex64> {
    if x.len() != 2 {
        return Err(Error::DimensionMismatch {
            expected: 2,
            got: x.len(),
        });
    }
    let (theta, y) = ef.lc.to_annulus(x);
    if !(-ANNULUS_EDGE_TOL..=1.0 + ANNULUS_EDGE_TOL).contains(&y) {
        return Err(Error::OutsideAnnulus { y });
    }
    Ok(ef.eval_chart(theta, y))
}

impl Eigenfunction for FourierBernsteinEigenfunction {
    fn eigenvalue(&self) -> Complex64 {
        self.eigenvalue
    }

    fn eval(&self, x: &[f64]) -> Result<Complex64> {
        eval_lc(self, x)
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        if x.len() != 2 {
            return false;
        }
        let (_, y) = self.lc.to_annulus(x);
        (-ANNULUS_EDGE_TOL..=1.0 + ANNULUS_EDGE_TOL).contains(&y)
    }
}

/// Independent accuracy check: the pointwise equation defect
/// F_y ∂φ/∂y + F_θ ∂φ/∂θ − λφ on a grid twice as dense as the assembly
/// grids in both directions (and offset in θ), with the derivatives taken
/// exactly from the series.
#[derive(Clone, Copy, Debug)]
pub struct FreshGridReport {
    /// Max |defect| over the fresh grid.
    pub max_abs_residual: f64,
    /// Max |φ| over the fresh grid.
    pub phi_scale: f64,
}

/// Evaluate the equation defect of a solved eigenfunction on a fresh grid
/// (8(2n̄+1) half-step-offset angles × 4(s′+1) Chebyshev radial nodes).
pub fn fresh_grid_residual(
    ef: &FourierBernsteinEigenfunction,
    sys: &DynamicalSystem,
    s_prime: usize,
) -> Result<FreshGridReport> {
    let m = 8 * (2 * ef.n_bar + 1);
    let thetas: Vec<f64> = (0..m)
        .map(|i| std::f64::consts::TAU * (i as f64 + 0.5) / m as f64)
        .collect();
    let ys = chebyshev_nodes(4 * (s_prime + 1));
    let mut max_abs: f64 = 0.0;
    let mut scale: f64 = 0.0;
    for &t in &thetas {
        for &y in &ys {
            let (ft, fy) = polar_dynamics(sys, ef.lc(), t, y)?;
            let phi = ef.eval_chart(t, y);
            let defect =
                fy * ef.eval_chart_dy(t, y) + ft * ef.eval_chart_dtheta(t, y) - ef.eigenvalue * phi;
            max_abs = max_abs.max(defect.norm());
            scale = scale.max(phi.norm());
        }
    }
    Ok(FreshGridReport {
        max_abs_residual: max_abs,
        phi_scale: scale,
    })
}

/// End-to-end convenience: project the field, build the boundary data at
/// the chart's Floquet exponent, assemble, and solve.
pub fn solve_lc_on_annulus(
    sys: &DynamicalSystem,
    lc: &LimitCycleParam,
    n_bar: usize,
    s: usize,
    s_prime: usize,
    harmonic_stride: usize,
    opts: &LcOptions,
) -> Result<FourierBernsteinEigenfunction> {
    let lambda = lc.floquet_exponent().ok_or_else(|| {
        Error::InvalidArgument(
            "chart has no Floquet exponent; run floquet_exponents first".into(),
        )
    })?;
    let proj = project_field(sys, lc, n_bar, s_prime)?;
    let c2 = boundary_c2(sys, lc, lambda, n_bar)?;
    let system = assemble_lc_system(lc, &proj, &c2, lambda, n_bar, s, harmonic_stride, opts)?;
    solve_lc(&system)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trig_interpolant_integration_is_spectrally_accurate() {
        // ∫₀^θ cos σ (2 + sin σ)... use u(σ) = cos σ + 0.3 cos 2σ whose
        // cumulative integral is sin θ + 0.15 sin 2θ.
        let m = 64;
        let thetas = uniform_angles(m);
        let u: Vec<Complex64> = thetas
            .iter()
            .map(|&t| Complex64::new(t.cos() + 0.3 * (2.0 * t).cos(), 0.0))
            .collect();
        let k_max = (m / 2 - 1) as i64;
        let spectrum = fourier_fit(&u, &thetas, k_max);
        let mean = spectrum[k_max as usize];
        assert!(mean.norm() < 1e-14);
        for &t in &thetas {
            let mut acc = mean * t;
            for (h, &c) in spectrum.iter().enumerate() {
                let n = h as i64 - k_max;
                if n != 0 {
                    acc += c * (Complex64::from_polar(1.0, n as f64 * t) - 1.0)
                        / Complex64::new(0.0, n as f64);
                }
            }
            let exact = t.sin() + 0.15 * (2.0 * t).sin();
            assert!((acc - Complex64::new(exact, 0.0)).norm() < 1e-13);
        }
    }

    #[test]
    fn shift_factors_route_harmonics() {
        let h_in: Vec<i64> = (-2..=2).collect();
        let h_out: Vec<i64> = (-4..=4).collect();
        let s = shift_factor(&h_out, &h_in, 2, false);
        // Harmonic 1 (input index 3) lands on harmonic 3 (output index 7).
        assert_eq!(s[[7, 3]], Complex64::new(1.0, 0.0));
        assert_eq!(s[[6, 3]], Complex64::new(0.0, 0.0));
        let d = shift_factor(&h_out, &h_in, 2, true);
        // Differentiation carries the input harmonic factor i·n = i·1.
        assert_eq!(d[[7, 3]], Complex64::new(0.0, 1.0));
    }
}
