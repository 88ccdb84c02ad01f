//! Least-squares Bernstein eigenfunctions about a fixed point on a box.
//!
//! On a box mapped affinely to the unit cube, the eigenfunction equation
//! F·∇φ = λφ for a degree-s tensor Bernstein ansatz is exactly expressible
//! in the degree-(s+s′) basis: multiplication by the field components and
//! differentiation are structured (Kronecker) operators between coefficient
//! spaces, so the equation becomes one coefficient-wise linear block. That
//! block is stacked with normalization rows pinning φ(u*) = 0 and
//! ∇φ(u*) = w at the fixed point, and the result is solved in the
//! minimum-norm least-squares sense. The relative residual acts as the
//! certificate: it is small exactly when the box supports an accurate
//! continuous eigenfunction (global stability on the box), and remains
//! large when it does not — e.g. when the box crosses the basin boundary.

use num_complex::Complex64;

use crate::bernstein::{
    diff_matrix_1d, eval_basis_1d, eval_basis_deriv_1d, eval_tensor_basis, monomial_to_bernstein,
    tensor_mult_matrix, tensor_raise_matrix, to_complex, KronSum, TensorBernstein,
};
use crate::error::{Error, Result};
use crate::linalg::{self, ColMat};
use crate::stability::Eigenfunction;
use crate::system::{
    find_fixed_point, jacobian_spectrum, pull_back_field, BoxMap, DynamicalSystem, SpectrumReport,
};

/// Relative residual at or below which a solution is certified accurate.
pub const FP_RESIDUAL_THRESHOLD: f64 = 1e-3;

/// Singular values below this fraction of the largest are treated as zero
/// in the minimum-norm least-squares solve.
pub const FP_SV_CUTOFF: f64 = 1e-12;

/// Slack when testing whether a mapped point lies inside the unit cube.
const BOX_EDGE_TOL: f64 = 1e-9;

/// Solver configuration.
#[derive(Clone, Debug)]
pub struct FpOptions {
    /// Weight applied to the normalization rows so they are not swamped by
    /// the PDE block in least squares; `None` uses √(number of PDE rows).
    pub constraint_weight: Option<f64>,
    /// Residual threshold for the certified flag.
    pub residual_threshold: f64,
    /// Relative singular-value cutoff for the pseudoinverse.
    pub sv_cutoff: f64,
}

impl Default for FpOptions {
    fn default() -> Self {
        Self {
            constraint_weight: None,
            residual_threshold: FP_RESIDUAL_THRESHOLD,
            sv_cutoff: FP_SV_CUTOFF,
        }
    }
}

/// The stacked least-squares system for one eigenvalue on one box.
pub struct FpSystem {
    chart: BoxMap,
    /// PDE block Σ_l M̄^l·D̄^{s,l} − λ·T̄^{s,s′} as a sum of Kronecker
    /// terms, (s+s′+1)^N rows by (s+1)^N columns.
    pde: KronSum,
    /// Unweighted normalization rows: basis at u*, then one gradient row
    /// per axis.
    constraint_rows: Vec<Vec<Complex64>>,
    /// Unweighted normalization right-hand side: 0, then the components of
    /// the left eigenvector w.
    constraint_rhs: Vec<Complex64>,
    weight: f64,
    degree: usize,
    field_degree: usize,
    eigenvalue: Complex64,
    u_star: Vec<f64>,
    seed: Vec<Complex64>,
    residual_threshold: f64,
    sv_cutoff: f64,
}

impl FpSystem {
    /// Rows in the PDE block: (s+s′+1)^N.
    pub fn pde_rows(&self) -> usize {
        self.pde.nrows()
    }

    /// Normalization rows stacked below the PDE block: 1 + N.
    pub fn constraint_count(&self) -> usize {
        self.constraint_rows.len()
    }

    /// Total rows of the stacked system.
    pub fn rows(&self) -> usize {
        self.pde_rows() + self.constraint_count()
    }

    /// Unknown coefficients: (s+1)^N.
    pub fn unknowns(&self) -> usize {
        self.pde.ncols()
    }

    /// The Bernstein degree s of the ansatz.
    pub fn degree(&self) -> usize {
        self.degree
    }

    /// The Bernstein degree s′ used for the field components.
    pub fn field_degree(&self) -> usize {
        self.field_degree
    }

    /// The eigenvalue the system targets.
    pub fn eigenvalue(&self) -> Complex64 {
        self.eigenvalue
    }

    /// The weight multiplying the normalization rows.
    pub fn weight(&self) -> f64 {
        self.weight
    }

    /// Apply the weighted stacked matrix to a coefficient vector.
    pub fn apply(&self, phi: &[Complex64]) -> Vec<Complex64> {
        let mut out = self.pde.apply(phi);
        out.reserve(self.constraint_count());
        for row in &self.constraint_rows {
            let dot: Complex64 = row.iter().zip(phi).map(|(r, p)| r * p).sum();
            out.push(dot * self.weight);
        }
        out
    }

    /// The weighted right-hand side of the stacked system.
    pub fn rhs(&self) -> Vec<Complex64> {
        let mut b = vec![Complex64::new(0.0, 0.0); self.rows()];
        for (r, v) in self.constraint_rhs.iter().enumerate() {
            b[self.pde_rows() + r] = v * self.weight;
        }
        b
    }

    /// Materialize the weighted stacked matrix column-major for LAPACK.
    pub fn to_dense(&self) -> ColMat {
        let mut a = ColMat::zeros(self.rows(), self.unknowns());
        self.pde.add_into(&mut a, 0, Complex64::new(1.0, 0.0));
        for (r, row) in self.constraint_rows.iter().enumerate() {
            let i = self.pde_rows() + r;
            for (j, v) in row.iter().enumerate() {
                if *v != Complex64::new(0.0, 0.0) {
                    a.add(i, j, v * self.weight);
                }
            }
        }
        a
    }
}

/// Kronecker-major outer product of per-axis row vectors.
fn tensor_row(per_axis: &[Vec<f64>]) -> Vec<Complex64> {
    let mut out = vec![Complex64::new(1.0, 0.0)];
    for vals in per_axis {
        let mut next = Vec::with_capacity(out.len() * vals.len());
        for o in &out {
            for &v in vals {
                next.push(o * v);
            }
        }
        out = next;
    }
    out
}

/// Assemble the stacked system for one eigenvalue of a system already in
/// box coordinates (on `[0,1]^N`, with its fixed point `u*` and spectrum in
/// those coordinates). The field components are converted to the tensor
/// Bernstein basis of degree s′ = max total degree over components; the PDE
/// block then lives in the degree-(s+s′) basis and the normalization rows
/// pin the value (0) and gradient (wᵢ) at u*.
pub fn assemble_fp_system(
    sys_box: &DynamicalSystem,
    chart: &BoxMap,
    spec: &SpectrumReport,
    eig_index: usize,
    s: usize,
    opts: &FpOptions,
) -> Result<FpSystem> {
    if eig_index >= spec.eigenvalues.len() {
        return Err(Error::EigIndexOutOfRange {
            index: eig_index,
            count: spec.eigenvalues.len(),
        });
    }
    if s < 1 {
        return Err(Error::InvalidArgument(
            "Bernstein degree must be at least 1".into(),
        ));
    }
    let dim = sys_box.dim();
    if chart.dim() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: chart.dim(),
        });
    }
    let u_star = spec.fixed_point.clone();
    if u_star.len() != dim {
        return Err(Error::DimensionMismatch {
            expected: dim,
            got: u_star.len(),
        });
    }
    if u_star
        .iter()
        .any(|&u| !(-BOX_EDGE_TOL..=1.0 + BOX_EDGE_TOL).contains(&u))
    {
        return Err(Error::InvalidArgument(format!(
            "fixed point {u_star:?} lies outside the unit cube; \
             pass the spectrum in box coordinates"
        )));
    }
    let comps = sys_box.polynomial_components()?;
    if comps.iter().any(|f| f.center().iter().any(|&c| c != 0.0)) {
        return Err(Error::InvalidArgument(
            "box-coordinate field must be origin-centered".into(),
        ));
    }
    let lambda = spec.eigenvalues[eig_index];
    let seed = spec.left_eigenvectors[eig_index].clone();

    // Field degree: the max total degree bounds every per-axis degree, so
    // all components embed exactly in the degree-s′ tensor basis.
    let s_prime = comps
        .iter()
        .map(|f| f.total_degree() as usize)
        .max()
        .unwrap_or(0);

    // PDE block: −λ·T̄^{s,s′} + Σ_l M̄^l·D̄^{s,l}.
    let mut pde = KronSum::new(vec![(-lambda, tensor_raise_matrix(s, s_prime, dim)?)]);
    let d_mat = to_complex(&diff_matrix_1d(s));
    for (l, f) in comps.iter().enumerate() {
        let q = monomial_to_bernstein(f, s_prime)?;
        let mult = tensor_mult_matrix(&q, s)?;
        for (c, mut t) in mult.terms {
            t.factors[l] = t.factors[l].dot(&d_mat);
            pde.push(c, t);
        }
    }

    // Normalization rows at the fixed point.
    let basis_vals: Vec<Vec<f64>> = u_star.iter().map(|&u| eval_basis_1d(s, u)).collect();
    let basis_derivs: Vec<Vec<f64>> = u_star.iter().map(|&u| eval_basis_deriv_1d(s, u)).collect();
    let mut constraint_rows =
        vec![eval_tensor_basis(s, &u_star).iter().map(|&v| Complex64::new(v, 0.0)).collect::<Vec<_>>()];
    for axis in 0..dim {
        let per_axis: Vec<Vec<f64>> = (0..dim)
            .map(|a| {
                if a == axis {
                    basis_derivs[a].clone()
                } else {
                    basis_vals[a].clone()
                }
            })
            .collect();
        constraint_rows.push(tensor_row(&per_axis));
    }
    let mut constraint_rhs = vec![Complex64::new(0.0, 0.0)];
    constraint_rhs.extend(seed.iter().copied());

    let weight = opts
        .constraint_weight
        .unwrap_or_else(|| (pde.nrows() as f64).sqrt());
    if !(weight.is_finite() && weight > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "constraint weight must be positive, got {weight}"
        )));
    }

    Ok(FpSystem {
        chart: chart.clone(),
        pde,
        constraint_rows,
        constraint_rhs,
        weight,
        degree: s,
        field_degree: s_prime,
        eigenvalue: lambda,
        u_star,
        seed,
        residual_threshold: opts.residual_threshold,
        sv_cutoff: opts.sv_cutoff,
    })
}

/// A least-squares Bernstein eigenfunction on a box.
#[derive(Clone, Debug)]
pub struct BernsteinEigenfunction {
    chart: BoxMap,
    eigenvalue: Complex64,
    coeffs: TensorBernstein,
    lsq_residual: f64,
    fixed_point_box: Vec<f64>,
    certified: bool,
    seed: Vec<Complex64>,
}

impl BernsteinEigenfunction {
    /// Rebuild from stored parts (e.g. a report file). The coefficient
    /// count must match (degree+1)^N.
    #[allow(clippy::too_many_arguments)]
    pub fn from_parts(
        chart: BoxMap,
        degree: usize,
        eigenvalue: Complex64,
        coeffs: Vec<Complex64>,
        lsq_residual: f64,
        fixed_point_box: Vec<f64>,
        certified: bool,
        seed: Vec<Complex64>,
    ) -> Result<Self> {
        let dim = chart.dim();
        let expect = (degree + 1).pow(dim as u32);
        if coeffs.len() != expect {
            return Err(Error::InvalidArgument(format!(
                "expected {expect} coefficients for degree {degree} in {dim}D, got {}",
                coeffs.len()
            )));
        }
        if fixed_point_box.len() != dim || seed.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: fixed_point_box.len().min(seed.len()),
            });
        }
        Ok(Self {
            chart,
            eigenvalue,
            coeffs: TensorBernstein {
                dim,
                degree,
                coeffs,
            },
            lsq_residual,
            fixed_point_box,
            certified,
            seed,
        })
    }

    /// The box chart.
    pub fn chart(&self) -> &BoxMap {
        &self.chart
    }

    /// The Bernstein degree s per axis.
    pub fn degree(&self) -> usize {
        self.coeffs.degree
    }

    /// The eigenvalue λ.
    pub fn eigenvalue(&self) -> Complex64 {
        self.eigenvalue
    }

    /// The coefficient vector Φ in the tensor Bernstein basis.
    pub fn coeffs(&self) -> &TensorBernstein {
        &self.coeffs
    }

    /// Relative residual ‖AΦ − b‖/‖b‖ of the stacked system.
    pub fn lsq_residual(&self) -> f64 {
        self.lsq_residual
    }

    /// The fixed point in box coordinates u* ∈ [0,1]^N.
    pub fn fixed_point_box(&self) -> &[f64] {
        &self.fixed_point_box
    }

    /// Whether the residual met the certification threshold.
    pub fn certified(&self) -> bool {
        self.certified
    }

    /// The gradient value w imposed at the fixed point (box coordinates).
    pub fn seed(&self) -> &[Complex64] {
        &self.seed
    }

    /// Evaluate in box coordinates u (extends smoothly outside the cube).
    pub fn eval_unit(&self, u: &[f64]) -> Complex64 {
        self.coeffs.eval(u)
    }

    /// The conjugate eigenfunction: conjugate eigenvalue and coefficients.
    /// For a real field the stacked system conjugates termwise, so this is
    /// the solution for the conjugate eigenvalue.
    pub fn conjugate(&self) -> Self {
        Self {
            chart: self.chart.clone(),
            eigenvalue: self.eigenvalue.conj(),
            coeffs: TensorBernstein {
                dim: self.coeffs.dim,
                degree: self.coeffs.degree,
                coeffs: self.coeffs.coeffs.iter().map(|c| c.conj()).collect(),
            },
            lsq_residual: self.lsq_residual,
            fixed_point_box: self.fixed_point_box.clone(),
            certified: self.certified,
            seed: self.seed.iter().map(|c| c.conj()).collect(),
        }
    }
}

/// Evaluation result in original coordinates: the value plus a flag for
/// whether the point was inside the box (outside is extrapolation).
#[derive(Clone, Copy, Debug)]
pub struct BoxEval {
    /// φ(x).
    pub value: Complex64,
    /// True when x lies inside the box (up to a 1e−9 edge tolerance).
    pub inside: bool,
}

/// Evaluate at a state-space point: maps through the chart and contracts
/// with the tensor basis. Points outside the box still evaluate (the
/// polynomial extends) but are flagged as extrapolation.
pub fn eval_bernstein(ef: &BernsteinEigenfunction, x: &[f64]) -> BoxEval {
    let u = ef.chart.to_unit(x);
    let inside = u
        .iter()
        .all(|&ui| (-BOX_EDGE_TOL..=1.0 + BOX_EDGE_TOL).contains(&ui));
    BoxEval {
        value: ef.coeffs.eval(&u),
        inside,
    }
}

impl Eigenfunction for BernsteinEigenfunction {
    fn eigenvalue(&self) -> Complex64 {
        self.eigenvalue
    }

    fn eval(&self, x: &[f64]) -> Result<Complex64> {
        Ok(eval_bernstein(self, x).value)
    }

    fn in_domain(&self, x: &[f64]) -> bool {
        x.len() == self.chart.dim() && eval_bernstein(self, x).inside
    }
}

/// Solve the stacked system by minimum-norm least squares (pseudoinverse
/// with singular values below `sv_cutoff`·σ_max zeroed). The relative
/// residual is recomputed through the structured operator afterwards; a
/// residual above the acceptance threshold returns the eigenfunction
/// flagged not-certified rather than an error.
pub fn solve_fp(system: &FpSystem) -> Result<BernsteinEigenfunction> {
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
    Ok(BernsteinEigenfunction {
        chart: system.chart.clone(),
        eigenvalue: system.eigenvalue,
        coeffs: TensorBernstein {
            dim: system.chart.dim(),
            degree: system.degree,
            coeffs: phi,
        },
        lsq_residual,
        fixed_point_box: system.u_star.clone(),
        certified: lsq_residual <= system.residual_threshold,
        seed: system.seed.clone(),
    })
}

/// End-to-end convenience: pull the field back to the unit cube, polish
/// the fixed point in box coordinates, take the spectrum there, assemble,
/// and solve for the requested eigenvalue.
pub fn solve_fp_on_box(
    sys: &DynamicalSystem,
    chart: &BoxMap,
    x_star: &[f64],
    eig_index: usize,
    s: usize,
    opts: &FpOptions,
) -> Result<BernsteinEigenfunction> {
    let sys_box = pull_back_field(sys, chart)?;
    let u_guess = chart.to_unit(x_star);
    let u_star = find_fixed_point(&sys_box, &u_guess)?;
    let spec = jacobian_spectrum(&sys_box, &u_star)?;
    let system = assemble_fp_system(&sys_box, chart, &spec, eig_index, s, opts)?;
    solve_fp(&system)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn tensor_rows_differentiate_the_basis() {
        // Compare the gradient row against a finite difference of a known
        // tensor Bernstein vector at an interior point.
        let s = 5usize;
        let u = [0.37, 0.61];
        let coeffs: Vec<Complex64> = (0..(s + 1) * (s + 1))
            .map(|i| Complex64::new((i as f64 * 0.7).sin(), (i as f64 * 0.3).cos()))
            .collect();
        let tb = TensorBernstein {
            dim: 2,
            degree: s,
            coeffs: coeffs.clone(),
        };
        for axis in 0..2 {
            let per_axis: Vec<Vec<f64>> = (0..2)
                .map(|a| {
                    if a == axis {
                        eval_basis_deriv_1d(s, u[a])
                    } else {
                        eval_basis_1d(s, u[a])
                    }
                })
                .collect();
            let row = tensor_row(&per_axis);
            let analytic: Complex64 = row.iter().zip(&coeffs).map(|(r, c)| r * c).sum();
            let h = 1e-6;
            let mut up = u.to_vec();
            let mut dn = u.to_vec();
            up[axis] += h;
            dn[axis] -= h;
            let fd = (tb.eval(&up) - tb.eval(&dn)) / (2.0 * h);
            assert!(
                (analytic - fd).norm() < 1e-7,
                "axis {axis}: analytic {analytic}, fd {fd}"
            );
        }
    }
}
