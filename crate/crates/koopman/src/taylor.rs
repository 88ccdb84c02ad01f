//! Taylor-series eigenfunctions about a fixed point.
//!
//! An eigenfunction of the flow's composition operator satisfies
//! `F·∇φ = λφ`. Expanding `φ` about a fixed point `x*` and grading by total
//! degree decouples the problem into one small linear system per order: the
//! linear part of the field maps degree-`s` monomials to degree-`s`
//! monomials (matrix `H⁽ˢ⁾`), while the nonlinear field terms feed
//! already-computed lower orders forward into an inhomogeneity `V⁽ˢ⁾`.
//! Order 0 vanishes, order 1 is a left eigenvector `w` of the Jacobian
//! (`Jᵀw = λw`), and each order `s ≥ 2` solves
//! `(H⁽ˢ⁾ − λI)Φ⁽ˢ⁾ = −V⁽ˢ⁾`.
//!
//! The recursion breaks down exactly at eigenvalue resonances
//! `λ = Σ c_k λ_k` (the graded matrix turns singular), which surfaces as a
//! typed error carrying the offending order; close calls below a warning
//! margin are recorded on the result instead of failing.

use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::linalg::{self, ColMat};
use crate::poly::{MonomialPoly, MultiIndex};
use crate::system::{DynamicalSystem, SpectrumReport};

/// Reciprocal condition number below which a graded system counts as
/// resonant (condition number above 1e12).
const RESONANCE_RCOND: f64 = 1e-12;

/// Margin `|λ − Σc_kλ_k|` below which a near-resonance warning is recorded.
const NEAR_RESONANCE_TOL: f64 = 1e-4;

/// Largest admissible residual constant term of the field recentered at the
/// expansion point; anything bigger means the point is not a fixed point.
const FIXED_POINT_NOISE: f64 = 1e-8;

/// Coefficient magnitudes below this are treated as exact zeros when
/// estimating the analyticity radius.
const RADIUS_FLOOR: f64 = 1e-300;

/// A near-resonance observed while solving: at `order`, some eigenvalue
/// combination approaches the target eigenvalue within `margin`.
/// Coefficients at that order may be legitimately large.
#[derive(Clone, Copy, Debug)]
pub struct NearResonance {
    /// Total degree at which the close combination occurs.
    pub order: u32,
    /// Distance `|λ − Σc_kλ_k|` of the closest combination.
    pub margin: f64,
}

/// A truncated Taylor expansion of an eigenfunction about a fixed point.
#[derive(Clone, Debug)]
pub struct TaylorEigenfunction {
    /// Coefficients of `(x − x*)^k`, centered at the fixed point.
    poly: MonomialPoly,
    eigenvalue: Complex64,
    max_order: u32,
    gradient_seed: Vec<Complex64>,
    near_resonances: Vec<NearResonance>,
}

impl TaylorEigenfunction {
    /// Rebuild an eigenfunction from stored parts (the serialization
    /// format used by reports). Validates the structural invariants:
    /// vanishing constant term, order-1 coefficients equal to the seed,
    /// and no term above `max_order`.
    pub fn from_parts(
        center: Vec<f64>,
        eigenvalue: Complex64,
        max_order: u32,
        terms: &[(Vec<u32>, Complex64)],
        gradient_seed: Vec<Complex64>,
    ) -> Result<Self> {
        let dim = center.len();
        if gradient_seed.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: gradient_seed.len(),
            });
        }
        let mut poly = MonomialPoly::zero(dim, center);
        for (exps, c) in terms {
            if exps.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: exps.len(),
                });
            }
            let degree: u32 = exps.iter().sum();
            if degree > max_order {
                return Err(Error::InvalidArgument(format!(
                    "term of degree {degree} exceeds max_order {max_order}"
                )));
            }
            if degree == 0 && c.norm() != 0.0 {
                return Err(Error::InvalidArgument(
                    "eigenfunction constant term must vanish".into(),
                ));
            }
            poly.add_term(exps, *c);
        }
        for m in 0..dim {
            let mut e = vec![0u32; dim];
            e[m] = 1;
            if (poly.coeff(&e) - gradient_seed[m]).norm() > 1e-12 {
                return Err(Error::InvalidArgument(
                    "order-1 coefficients must equal the gradient seed".into(),
                ));
            }
        }
        Ok(Self {
            poly,
            eigenvalue,
            max_order,
            gradient_seed,
            near_resonances: Vec::new(),
        })
    }

    /// Expansion point (the fixed point).
    pub fn center(&self) -> &[f64] {
        self.poly.center()
    }

    /// Eigenvalue `λ`.
    pub fn eigenvalue(&self) -> Complex64 {
        self.eigenvalue
    }

    /// Truncation order of the expansion.
    pub fn max_order(&self) -> u32 {
        self.max_order
    }

    /// The left eigenvector used for the order-1 coefficients (zero for
    /// products of total power ≥ 2).
    pub fn gradient_seed(&self) -> &[Complex64] {
        &self.gradient_seed
    }

    /// The expansion as a polynomial in `(x − x*)`.
    pub fn poly(&self) -> &MonomialPoly {
        &self.poly
    }

    /// Coefficient of `(x − x*)^k` (zero when absent).
    pub fn coeff(&self, exponents: &[u32]) -> Complex64 {
        self.poly.coeff(exponents)
    }

    /// Iterate `(multi-index, coefficient)` pairs in graded order.
    pub fn coeffs(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.poly.terms()
    }

    /// Near-resonance warnings recorded during the solve.
    pub fn near_resonances(&self) -> &[NearResonance] {
        &self.near_resonances
    }

    /// The eigenfunction of the conjugate eigenvalue: for a real field the
    /// coefficient map conjugates instead of re-solving.
    pub fn conjugate(&self) -> Self {
        Self {
            poly: self.poly.conj(),
            eigenvalue: self.eigenvalue.conj(),
            max_order: self.max_order,
            gradient_seed: self.gradient_seed.iter().map(|c| c.conj()).collect(),
            near_resonances: self.near_resonances.clone(),
        }
    }
}

/// All exponent tuples of total degree `s` in `dim` variables, ascending
/// lexicographically (the graded-lex order restricted to one degree).
fn indices_of_degree(dim: usize, s: u32) -> Vec<MultiIndex> {
    fn rec(dim: usize, s: u32, prefix: &mut Vec<u32>, out: &mut Vec<MultiIndex>) {
        if prefix.len() + 1 == dim {
            prefix.push(s);
            out.push(MultiIndex(prefix.clone()));
            prefix.pop();
            return;
        }
        for k in 0..=s {
            prefix.push(k);
            rec(dim, s - k, prefix, out);
            prefix.pop();
        }
    }
    let mut out = Vec::new();
    rec(dim, s, &mut Vec::new(), &mut out);
    out
}

/// Smallest distance `|λ − ⟨k, eigenvalues⟩|` over exponent tuples `k ≥ 0`
/// with total weight exactly `s`.
fn margin_at_order(eigenvalues: &[Complex64], lambda: Complex64, s: u32) -> f64 {
    fn rec(
        axis: usize,
        remaining: u32,
        partial: Complex64,
        eigenvalues: &[Complex64],
        lambda: Complex64,
        best: &mut f64,
    ) {
        if axis + 1 == eigenvalues.len() {
            let total = partial + eigenvalues[axis] * remaining as f64;
            *best = best.min((total - lambda).norm());
            return;
        }
        for k in 0..=remaining {
            rec(
                axis + 1,
                remaining - k,
                partial + eigenvalues[axis] * k as f64,
                eigenvalues,
                lambda,
                best,
            );
        }
    }
    let mut best = f64::INFINITY;
    rec(0, s, Complex64::new(0.0, 0.0), eigenvalues, lambda, &mut best);
    best
}

/// Solve for the Taylor expansion of the eigenfunction of
/// `spec.eigenvalues[eig_index]` about `spec.fixed_point`, order by order
/// up to total degree `s_max`.
pub fn solve_taylor(
    sys: &DynamicalSystem,
    spec: &SpectrumReport,
    eig_index: usize,
    s_max: u32,
) -> Result<TaylorEigenfunction> {
    let n = sys.dim();
    if eig_index >= spec.eigenvalues.len() {
        return Err(Error::EigIndexOutOfRange {
            index: eig_index,
            count: spec.eigenvalues.len(),
        });
    }
    let lambda = spec.eigenvalues[eig_index];
    let w = spec.left_eigenvectors[eig_index].clone();

    // Field in the displacement variable y = x − x*. The constant terms are
    // Newton-solver noise (the expansion point is a fixed point to 1e−12);
    // they must be removed exactly or the degree grading breaks.
    let zero_idx = vec![0u32; n];
    let mut field = sys.recentered_components(&spec.fixed_point)?;
    for f in &mut field {
        let residual = f.coeff(&zero_idx).norm();
        if residual > FIXED_POINT_NOISE {
            return Err(Error::InvalidArgument(format!(
                "expansion point is not a fixed point: |F(x*)| component = {residual:.3e}"
            )));
        }
        f.remove_term(&zero_idx);
    }

    // Linear part J[l][m] = coefficient of y_m in the recentered f_l.
    let mut jlin = vec![vec![Complex64::new(0.0, 0.0); n]; n];
    for l in 0..n {
        for m in 0..n {
            let mut e = vec![0u32; n];
            e[m] = 1;
            jlin[l][m] = field[l].coeff(&e);
        }
    }

    // Accumulate φ in the displacement variable; order 1 is the seed.
    let mut phi = MonomialPoly::zero_origin(n);
    for m in 0..n {
        let mut e = vec![0u32; n];
        e[m] = 1;
        phi.add_term(&e, w[m]);
    }

    let one = Complex64::new(1.0, 0.0);
    let mut warnings = Vec::new();
    for s in 2..=s_max {
        let idxs = indices_of_degree(n, s);
        let ns = idxs.len();
        let pos: BTreeMap<&MultiIndex, usize> =
            idxs.iter().enumerate().map(|(i, k)| (k, i)).collect();

        // V⁽ˢ⁾: the degree-s part of the full operator applied to the
        // lower orders. The linear field part cannot reach degree s from
        // degree < s, so only genuinely nonlinear feed-forward survives.
        let mut v = MonomialPoly::zero_origin(n);
        for l in 0..n {
            let dphi = phi.partial_derivative(l)?;
            v.add_assign_scaled(&field[l].multiply(&dphi)?, one)?;
        }
        let v_s = v.homogeneous_part(s);

        // H⁽ˢ⁾ − λI: the linear part maps y^k to Σ J[l][m]·k_l·y^{k−e_l+e_m}.
        let mut a = ColMat::zeros(ns, ns);
        for (col, k) in idxs.iter().enumerate() {
            for l in 0..n {
                if k.0[l] == 0 {
                    continue;
                }
                for m in 0..n {
                    if jlin[l][m].norm() == 0.0 {
                        continue;
                    }
                    let mut kp = k.0.clone();
                    kp[l] -= 1;
                    kp[m] += 1;
                    let row = pos[&MultiIndex(kp)];
                    a.add(row, col, jlin[l][m] * k.0[l] as f64);
                }
            }
            a.add(col, col, -lambda);
        }

        let b: Vec<Complex64> = idxs.iter().map(|k| -v_s.coeff(&k.0)).collect();
        let lu = linalg::lu_solve(a, &b)?;
        if lu.rcond < RESONANCE_RCOND {
            return Err(Error::Resonance {
                order: s as usize,
                cond: if lu.rcond > 0.0 {
                    1.0 / lu.rcond
                } else {
                    f64::INFINITY
                },
            });
        }
        let margin = margin_at_order(&spec.eigenvalues, lambda, s);
        if margin < NEAR_RESONANCE_TOL {
            warnings.push(NearResonance { order: s, margin });
        }
        for (k, c) in idxs.iter().zip(&lu.solution) {
            if c.norm() > 0.0 {
                phi.add_term(&k.0, *c);
            }
        }
    }

    Ok(TaylorEigenfunction {
        poly: phi.reinterpret_center(&spec.fixed_point)?,
        eigenvalue: lambda,
        max_order: s_max,
        gradient_seed: w,
        near_resonances: warnings,
    })
}

/// Evaluate the expansion at `x`, optionally truncated to a lower total
/// degree (`None` uses all computed orders).
pub fn eval_taylor(
    ef: &TaylorEigenfunction,
    x: &[f64],
    order: Option<u32>,
) -> Result<Complex64> {
    match order {
        None => ef.poly.eval(x),
        Some(s) => {
            if s > ef.max_order {
                return Err(Error::InvalidArgument(format!(
                    "truncation order {s} exceeds computed order {}",
                    ef.max_order
                )));
            }
            ef.poly.eval_truncated(x, s)
        }
    }
}

/// Estimate the analyticity radius of the expansion by the root test on
/// the radial series: writing `φ(x* + r·u) = Σ_s P_s(u) r^s` with `u` on
/// the unit sphere, the ball of convergence has radius
/// `1 / limsup (sup_u |P_s(u)|)^{1/s}`. The limsup is computed as
/// `e^{−slope}` of a least-squares line fit to `ln sup_u |P_s(u)|`
/// against `s` over the top half of the computed orders. Returns `+∞`
/// when the tail coefficients vanish (polynomial eigenfunctions).
///
/// The sup over directions matters: raw coefficient magnitudes measure
/// the polydisc of convergence instead, which can be noticeably smaller
/// than the ball when the homogeneous parts cancel along real directions.
pub fn estimate_radius(ef: &TaylorEigenfunction) -> Result<f64> {
    if ef.max_order < 20 {
        return Err(Error::InvalidArgument(format!(
            "radius estimation needs at least 20 orders, got {}",
            ef.max_order
        )));
    }
    let smax = ef.max_order as usize;
    let dim = ef.poly.dim();
    let dirs = unit_directions(dim, ef.max_order);

    // Group terms by total degree once, then evaluate each homogeneous
    // part on the direction set.
    let mut by_order: Vec<Vec<(&MultiIndex, Complex64)>> = vec![Vec::new(); smax + 1];
    for (k, c) in ef.poly.terms() {
        by_order[k.degree() as usize].push((k, *c));
    }
    let lo = smax / 2 + 1;
    let mut pts: Vec<(f64, f64)> = Vec::new();
    for s in lo..=smax {
        let mut sup = 0.0_f64;
        for u in &dirs {
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, c) in &by_order[s] {
                let mut m = 1.0;
                for (ki, ui) in k.0.iter().zip(u) {
                    m *= ui.powi(*ki as i32);
                }
                acc += c * m;
            }
            sup = sup.max(acc.norm());
        }
        if sup > RADIUS_FLOOR {
            pts.push((s as f64, sup.ln()));
        }
    }
    if pts.len() < 2 {
        return Ok(f64::INFINITY);
    }
    let n = pts.len() as f64;
    let sx: f64 = pts.iter().map(|p| p.0).sum();
    let sy: f64 = pts.iter().map(|p| p.1).sum();
    let sxx: f64 = pts.iter().map(|p| p.0 * p.0).sum();
    let sxy: f64 = pts.iter().map(|p| p.0 * p.1).sum();
    let slope = (n * sxy - sx * sy) / (n * sxx - sx * sx);
    Ok((-slope).exp())
}

/// Unit directions used to take per-order sups: dense uniform angles on
/// the circle for planar systems, signed axes plus a deterministic
/// low-discrepancy set in higher dimensions. A degree-`s` homogeneous
/// polynomial oscillates with angular frequency up to `s`, so the circle
/// sampling scales with the truncation order.
fn unit_directions(dim: usize, max_order: u32) -> Vec<Vec<f64>> {
    match dim {
        1 => vec![vec![1.0], vec![-1.0]],
        2 => {
            let m = (4 * max_order as usize + 17).max(64);
            (0..m)
                .map(|i| {
                    let t = std::f64::consts::PI * i as f64 / m as f64;
                    vec![t.cos(), t.sin()]
                })
                .collect()
        }
        _ => {
            let mut dirs = Vec::new();
            for axis in 0..dim {
                let mut u = vec![0.0; dim];
                u[axis] = 1.0;
                dirs.push(u.clone());
                u[axis] = -1.0;
                dirs.push(u);
            }
            // Deterministic quasi-random directions via a simple LCG.
            let mut state = 0x2545_f491_4f6c_dd1d_u64;
            let count = 64 * max_order as usize;
            for _ in 0..count {
                let mut u = vec![0.0; dim];
                let mut norm = 0.0;
                for ui in u.iter_mut() {
                    state = state
                        .wrapping_mul(6364136223846793005)
                        .wrapping_add(1442695040888963407);
                    // Map to (−1, 1); a cube sample is fine for a sup scan.
                    *ui = (state >> 11) as f64 / (1u64 << 52) as f64 * 2.0 - 1.0;
                    norm += *ui * *ui;
                }
                let norm = norm.sqrt();
                if norm > 1e-3 {
                    for ui in u.iter_mut() {
                        *ui /= norm;
                    }
                    dirs.push(u);
                }
            }
            dirs
        }
    }
}

/// Truncated product `Π φᵢ^{pᵢ}`: an eigenfunction of `Σ pᵢλᵢ`. All factors
/// must share center and truncation order; the result keeps that order.
/// The gradient seed is zero when the total power exceeds 1 (the product
/// vanishes to second order at the fixed point).
pub fn product_eigenfunction(
    efs: &[&TaylorEigenfunction],
    powers: &[u32],
) -> Result<TaylorEigenfunction> {
    if efs.is_empty() || efs.len() != powers.len() {
        return Err(Error::InvalidArgument(
            "need matching, nonempty eigenfunction and power lists".into(),
        ));
    }
    let total: u32 = powers.iter().sum();
    if total == 0 {
        return Err(Error::InvalidArgument(
            "total power must be at least 1".into(),
        ));
    }
    let center = efs[0].center();
    let max_order = efs[0].max_order;
    let dim = center.len();
    for ef in efs {
        if ef.center() != center {
            return Err(Error::CenterMismatch);
        }
        if ef.max_order != max_order {
            return Err(Error::InvalidArgument(
                "eigenfunction truncation orders differ".into(),
            ));
        }
    }

    let mut acc = MonomialPoly::zero(dim, center.to_vec());
    acc.add_term(&vec![0u32; dim], Complex64::new(1.0, 0.0));
    let mut eigenvalue = Complex64::new(0.0, 0.0);
    for (ef, &p) in efs.iter().zip(powers) {
        eigenvalue += ef.eigenvalue * p as f64;
        for _ in 0..p {
            acc = acc.multiply(&ef.poly)?.truncate_degree(max_order);
        }
    }
    let gradient_seed = if total == 1 {
        let single = efs
            .iter()
            .zip(powers)
            .find(|(_, &p)| p == 1)
            .expect("total power 1 has a unit factor");
        single.0.gradient_seed.clone()
    } else {
        vec![Complex64::new(0.0, 0.0); dim]
    };
    Ok(TaylorEigenfunction {
        poly: acc,
        eigenvalue,
        max_order,
        gradient_seed,
        near_resonances: Vec::new(),
    })
}

/// Pointwise defect `F(x)·∇φ(x) − λφ(x)` of the expansion.
pub fn pde_residual(
    sys: &DynamicalSystem,
    ef: &TaylorEigenfunction,
    x: &[f64],
) -> Result<Complex64> {
    let f = sys.eval(x);
    let mut acc = -ef.eigenvalue * ef.poly.eval(x)?;
    for l in 0..sys.dim() {
        acc += Complex64::new(f[l], 0.0) * ef.poly.partial_derivative(l)?.eval(x)?;
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn indices_enumerate_in_lex_order() {
        let idx = indices_of_degree(2, 3);
        let flat: Vec<Vec<u32>> = idx.into_iter().map(|k| k.0).collect();
        assert_eq!(flat, vec![vec![0, 3], vec![1, 2], vec![2, 1], vec![3, 0]]);
        assert_eq!(indices_of_degree(3, 2).len(), 6);
    }

    #[test]
    fn order_margin_finds_nearest_combination() {
        let lams = [Complex64::new(-1.0, 0.0), Complex64::new(-2.05, 0.0)];
        // At order 2 the closest combination to −2.05 is (−1)+(−1) = −2.
        let m = margin_at_order(&lams, lams[1], 2);
        assert!((m - 0.05).abs() < 1e-12);
    }
}
