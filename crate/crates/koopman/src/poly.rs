//! Sparse multivariate polynomials in the monomial basis.
//!
//! A [`MonomialPoly`] stores complex coefficients for monomials
//! `Π (x_i − c_i)^{k_i}` about a center `c`, keyed by exponent tuple in
//! graded-lexicographic order. Evaluation, differentiation, products, and
//! affine recentering (exact Taylor re-expansion about a new point) are all
//! exact up to floating-point rounding of the coefficient arithmetic.

use std::cmp::Ordering;
use std::collections::BTreeMap;

use num_complex::Complex64;

use crate::comb::binomial;
use crate::error::{Error, Result};

/// Coefficients with magnitude below this are dropped: they are exact zeros
/// up to rounding of genuinely zero results. Numerical truncation decisions
/// belong to the solvers, not to the polynomial type.
const PRUNE_EPS: f64 = 1e-300;

/// Exponent tuple (k₁, …, k_N) of one monomial.
///
/// Ordered graded-lexicographically: lower total degree first, ties broken
/// lexicographically on the exponents. This fixes the ordering of monomial
/// coefficient vectors everywhere in the crate.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct MultiIndex(pub Vec<u32>);

impl MultiIndex {
    /// Total degree Σ kᵢ.
    pub fn degree(&self) -> u32 {
        self.0.iter().sum()
    }

    /// Number of variables.
    pub fn len(&self) -> usize {
        self.0.len()
    }

    /// True if all exponents are zero.
    pub fn is_empty(&self) -> bool {
        self.0.iter().all(|&k| k == 0)
    }
}

impl Ord for MultiIndex {
    fn cmp(&self, other: &Self) -> Ordering {
        self.degree()
            .cmp(&other.degree())
            .then_with(|| self.0.cmp(&other.0))
    }
}

impl PartialOrd for MultiIndex {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// Sparse complex polynomial about a center point.
#[derive(Clone, Debug, PartialEq)]
pub struct MonomialPoly {
    dim: usize,
    center: Vec<f64>,
    terms: BTreeMap<MultiIndex, Complex64>,
}

impl MonomialPoly {
    /// The zero polynomial in `dim` variables centered at `center`.
    pub fn zero(dim: usize, center: Vec<f64>) -> Self {
        assert_eq!(center.len(), dim, "center length must equal dimension");
        Self {
            dim,
            center,
            terms: BTreeMap::new(),
        }
    }

    /// The zero polynomial centered at the origin.
    pub fn zero_origin(dim: usize) -> Self {
        Self::zero(dim, vec![0.0; dim])
    }

    /// A constant polynomial centered at the origin.
    pub fn constant(dim: usize, value: Complex64) -> Self {
        let mut p = Self::zero_origin(dim);
        p.add_term(&vec![0; dim], value);
        p
    }

    /// A single monomial `coeff · Π xᵢ^{kᵢ}` centered at the origin.
    pub fn monomial(dim: usize, exponents: &[u32], coeff: Complex64) -> Result<Self> {
        if exponents.len() != dim {
            return Err(Error::DimensionMismatch {
                expected: dim,
                got: exponents.len(),
            });
        }
        let mut p = Self::zero_origin(dim);
        p.add_term(exponents, coeff);
        Ok(p)
    }

    /// A real-coefficient polynomial from `(exponents, coefficient)` pairs,
    /// centered at the origin. Convenient for writing vector fields.
    pub fn from_real_terms(dim: usize, terms: &[(&[u32], f64)]) -> Result<Self> {
        let mut p = Self::zero_origin(dim);
        for (exps, c) in terms {
            if exps.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    got: exps.len(),
                });
            }
            p.add_term(exps, Complex64::new(*c, 0.0));
        }
        Ok(p)
    }

    /// Number of variables.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Expansion center.
    pub fn center(&self) -> &[f64] {
        &self.center
    }

    /// Iterate over (exponents, coefficient) pairs in graded-lex order.
    pub fn terms(&self) -> impl Iterator<Item = (&MultiIndex, &Complex64)> {
        self.terms.iter()
    }

    /// Number of stored terms.
    pub fn term_count(&self) -> usize {
        self.terms.len()
    }

    /// Coefficient of a given exponent tuple (zero if absent).
    pub fn coeff(&self, exponents: &[u32]) -> Complex64 {
        self.terms
            .get(&MultiIndex(exponents.to_vec()))
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Add `coeff` to the term with the given exponents.
    pub fn add_term(&mut self, exponents: &[u32], coeff: Complex64) {
        assert_eq!(exponents.len(), self.dim);
        let key = MultiIndex(exponents.to_vec());
        let entry = self.terms.entry(key.clone()).or_insert(Complex64::new(0.0, 0.0));
        *entry += coeff;
        if entry.norm() < PRUNE_EPS {
            self.terms.remove(&key);
        }
    }

    /// True if no terms are stored.
    pub fn is_zero(&self) -> bool {
        self.terms.is_empty()
    }

    /// Total degree (0 for the zero polynomial).
    pub fn total_degree(&self) -> u32 {
        self.terms.keys().map(MultiIndex::degree).max().unwrap_or(0)
    }

    /// Largest exponent appearing on one axis.
    pub fn axis_degree(&self, axis: usize) -> u32 {
        self.terms.keys().map(|k| k.0[axis]).max().unwrap_or(0)
    }

    /// Evaluate at a point.
    pub fn eval(&self, x: &[f64]) -> Result<Complex64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in &self.terms {
            let mut m = 1.0_f64;
            for (i, &e) in k.0.iter().enumerate() {
                if e > 0 {
                    m *= (x[i] - self.center[i]).powi(e as i32);
                }
            }
            acc += c * m;
        }
        Ok(acc)
    }

    /// Evaluate the real part fast (for real-coefficient vector fields on the
    /// integrator's hot path). Panics on dimension mismatch.
    pub fn eval_real(&self, x: &[f64]) -> f64 {
        assert_eq!(x.len(), self.dim);
        let mut acc = 0.0_f64;
        for (k, c) in &self.terms {
            let mut m = 1.0_f64;
            for (i, &e) in k.0.iter().enumerate() {
                if e > 0 {
                    m *= (x[i] - self.center[i]).powi(e as i32);
                }
            }
            acc += c.re * m;
        }
        acc
    }

    /// Evaluate the partial sum of terms with total degree ≤ `max_degree`.
    pub fn eval_truncated(&self, x: &[f64], max_degree: u32) -> Result<Complex64> {
        if x.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: x.len(),
            });
        }
        let mut acc = Complex64::new(0.0, 0.0);
        for (k, c) in &self.terms {
            if k.degree() > max_degree {
                // Graded order: everything after this is higher degree too,
                // but BTreeMap iteration is cheap enough to just filter.
                continue;
            }
            let mut m = 1.0_f64;
            for (i, &e) in k.0.iter().enumerate() {
                if e > 0 {
                    m *= (x[i] - self.center[i]).powi(e as i32);
                }
            }
            acc += c * m;
        }
        Ok(acc)
    }

    /// Sum of two polynomials (same dimension and center).
    pub fn add(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        let mut out = self.clone();
        for (k, c) in &other.terms {
            out.add_term(&k.0, *c);
        }
        Ok(out)
    }

    /// `self += factor · other` (same dimension and center).
    pub fn add_assign_scaled(&mut self, other: &Self, factor: Complex64) -> Result<()> {
        self.compatible(other)?;
        for (k, c) in &other.terms {
            self.add_term(&k.0, c * factor);
        }
        Ok(())
    }

    /// Scalar multiple.
    pub fn scale(&self, factor: Complex64) -> Self {
        let mut out = Self::zero(self.dim, self.center.clone());
        for (k, c) in &self.terms {
            out.add_term(&k.0, c * factor);
        }
        out
    }

    /// Complex conjugate of all coefficients.
    pub fn conj(&self) -> Self {
        let mut out = Self::zero(self.dim, self.center.clone());
        for (k, c) in &self.terms {
            out.add_term(&k.0, c.conj());
        }
        out
    }

    /// Exact product (same dimension and center; recenter first otherwise).
    pub fn multiply(&self, other: &Self) -> Result<Self> {
        self.compatible(other)?;
        let mut out = Self::zero(self.dim, self.center.clone());
        for (ka, ca) in &self.terms {
            for (kb, cb) in &other.terms {
                let exps: Vec<u32> = ka.0.iter().zip(&kb.0).map(|(a, b)| a + b).collect();
                out.add_term(&exps, ca * cb);
            }
        }
        Ok(out)
    }

    /// Exact formal partial derivative along `axis` (0-based).
    pub fn partial_derivative(&self, axis: usize) -> Result<Self> {
        if axis >= self.dim {
            return Err(Error::AxisOutOfRange {
                axis,
                dim: self.dim,
            });
        }
        let mut out = Self::zero(self.dim, self.center.clone());
        for (k, c) in &self.terms {
            let e = k.0[axis];
            if e == 0 {
                continue;
            }
            let mut exps = k.0.clone();
            exps[axis] = e - 1;
            out.add_term(&exps, c * f64::from(e));
        }
        Ok(out)
    }

    /// Re-expand about a new center. The result is pointwise equal to `self`
    /// everywhere (exact binomial re-expansion; total degree preserved).
    pub fn recenter(&self, new_center: &[f64]) -> Result<Self> {
        if new_center.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: new_center.len(),
            });
        }
        // (x − old)^k = ((x − new) + (new − old))^k, expanded per axis.
        let shift: Vec<f64> = new_center
            .iter()
            .zip(&self.center)
            .map(|(n, o)| n - o)
            .collect();
        let scale = vec![1.0; self.dim];
        let mut out = self.expand_affine(&shift, &scale);
        out.center = new_center.to_vec();
        Ok(out)
    }

    /// Substitute `xᵢ = offsetᵢ + scaleᵢ · uᵢ` and return the polynomial in
    /// `u`, centered at the origin. Requires `self` centered at the origin.
    pub fn affine_substitute(&self, offset: &[f64], scale: &[f64]) -> Result<Self> {
        if offset.len() != self.dim || scale.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: offset.len().min(scale.len()),
            });
        }
        assert!(
            self.center.iter().all(|&c| c == 0.0),
            "affine_substitute expects an origin-centered polynomial"
        );
        Ok(self.expand_affine(offset, scale))
    }

    /// Expand each monomial `Π (tᵢ·scaleᵢ + shiftᵢ)^{kᵢ}` into a polynomial in
    /// `t` centered at the origin (center metadata left to the caller).
    fn expand_affine(&self, shift: &[f64], scale: &[f64]) -> Self {
        let mut out = Self::zero(self.dim, vec![0.0; self.dim]);
        for (k, c) in &self.terms {
            // Axis-by-axis binomial expansion of the term.
            let mut partial: Vec<(Vec<u32>, Complex64)> = vec![(vec![], *c)];
            for (i, &e) in k.0.iter().enumerate() {
                let mut next = Vec::with_capacity(partial.len() * (e as usize + 1));
                for (exps, coeff) in &partial {
                    for j in 0..=e {
                        let w = binomial(e as usize, j as usize)
                            * scale[i].powi(j as i32)
                            * shift[i].powi((e - j) as i32);
                        if w == 0.0 {
                            continue;
                        }
                        let mut exps2 = exps.clone();
                        exps2.push(j);
                        next.push((exps2, coeff * w));
                    }
                }
                partial = next;
            }
            for (exps, coeff) in partial {
                out.add_term(&exps, coeff);
            }
        }
        out
    }

    /// Keep the coefficients but relabel the expansion center: the result
    /// reads the same terms as a polynomial in the displacement variable.
    /// (`recenter` changes coordinates; this changes interpretation.)
    pub fn reinterpret_center(&self, new_center: &[f64]) -> Result<Self> {
        if new_center.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: new_center.len(),
            });
        }
        let mut out = self.clone();
        out.center = new_center.to_vec();
        Ok(out)
    }

    /// The homogeneous part of total degree `s`.
    pub fn homogeneous_part(&self, s: u32) -> Self {
        let mut out = Self::zero(self.dim, self.center.clone());
        for (k, c) in &self.terms {
            if k.degree() == s {
                out.add_term(&k.0, *c);
            }
        }
        out
    }

    /// All terms with total degree ≤ `s`.
    pub fn truncate_degree(&self, s: u32) -> Self {
        let mut out = Self::zero(self.dim, self.center.clone());
        for (k, c) in &self.terms {
            if k.degree() <= s {
                out.add_term(&k.0, *c);
            }
        }
        out
    }

    /// Remove a term exactly (used to drop fixed-point constant residue).
    pub fn remove_term(&mut self, exponents: &[u32]) {
        self.terms.remove(&MultiIndex(exponents.to_vec()));
    }

    fn compatible(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: other.dim,
            });
        }
        if self
            .center
            .iter()
            .zip(&other.center)
            .any(|(a, b)| a != b)
        {
            return Err(Error::CenterMismatch);
        }
        Ok(())
    }
}
