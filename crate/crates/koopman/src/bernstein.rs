//! Bernstein-basis operators on [0,1] and their tensor products.
//!
//! The degree-s Bernstein basis on [0,1] is `b_{j+1}^s(x) = C(s,j) x^j (1−x)^{s−j}`
//! for `j = 0..s`; it forms a partition of unity. This module builds the exact
//! matrix representations of differentiation, multiplication, and degree
//! raising in that basis, their N-dimensional tensor (Kronecker) versions on
//! `[0,1]^N`, and the exact monomial→Bernstein conversion.
//!
//! Tensor operators are kept in factored Kronecker form ([`KronMat`] /
//! [`KronSum`]) and only materialized when a solver assembles its full
//! collocation system; coefficient vectors use Kronecker-major ordering
//! `b^s(x₁) ⊗ … ⊗ b^s(x_N)` (axis 0 slowest).

use ndarray::Array2;
use num_complex::Complex64;

use crate::comb::binomial;
use crate::error::{Error, Result};
use crate::linalg::ColMat;
use crate::poly::MonomialPoly;

/// Degrees are capped so the f64 binomial table stays accurate.
pub const DEGREE_CAP: usize = 400;

fn check_cap(degree: usize) -> Result<()> {
    if degree > DEGREE_CAP {
        return Err(Error::DegreeCap {
            degree,
            cap: DEGREE_CAP,
        });
    }
    Ok(())
}

/// Evaluate the degree-s Bernstein basis at `x` (which may lie outside [0,1];
/// the polynomials extend). Entry `j` is `C(s,j) x^j (1−x)^{s−j}`.
pub fn eval_basis_1d(s: usize, x: f64) -> Vec<f64> {
    assert!(s <= DEGREE_CAP, "Bernstein degree above cap");
    let mut out = vec![0.0; s + 1];
    // Power tables for x^j and (1-x)^(s-j).
    let y = 1.0 - x;
    let mut xp = vec![1.0; s + 1];
    let mut yp = vec![1.0; s + 1];
    for j in 1..=s {
        xp[j] = xp[j - 1] * x;
        yp[j] = yp[j - 1] * y;
    }
    for j in 0..=s {
        out[j] = binomial(s, j) * xp[j] * yp[s - j];
    }
    out
}

/// Derivative values of the degree-s basis at `x`: entry j is `d/dx b_{j+1}^s(x)`.
pub fn eval_basis_deriv_1d(s: usize, x: f64) -> Vec<f64> {
    // d/dx b_j^s = s (b_{j-1}^{s-1} − b_j^{s-1}).
    if s == 0 {
        return vec![0.0];
    }
    let lower = eval_basis_1d(s - 1, x);
    let mut out = vec![0.0; s + 1];
    for j in 0..=s {
        let a = if j >= 1 { lower[j - 1] } else { 0.0 };
        let b = if j <= s - 1 { lower[j] } else { 0.0 };
        out[j] = s as f64 * (a - b);
    }
    out
}

/// Differentiation matrix `D^s`: for a coefficient vector P of degree s,
/// `(D^s P)ᵀ b^s(x) = d/dx (Pᵀ b^s(x))`. Three-band structure.
pub fn diff_matrix_1d(s: usize) -> Array2<f64> {
    let n = s + 1;
    let mut d = Array2::zeros((n, n));
    for i in 0..n {
        if i + 1 < n {
            d[[i, i + 1]] = (s - i) as f64;
        }
        d[[i, i]] = 2.0 * i as f64 - s as f64;
        if i >= 1 {
            d[[i, i - 1]] = -(i as f64);
        }
    }
    d
}

/// Multiplication matrix `M` for a fixed factor `q` of degree s′ acting on
/// degree-s coefficient vectors: `(M P)ᵀ b^{s+s′}(x) = q(x) p(x)`.
pub fn mult_matrix_1d(q: &[Complex64], s: usize) -> Result<Array2<Complex64>> {
    let sp = q.len() - 1;
    check_cap(s + sp)?;
    let mut m = Array2::zeros((s + sp + 1, s + 1));
    for i in 0..=(s + sp) {
        let lo = i.saturating_sub(sp);
        let hi = s.min(i);
        for j in lo..=hi {
            m[[i, j]] = q[i - j] * (binomial(s, j) * binomial(sp, i - j) / binomial(s + sp, i));
        }
    }
    Ok(m)
}

/// Multiplication by the single basis element `b_{k+1}^{s′}`: one nonzero
/// band `M[i, i−k] = C(s, i−k) C(s′, k) / C(s+s′, i)`.
pub fn basis_mult_matrix_1d(s_prime: usize, k: usize, s: usize) -> Result<Array2<f64>> {
    check_cap(s + s_prime)?;
    assert!(k <= s_prime);
    let mut m = Array2::zeros((s + s_prime + 1, s + 1));
    for j in 0..=s {
        let i = j + k;
        m[[i, j]] = binomial(s, j) * binomial(s_prime, k) / binomial(s + s_prime, i);
    }
    Ok(m)
}

/// Degree-raising matrix `T^{s,r}`: `(T^{s,r} P)ᵀ b^{s+r}(x) = Pᵀ b^s(x)`.
/// `r = 0` returns the identity.
pub fn raise_matrix_1d(s: usize, r: usize) -> Result<Array2<f64>> {
    check_cap(s + r)?;
    let mut t = Array2::zeros((s + r + 1, s + 1));
    for j in 0..=s {
        for i in j..=(j + r) {
            t[[i, j]] = binomial(s, j) * binomial(r, i - j) / binomial(s + r, i);
        }
    }
    Ok(t)
}

/// Convert a real matrix to complex entries.
pub fn to_complex(a: &Array2<f64>) -> Array2<Complex64> {
    a.mapv(|v| Complex64::new(v, 0.0))
}

// ---------------------------------------------------------------------------
// Kronecker-factored tensor operators
// ---------------------------------------------------------------------------

/// A Kronecker product `factors[0] ⊗ factors[1] ⊗ …` (axis 0 slowest in the
/// coefficient ordering).
#[derive(Clone, Debug)]
pub struct KronMat {
    /// Per-axis factors.
    pub factors: Vec<Array2<Complex64>>,
}

impl KronMat {
    /// Build from per-axis factors.
    pub fn new(factors: Vec<Array2<Complex64>>) -> Self {
        assert!(!factors.is_empty());
        Self { factors }
    }

    /// Identity on an N-dimensional tensor space with `n` coefficients per axis.
    pub fn identity(n: usize, dims: usize) -> Self {
        let eye = Array2::from_shape_fn((n, n), |(i, j)| {
            Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)
        });
        Self::new(vec![eye; dims])
    }

    /// Total row count (product over factors).
    pub fn nrows(&self) -> usize {
        self.factors.iter().map(|f| f.nrows()).product()
    }

    /// Total column count.
    pub fn ncols(&self) -> usize {
        self.factors.iter().map(|f| f.ncols()).product()
    }

    /// Apply to a coefficient vector (Kronecker-major layout).
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols());
        let nd = self.factors.len();
        let mut data = x.to_vec();
        // Contract one axis at a time; axes before `a` already have output
        // sizes, axes after still have input sizes.
        for a in 0..nd {
            let m = self.factors[a].nrows();
            let n = self.factors[a].ncols();
            let left: usize = self.factors[..a].iter().map(|f| f.nrows()).product();
            let right: usize = self.factors[a + 1..].iter().map(|f| f.ncols()).product();
            let mut next = vec![Complex64::new(0.0, 0.0); left * m * right];
            let f = &self.factors[a];
            for l in 0..left {
                for j in 0..m {
                    let out_base = (l * m + j) * right;
                    for k in 0..n {
                        let c = f[[j, k]];
                        if c == Complex64::new(0.0, 0.0) {
                            continue;
                        }
                        let in_base = (l * n + k) * right;
                        for r in 0..right {
                            next[out_base + r] += c * data[in_base + r];
                        }
                    }
                }
            }
            data = next;
        }
        data
    }

    /// Materialize as a dense matrix (test-sized operators only).
    pub fn to_dense(&self) -> Array2<Complex64> {
        let mut acc = Array2::from_elem((1, 1), Complex64::new(1.0, 0.0));
        for f in &self.factors {
            let (am, an) = acc.dim();
            let (fm, fn_) = f.dim();
            let mut next = Array2::zeros((am * fm, an * fn_));
            for i in 0..am {
                for j in 0..an {
                    let v = acc[[i, j]];
                    if v == Complex64::new(0.0, 0.0) {
                        continue;
                    }
                    for p in 0..fm {
                        for q in 0..fn_ {
                            next[[i * fm + p, j * fn_ + q]] = v * f[[p, q]];
                        }
                    }
                }
            }
            acc = next;
        }
        acc
    }

    /// Accumulate `scale · self` into a dense column-major block starting at
    /// `row_offset` (column offset 0).
    pub fn add_into(&self, a: &mut ColMat, row_offset: usize, scale: Complex64) {
        // Precompute nonzero lists and strides per axis.
        let nd = self.factors.len();
        let nnz: Vec<Vec<(usize, usize, Complex64)>> = self
            .factors
            .iter()
            .map(|f| {
                let mut v = Vec::new();
                for i in 0..f.nrows() {
                    for j in 0..f.ncols() {
                        let c = f[[i, j]];
                        if c != Complex64::new(0.0, 0.0) {
                            v.push((i, j, c));
                        }
                    }
                }
                v
            })
            .collect();
        let mut row_stride = vec![1usize; nd];
        let mut col_stride = vec![1usize; nd];
        for a_ in (0..nd.saturating_sub(1)).rev() {
            row_stride[a_] = row_stride[a_ + 1] * self.factors[a_ + 1].nrows();
            col_stride[a_] = col_stride[a_ + 1] * self.factors[a_ + 1].ncols();
        }

        fn rec(
            axis: usize,
            row: usize,
            col: usize,
            prod: Complex64,
            nnz: &[Vec<(usize, usize, Complex64)>],
            row_stride: &[usize],
            col_stride: &[usize],
            a: &mut ColMat,
            row_offset: usize,
        ) {
            if axis == nnz.len() {
                a.add(row_offset + row, col, prod);
                return;
            }
            for &(i, j, c) in &nnz[axis] {
                rec(
                    axis + 1,
                    row + i * row_stride[axis],
                    col + j * col_stride[axis],
                    prod * c,
                    nnz,
                    row_stride,
                    col_stride,
                    a,
                    row_offset,
                );
            }
        }
        rec(0, 0, 0, scale, &nnz, &row_stride, &col_stride, a, row_offset);
    }

    /// Replace factor `axis` by `new_factor · factors[axis]` (operator
    /// composition on that axis).
    pub fn compose_axis(&mut self, axis: usize, left: &Array2<Complex64>) {
        self.factors[axis] = left.dot(&self.factors[axis]);
    }
}

/// A linear combination `Σ cₜ Kₜ` of Kronecker products with equal shapes.
#[derive(Clone, Debug)]
pub struct KronSum {
    /// Weighted Kronecker terms.
    pub terms: Vec<(Complex64, KronMat)>,
    nrows: usize,
    ncols: usize,
}

impl KronSum {
    /// Build from terms (all shapes must agree).
    pub fn new(terms: Vec<(Complex64, KronMat)>) -> Self {
        assert!(!terms.is_empty());
        let nrows = terms[0].1.nrows();
        let ncols = terms[0].1.ncols();
        for (_, t) in &terms {
            assert_eq!(t.nrows(), nrows);
            assert_eq!(t.ncols(), ncols);
        }
        Self {
            terms,
            nrows,
            ncols,
        }
    }

    /// Row count.
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    /// Column count.
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Append another weighted Kronecker term.
    pub fn push(&mut self, coeff: Complex64, term: KronMat) {
        assert_eq!(term.nrows(), self.nrows);
        assert_eq!(term.ncols(), self.ncols);
        self.terms.push((coeff, term));
    }

    /// Merge all terms of another sum.
    pub fn extend(&mut self, other: KronSum) {
        for (c, t) in other.terms {
            self.push(c, t);
        }
    }

    /// Apply to a coefficient vector.
    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.nrows];
        for (c, t) in &self.terms {
            let yt = t.apply(x);
            for (acc, v) in y.iter_mut().zip(yt) {
                *acc += c * v;
            }
        }
        y
    }

    /// Materialize as dense (test-sized only).
    pub fn to_dense(&self) -> Array2<Complex64> {
        let mut acc = Array2::zeros((self.nrows, self.ncols));
        for (c, t) in &self.terms {
            acc = acc + t.to_dense().mapv(|v| v * c);
        }
        acc
    }

    /// Accumulate into a dense column-major block.
    pub fn add_into(&self, a: &mut ColMat, row_offset: usize, scale: Complex64) {
        for (c, t) in &self.terms {
            t.add_into(a, row_offset, scale * c);
        }
    }
}

// ---------------------------------------------------------------------------
// Tensor coefficient vectors and the module-level tensor operators
// ---------------------------------------------------------------------------

/// Coefficients of a polynomial in the tensor Bernstein basis on `[0,1]^N`,
/// Kronecker-major (axis 0 slowest), uniform degree per axis.
#[derive(Clone, Debug)]
pub struct TensorBernstein {
    /// Number of axes N.
    pub dim: usize,
    /// Degree s per axis.
    pub degree: usize,
    /// `(degree+1)^dim` coefficients.
    pub coeffs: Vec<Complex64>,
}

impl TensorBernstein {
    /// Zero vector.
    pub fn zeros(dim: usize, degree: usize) -> Self {
        Self {
            dim,
            degree,
            coeffs: vec![Complex64::new(0.0, 0.0); (degree + 1).pow(dim as u32)],
        }
    }

    /// Evaluate at `u ∈ [0,1]^N` (or outside; the polynomials extend).
    pub fn eval(&self, u: &[f64]) -> Complex64 {
        assert_eq!(u.len(), self.dim);
        let s = self.degree;
        let mut data = self.coeffs.clone();
        // Contract the leading axis repeatedly.
        for a in 0..self.dim {
            let b = eval_basis_1d(s, u[a]);
            let rest = data.len() / (s + 1);
            let mut next = vec![Complex64::new(0.0, 0.0); rest];
            for j in 0..=s {
                let w = b[j];
                if w == 0.0 {
                    continue;
                }
                let base = j * rest;
                for r in 0..rest {
                    next[r] += w * data[base + r];
                }
            }
            data = next;
        }
        data[0]
    }
}

/// Tensor differentiation along `axis` (0-based): `I ⊗ … ⊗ D^s ⊗ … ⊗ I`.
pub fn tensor_diff_matrix(axis: usize, s: usize, dims: usize) -> Result<KronMat> {
    if axis >= dims {
        return Err(Error::AxisOutOfRange { axis, dim: dims });
    }
    let d = to_complex(&diff_matrix_1d(s));
    let mut k = KronMat::identity(s + 1, dims);
    k.factors[axis] = d;
    Ok(k)
}

/// Tensor degree raising: `T^{s,r} ⊗ … ⊗ T^{s,r}` (N-fold).
pub fn tensor_raise_matrix(s: usize, r: usize, dims: usize) -> Result<KronMat> {
    let t = to_complex(&raise_matrix_1d(s, r)?);
    Ok(KronMat::new(vec![t; dims]))
}

/// Tensor multiplication by `q` (degree s′) acting on degree-s coefficient
/// vectors: `Σ_k q^{(k₁,…,k_N)} M^{k₁} ⊗ … ⊗ M^{k_N}`, accumulated in
/// Kronecker-major order of the multi-index k.
pub fn tensor_mult_matrix(q: &TensorBernstein, s: usize) -> Result<KronSum> {
    let sp = q.degree;
    let dims = q.dim;
    // Single-basis-element factors, shared across terms.
    let singles: Vec<Array2<Complex64>> = (0..=sp)
        .map(|k| basis_mult_matrix_1d(sp, k, s).map(|m| to_complex(&m)))
        .collect::<Result<_>>()?;
    let mut terms = Vec::new();
    let side = sp + 1;
    for (idx, &c) in q.coeffs.iter().enumerate() {
        if c == Complex64::new(0.0, 0.0) {
            continue;
        }
        // Decode the Kronecker-major multi-index.
        let mut rem = idx;
        let mut ks = vec![0usize; dims];
        for a in (0..dims).rev() {
            ks[a] = rem % side;
            rem /= side;
        }
        let factors: Vec<Array2<Complex64>> = ks.iter().map(|&k| singles[k].clone()).collect();
        terms.push((c, KronMat::new(factors)));
    }
    if terms.is_empty() {
        // q is the zero polynomial: a single zero term keeps shapes defined.
        let zero = Array2::zeros((s + sp + 1, s + 1));
        terms.push((
            Complex64::new(0.0, 0.0),
            KronMat::new(vec![zero; dims]),
        ));
    }
    Ok(KronSum::new(terms))
}

/// Exact conversion of an origin-centered polynomial on `[0,1]^N` into the
/// degree-s tensor Bernstein basis, via the per-axis identity
/// `x^k = Σ_{j≥k} [C(j,k)/C(s,k)] b_{j+1}^s(x)`.
pub fn monomial_to_bernstein(p: &MonomialPoly, s: usize) -> Result<TensorBernstein> {
    check_cap(s)?;
    assert!(
        p.center().iter().all(|&c| c == 0.0),
        "monomial_to_bernstein expects box coordinates (origin-centered)"
    );
    let dims = p.dim();
    for axis in 0..dims {
        let deg = p.axis_degree(axis) as usize;
        if deg > s {
            return Err(Error::DegreeOverflow {
                axis,
                degree: deg,
                limit: s,
            });
        }
    }
    let mut out = TensorBernstein::zeros(dims, s);
    let side = s + 1;
    for (k, &c) in p.terms() {
        // Per-axis conversion vectors for x^{k_a}.
        let axis_vecs: Vec<Vec<f64>> = k
            .0
            .iter()
            .map(|&ka| {
                let ka = ka as usize;
                (0..=s)
                    .map(|j| {
                        if j >= ka {
                            binomial(j, ka) / binomial(s, ka)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            })
            .collect();
        // Outer-product accumulation.
        fn rec(
            axis: usize,
            idx: usize,
            w: f64,
            axis_vecs: &[Vec<f64>],
            side: usize,
            c: Complex64,
            out: &mut [Complex64],
        ) {
            if axis == axis_vecs.len() {
                out[idx] += c * w;
                return;
            }
            for (j, &v) in axis_vecs[axis].iter().enumerate() {
                if v != 0.0 {
                    rec(axis + 1, idx * side + j, w * v, axis_vecs, side, c, out);
                }
            }
        }
        rec(0, 0, 1.0, &axis_vecs, side, c, &mut out.coeffs);
    }
    Ok(out)
}

/// Values of the full tensor basis at `u`: Kronecker-major outer product of
/// the per-axis 1D basis values.
pub fn eval_tensor_basis(s: usize, u: &[f64]) -> Vec<f64> {
    let per_axis: Vec<Vec<f64>> = u.iter().map(|&x| eval_basis_1d(s, x)).collect();
    let mut out = vec![1.0];
    for b in &per_axis {
        let mut next = Vec::with_capacity(out.len() * b.len());
        for &v in &out {
            for &w in b {
                next.push(v * w);
            }
        }
        out = next;
    }
    out
}
