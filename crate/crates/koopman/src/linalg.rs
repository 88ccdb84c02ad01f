//! Dense linear-algebra kernels backed by LAPACK (via the system OpenBLAS).
//!
//! Three kernels cover every solver in the crate:
//! * [`eig`] — eigenvalues and right eigenvectors of a real square matrix
//!   (used on Jᵀ to obtain left eigenvectors of J);
//! * [`lu_solve`] — complex LU solve with a reciprocal-condition estimate
//!   (graded Taylor systems, small Newton steps);
//! * [`lstsq_min_norm`] — minimum-norm least squares with an explicit
//!   singular-value cutoff (the large Bernstein collocation systems).
//!
//! Matrices handed to LAPACK live in [`ColMat`], a plain column-major buffer,
//! so no layout conversions happen behind the caller's back.

use ndarray::Array2;
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Dense column-major complex matrix (LAPACK layout).
#[derive(Clone, Debug)]
pub struct ColMat {
    nrows: usize,
    ncols: usize,
    data: Vec<Complex64>,
}

impl ColMat {
    /// Zero matrix of the given shape.
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            data: vec![Complex64::new(0.0, 0.0); nrows * ncols],
        }
    }

    /// Number of rows.
    pub fn nrows(&self) -> usize {
        self.nrows
    }

    /// Number of columns.
    pub fn ncols(&self) -> usize {
        self.ncols
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        debug_assert!(i < self.nrows && j < self.ncols);
        i + j * self.nrows
    }

    /// Entry (i, j).
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> Complex64 {
        self.data[self.idx(i, j)]
    }

    /// Mutable entry (i, j).
    #[inline]
    pub fn at_mut(&mut self, i: usize, j: usize) -> &mut Complex64 {
        let k = self.idx(i, j);
        &mut self.data[k]
    }

    /// Set entry (i, j).
    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: Complex64) {
        let k = self.idx(i, j);
        self.data[k] = v;
    }

    /// Add `v` into entry (i, j).
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: Complex64) {
        let k = self.idx(i, j);
        self.data[k] += v;
    }

    /// Raw column-major data.
    pub fn data(&self) -> &[Complex64] {
        &self.data
    }

    /// Build from a real row-major `ndarray` matrix.
    pub fn from_real(a: &Array2<f64>) -> Self {
        let (m, n) = a.dim();
        let mut out = Self::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                out.set(i, j, Complex64::new(a[[i, j]], 0.0));
            }
        }
        out
    }

    /// Matrix–vector product `self * x`.
    pub fn matvec(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![Complex64::new(0.0, 0.0); self.nrows];
        for j in 0..self.ncols {
            let xj = x[j];
            if xj == Complex64::new(0.0, 0.0) {
                continue;
            }
            let col = &self.data[j * self.nrows..(j + 1) * self.nrows];
            for (yi, aij) in y.iter_mut().zip(col) {
                *yi += aij * xj;
            }
        }
        y
    }

    /// 1-norm (max absolute column sum).
    pub fn norm_1(&self) -> f64 {
        (0..self.ncols)
            .map(|j| {
                self.data[j * self.nrows..(j + 1) * self.nrows]
                    .iter()
                    .map(|z| z.norm())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

// LAPACK (Fortran) entry points from the system OpenBLAS. 32-bit integers
// (LP64 convention, the Ubuntu default).
extern "C" {
    fn dgeev_(
        jobvl: *const u8,
        jobvr: *const u8,
        n: *const i32,
        a: *mut f64,
        lda: *const i32,
        wr: *mut f64,
        wi: *mut f64,
        vl: *mut f64,
        ldvl: *const i32,
        vr: *mut f64,
        ldvr: *const i32,
        work: *mut f64,
        lwork: *const i32,
        info: *mut i32,
    );

    fn dgesv_(
        n: *const i32,
        nrhs: *const i32,
        a: *mut f64,
        lda: *const i32,
        ipiv: *mut i32,
        b: *mut f64,
        ldb: *const i32,
        info: *mut i32,
    );

    fn zgetrf_(
        m: *const i32,
        n: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        ipiv: *mut i32,
        info: *mut i32,
    );

    fn zgetrs_(
        trans: *const u8,
        n: *const i32,
        nrhs: *const i32,
        a: *const Complex64,
        lda: *const i32,
        ipiv: *const i32,
        b: *mut Complex64,
        ldb: *const i32,
        info: *mut i32,
    );

    fn zgecon_(
        norm: *const u8,
        n: *const i32,
        a: *const Complex64,
        lda: *const i32,
        anorm: *const f64,
        rcond: *mut f64,
        work: *mut Complex64,
        rwork: *mut f64,
        info: *mut i32,
    );

    fn zgelsd_(
        m: *const i32,
        n: *const i32,
        nrhs: *const i32,
        a: *mut Complex64,
        lda: *const i32,
        b: *mut Complex64,
        ldb: *const i32,
        s: *mut f64,
        rcond: *const f64,
        rank: *mut i32,
        work: *mut Complex64,
        lwork: *const i32,
        rwork: *mut f64,
        iwork: *mut i32,
        info: *mut i32,
    );
}

fn as_i32(n: usize, what: &'static str) -> Result<i32> {
    i32::try_from(n).map_err(|_| Error::InvalidArgument(format!("{what} too large for LAPACK")))
}

/// Eigenvalues and right eigenvectors of a real square matrix.
///
/// Returns `(eigenvalues, eigenvectors)` with eigenvectors as columns in the
/// same order as the eigenvalues; complex-conjugate pairs are unpacked into
/// genuinely complex vectors. No particular ordering is imposed here.
pub fn eig(a: &Array2<f64>) -> Result<(Vec<Complex64>, Vec<Vec<Complex64>>)> {
    let (m, n) = a.dim();
    assert_eq!(m, n, "eig requires a square matrix");
    let ni = as_i32(n, "matrix dimension")?;
    if n == 0 {
        return Ok((vec![], vec![]));
    }

    // Column-major copy.
    let mut af = vec![0.0_f64; n * n];
    for j in 0..n {
        for i in 0..n {
            af[i + j * n] = a[[i, j]];
        }
    }

    let mut wr = vec![0.0_f64; n];
    let mut wi = vec![0.0_f64; n];
    let mut vr = vec![0.0_f64; n * n];
    let mut info = 0_i32;

    // Workspace query, then the real call.
    let mut work_len = -1_i32;
    let mut work_probe = [0.0_f64; 1];
    unsafe {
        dgeev_(
            b"N".as_ptr(),
            b"V".as_ptr(),
            &ni,
            af.as_mut_ptr(),
            &ni,
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            std::ptr::null_mut(),
            &1,
            vr.as_mut_ptr(),
            &ni,
            work_probe.as_mut_ptr(),
            &work_len,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "dgeev (workspace query)",
            info,
        });
    }
    work_len = work_probe[0] as i32;
    let mut work = vec![0.0_f64; work_len.max(1) as usize];
    unsafe {
        dgeev_(
            b"N".as_ptr(),
            b"V".as_ptr(),
            &ni,
            af.as_mut_ptr(),
            &ni,
            wr.as_mut_ptr(),
            wi.as_mut_ptr(),
            std::ptr::null_mut(),
            &1,
            vr.as_mut_ptr(),
            &ni,
            work.as_mut_ptr(),
            &work_len,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "dgeev",
            info,
        });
    }

    // Unpack: a conjugate pair (wi[j] > 0) stores Re v in column j and Im v
    // in column j+1; the pair's vectors are v and conj(v).
    let mut values = Vec::with_capacity(n);
    let mut vectors = Vec::with_capacity(n);
    let mut j = 0;
    while j < n {
        if wi[j] == 0.0 {
            values.push(Complex64::new(wr[j], 0.0));
            vectors.push((0..n).map(|i| Complex64::new(vr[i + j * n], 0.0)).collect());
            j += 1;
        } else {
            let v: Vec<Complex64> = (0..n)
                .map(|i| Complex64::new(vr[i + j * n], vr[i + (j + 1) * n]))
                .collect();
            values.push(Complex64::new(wr[j], wi[j]));
            vectors.push(v.clone());
            values.push(Complex64::new(wr[j + 1], wi[j + 1]));
            vectors.push(v.into_iter().map(|z| z.conj()).collect());
            j += 2;
        }
    }
    Ok((values, vectors))
}

/// Solve the real square system `a x = b` by LU with partial pivoting.
pub fn solve_real(a: &Array2<f64>, b: &[f64]) -> Result<Vec<f64>> {
    let (m, n) = a.dim();
    assert_eq!(m, n, "solve_real requires a square matrix");
    assert_eq!(b.len(), n);
    let ni = as_i32(n, "matrix dimension")?;
    let mut af = vec![0.0; n * n];
    for j in 0..n {
        for i in 0..n {
            af[i + j * n] = a[[i, j]];
        }
    }
    let mut x = b.to_vec();
    let mut ipiv = vec![0_i32; n];
    let mut info = 0;
    unsafe {
        dgesv_(
            &ni,
            &1,
            af.as_mut_ptr(),
            &ni,
            ipiv.as_mut_ptr(),
            x.as_mut_ptr(),
            &ni,
            &mut info,
        );
    }
    if info > 0 {
        return Err(Error::Singular {
            context: "real linear solve",
        });
    }
    if info < 0 {
        return Err(Error::Lapack {
            routine: "dgesv",
            info,
        });
    }
    Ok(x)
}

/// Output of [`lu_solve`]: the solution and a reciprocal condition estimate.
pub struct LuSolve {
    /// Solution vector.
    pub solution: Vec<Complex64>,
    /// Reciprocal 1-norm condition estimate of the matrix (0 = singular).
    pub rcond: f64,
}

/// Solve the complex square system `a x = b` by LU, reporting the estimated
/// reciprocal condition number so callers can flag near-singular systems.
pub fn lu_solve(a: ColMat, b: &[Complex64]) -> Result<LuSolve> {
    let n = a.nrows;
    assert_eq!(a.ncols, n, "lu_solve requires a square matrix");
    assert_eq!(b.len(), n);
    let ni = as_i32(n, "matrix dimension")?;
    let anorm = a.norm_1();
    let mut af = a.data;
    let mut ipiv = vec![0_i32; n];
    let mut info = 0;
    unsafe {
        zgetrf_(&ni, &ni, af.as_mut_ptr(), &ni, ipiv.as_mut_ptr(), &mut info);
    }
    if info > 0 {
        return Ok(LuSolve {
            solution: vec![Complex64::new(f64::NAN, 0.0); n],
            rcond: 0.0,
        });
    }
    if info < 0 {
        return Err(Error::Lapack {
            routine: "zgetrf",
            info,
        });
    }

    let mut rcond = 0.0_f64;
    let mut work = vec![Complex64::new(0.0, 0.0); 2 * n];
    let mut rwork = vec![0.0_f64; 2 * n];
    unsafe {
        zgecon_(
            b"1".as_ptr(),
            &ni,
            af.as_ptr(),
            &ni,
            &anorm,
            &mut rcond,
            work.as_mut_ptr(),
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "zgecon",
            info,
        });
    }

    let mut x = b.to_vec();
    unsafe {
        zgetrs_(
            b"N".as_ptr(),
            &ni,
            &1,
            af.as_ptr(),
            &ni,
            ipiv.as_ptr(),
            x.as_mut_ptr(),
            &ni,
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "zgetrs",
            info,
        });
    }
    Ok(LuSolve { solution: x, rcond })
}

/// Reciprocal 1-norm condition estimate of a complex square matrix.
pub fn rcond_1(a: ColMat) -> Result<f64> {
    let n = a.nrows;
    assert_eq!(a.ncols, n);
    let ni = as_i32(n, "matrix dimension")?;
    let anorm = a.norm_1();
    let mut af = a.data;
    let mut ipiv = vec![0_i32; n];
    let mut info = 0;
    unsafe {
        zgetrf_(&ni, &ni, af.as_mut_ptr(), &ni, ipiv.as_mut_ptr(), &mut info);
    }
    if info > 0 {
        return Ok(0.0);
    }
    if info < 0 {
        return Err(Error::Lapack {
            routine: "zgetrf",
            info,
        });
    }
    let mut rcond = 0.0_f64;
    let mut work = vec![Complex64::new(0.0, 0.0); 2 * n];
    let mut rwork = vec![0.0_f64; 2 * n];
    unsafe {
        zgecon_(
            b"1".as_ptr(),
            &ni,
            af.as_ptr(),
            &ni,
            &anorm,
            &mut rcond,
            work.as_mut_ptr(),
            rwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "zgecon",
            info,
        });
    }
    Ok(rcond)
}

/// Output of [`lstsq_min_norm`].
pub struct Lstsq {
    /// Minimum-norm least-squares solution (length = number of columns).
    pub solution: Vec<Complex64>,
    /// Effective numerical rank under the cutoff.
    pub rank: usize,
    /// Singular values of the matrix.
    pub singular_values: Vec<f64>,
}

/// Minimum-norm least-squares solution of `a x ≈ b`.
///
/// Singular values below `rcond · σ_max` are treated as zero (divide-and-
/// conquer SVD, `zgelsd`). The matrix is consumed: LAPACK overwrites it.
pub fn lstsq_min_norm(a: ColMat, b: &[Complex64], rcond: f64) -> Result<Lstsq> {
    let m = a.nrows;
    let n = a.ncols;
    assert_eq!(b.len(), m);
    let mi = as_i32(m, "row count")?;
    let ni = as_i32(n, "column count")?;
    let ldb = m.max(n).max(1);
    let ldbi = as_i32(ldb, "rhs leading dimension")?;

    let mut af = a.data;
    let mut bf = vec![Complex64::new(0.0, 0.0); ldb];
    bf[..m].copy_from_slice(b);
    let mut s = vec![0.0_f64; m.min(n)];
    let mut rank = 0_i32;
    let mut info = 0_i32;

    // Workspace query: zgelsd reports complex, real, and integer workspace
    // sizes through the first entries of the probe arrays.
    let lwork_probe = -1_i32;
    let mut work_probe = [Complex64::new(0.0, 0.0); 1];
    let mut rwork_probe = [0.0_f64; 1];
    let mut iwork_probe = [0_i32; 1];
    unsafe {
        zgelsd_(
            &mi,
            &ni,
            &1,
            af.as_mut_ptr(),
            &mi,
            bf.as_mut_ptr(),
            &ldbi,
            s.as_mut_ptr(),
            &rcond,
            &mut rank,
            work_probe.as_mut_ptr(),
            &lwork_probe,
            rwork_probe.as_mut_ptr(),
            iwork_probe.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "zgelsd (workspace query)",
            info,
        });
    }
    let lwork = work_probe[0].re as i32;
    let lrwork = rwork_probe[0] as usize;
    let liwork = iwork_probe[0] as usize;
    let mut work = vec![Complex64::new(0.0, 0.0); lwork.max(1) as usize];
    let mut rwork = vec![0.0_f64; lrwork.max(1)];
    let mut iwork = vec![0_i32; liwork.max(1)];

    unsafe {
        zgelsd_(
            &mi,
            &ni,
            &1,
            af.as_mut_ptr(),
            &mi,
            bf.as_mut_ptr(),
            &ldbi,
            s.as_mut_ptr(),
            &rcond,
            &mut rank,
            work.as_mut_ptr(),
            &lwork,
            rwork.as_mut_ptr(),
            iwork.as_mut_ptr(),
            &mut info,
        );
    }
    if info != 0 {
        return Err(Error::Lapack {
            routine: "zgelsd",
            info,
        });
    }

    bf.truncate(n);
    Ok(Lstsq {
        solution: bf,
        rank: rank as usize,
        singular_values: s,
    })
}

/// Euclidean norm of a complex slice.
pub fn norm2(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}
