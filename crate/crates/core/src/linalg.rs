//! Dense column-major matrices backed by BLAS/LAPACK, plus conjugate gradients.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};

/// Column-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_col_major(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), rows * cols);
        Mat { rows, cols, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for j in 0..cols {
            for i in 0..rows {
                data.push(f(i, j));
            }
        }
        Mat { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn col(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    pub fn col_mut(&mut self, j: usize) -> &mut [f64] {
        &mut self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Scale column `j` by `s[j]`.
    pub fn scale_cols(&mut self, s: &[f64]) {
        assert_eq!(s.len(), self.cols);
        for (j, &f) in s.iter().enumerate() {
            for v in self.col_mut(j) {
                *v *= f;
            }
        }
    }

    /// Scale row `i` by `s[i]`.
    pub fn scale_rows(&mut self, s: &[f64]) {
        assert_eq!(s.len(), self.rows);
        for j in 0..self.cols {
            for (v, f) in self.col_mut(j).iter_mut().zip(s) {
                *v *= f;
            }
        }
    }

    /// The square submatrix on rows and columns `idx`.
    pub fn select(&self, idx: &[usize]) -> Mat {
        Mat::from_fn(idx.len(), idx.len(), |i, j| self[(idx[i], idx[j])])
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, a| m.max(a.abs()))
    }

    /// `y = self * x`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.rows];
        self.gemv(false, 1.0, x, 0.0, &mut y);
        y
    }

    /// `y = self^T * x`.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.cols];
        self.gemv(true, 1.0, x, 0.0, &mut y);
        y
    }

    pub fn gemv(&self, trans: bool, alpha: f64, x: &[f64], beta: f64, y: &mut [f64]) {
        let (m, n) = (self.rows as i32, self.cols as i32);
        let t = if trans { b'T' } else { b'N' };
        assert_eq!(x.len(), if trans { self.rows } else { self.cols });
        assert_eq!(y.len(), if trans { self.cols } else { self.rows });
        if self.rows == 0 || self.cols == 0 {
            y.iter_mut().for_each(|v| *v *= beta);
            return;
        }
        unsafe {
            blas::dgemv(t, m, n, alpha, &self.data, m, x, 1, beta, y, 1);
        }
    }

    /// `op(a) * op(b)`.
    pub fn gemm(a: &Mat, ta: bool, b: &Mat, tb: bool) -> Mat {
        let (m, ka) = if ta { (a.cols, a.rows) } else { (a.rows, a.cols) };
        let (kb, n) = if tb { (b.cols, b.rows) } else { (b.rows, b.cols) };
        assert_eq!(ka, kb, "inner dimensions differ");
        let mut c = Mat::zeros(m, n);
        if m == 0 || n == 0 || ka == 0 {
            return c;
        }
        unsafe {
            blas::dgemm(
                if ta { b'T' } else { b'N' },
                if tb { b'T' } else { b'N' },
                m as i32,
                n as i32,
                ka as i32,
                1.0,
                &a.data,
                a.rows.max(1) as i32,
                &b.data,
                b.rows.max(1) as i32,
                0.0,
                &mut c.data,
                m as i32,
            );
        }
        c
    }

    /// `V diag(w) V^T`, symmetrized.
    pub fn spectral_product(v: &Mat, w: &[f64]) -> Mat {
        let mut vw = v.clone();
        vw.scale_cols(w);
        let mut out = Mat::gemm(&vw, false, v, true);
        out.symmetrize();
        out
    }

    pub fn symmetrize(&mut self) {
        let n = self.rows;
        for j in 0..n {
            for i in (j + 1)..n {
                let a = 0.5 * (self[(i, j)] + self[(j, i)]);
                self[(i, j)] = a;
                self[(j, i)] = a;
            }
        }
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        &self.data[j * self.rows + i]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        &mut self.data[j * self.rows + i]
    }
}

/// Eigen-decomposition of a symmetric matrix: ascending eigenvalues and
/// orthonormal eigenvectors as columns.
pub fn sym_eig(mut a: Mat) -> Result<(Vec<f64>, Mat)> {
    let n = a.rows;
    assert_eq!(n, a.cols);
    if n == 0 {
        return Ok((vec![], a));
    }
    let ni = n as i32;
    let mut w = vec![0.0; n];
    let mut info = 0;
    let mut work = vec![0.0];
    let mut iwork = vec![0];
    unsafe {
        lapack::dsyevd(b'V', b'L', ni, &mut a.data, ni, &mut w, &mut work, -1, &mut iwork, -1, &mut info);
    }
    let lwork = work[0] as usize;
    let liwork = iwork[0] as usize;
    let mut work = vec![0.0; lwork.max(1)];
    let mut iwork = vec![0; liwork.max(1)];
    unsafe {
        lapack::dsyevd(b'V', b'L', ni, &mut a.data, ni, &mut w, &mut work, lwork as i32, &mut iwork, liwork as i32, &mut info);
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dsyevd failed with info = {info}")));
    }
    Ok((w, a))
}

/// Eigen-decomposition of the symmetric tridiagonal matrix with diagonal `d`
/// and off-diagonal `e`.
pub fn tridiag_eig(d: &[f64], e: &[f64]) -> Result<(Vec<f64>, Mat)> {
    let n = d.len();
    assert!(e.len() + 1 >= n);
    let mut dd = d.to_vec();
    let mut ee: Vec<f64> = e.iter().take(n.saturating_sub(1)).copied().collect();
    ee.push(0.0);
    let mut z = Mat::zeros(n, n);
    let mut work = vec![0.0; (2 * n).saturating_sub(2).max(1)];
    let mut info = 0;
    unsafe {
        lapack::dstev(b'V', n as i32, &mut dd, &mut ee, &mut z.data, n.max(1) as i32, &mut work, &mut info);
    }
    if info != 0 {
        return Err(Error::Numerical(format!("dstev failed with info = {info}")));
    }
    Ok((dd, z))
}

/// Cholesky factor of a symmetric positive definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    factor: Mat,
}

impl Cholesky {
    pub fn new(mut a: Mat) -> Result<Self> {
        let n = a.rows as i32;
        let mut info = 0;
        unsafe {
            lapack::dpotrf(b'L', n, &mut a.data, n.max(1), &mut info);
        }
        if info != 0 {
            return Err(Error::Numerical(format!("Cholesky factorization failed with info = {info}")));
        }
        Ok(Cholesky { factor: a })
    }

    pub fn dim(&self) -> usize {
        self.factor.rows
    }

    /// Solve for every column of `b`.
    pub fn solve_mat(&self, mut b: Mat) -> Mat {
        let n = self.factor.rows as i32;
        let mut info = 0;
        unsafe {
            lapack::dpotrs(b'L', n, b.cols as i32, &self.factor.data, n.max(1), &mut b.data, n.max(1), &mut info);
        }
        assert_eq!(info, 0, "dpotrs rejected its arguments");
        b
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        self.solve_mat(Mat::from_col_major(b.len(), 1, b.to_vec())).data
    }
}

/// Solve `a x = b` for symmetric positive definite `a`; `b` holds one
/// right-hand side per column.
pub fn cholesky_solve(a: Mat, b: Mat) -> Result<Mat> {
    Ok(Cholesky::new(a)?.solve_mat(b))
}

/// Solve the general square system `a x = b` by LU with partial pivoting.
pub fn lu_solve(mut a: Mat, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows as i32;
    let mut x = b.to_vec();
    let mut ipiv = vec![0i32; a.rows];
    let mut info = 0;
    unsafe {
        lapack::dgesv(n, 1, &mut a.data, n, &mut ipiv, &mut x, n, &mut info);
    }
    if info != 0 {
        return Err(Error::Numerical(format!("LU solve failed with info = {info}")));
    }
    Ok(x)
}

/// Outcome of a conjugate-gradient solve.
#[derive(Clone, Debug)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Conjugate gradients for a symmetric positive definite operator.
pub fn conjugate_gradient(
    apply: impl Fn(&[f64], &mut [f64]),
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgOutcome> {
    let n = b.len();
    let bnorm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let mut x = vec![0.0; n];
    if bnorm == 0.0 {
        return Ok(CgOutcome { x, iterations: 0, relative_residual: 0.0 });
    }
    let mut r = b.to_vec();
    let mut p = r.clone();
    let mut ap = vec![0.0; n];
    let mut rr: f64 = r.iter().map(|v| v * v).sum();
    for k in 0..max_iter {
        apply(&p, &mut ap);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if !(pap > 0.0) {
            return Err(Error::Numerical("operator is not positive definite".into()));
        }
        let a = rr / pap;
        for i in 0..n {
            x[i] += a * p[i];
            r[i] -= a * ap[i];
        }
        let rr_new: f64 = r.iter().map(|v| v * v).sum();
        let rel = rr_new.sqrt() / bnorm;
        if rel <= tol {
            return Ok(CgOutcome { x, iterations: k + 1, relative_residual: rel });
        }
        let beta = rr_new / rr;
        rr = rr_new;
        for i in 0..n {
            p[i] = r[i] + beta * p[i];
        }
    }
    Err(Error::Numerical(format!(
        "conjugate gradients did not reach {tol:e} in {max_iter} iterations"
    )))
}

/// Gauss-Legendre nodes and weights mapped to `[a, b]`.
pub fn gauss_legendre(n: usize, a: f64, b: f64) -> Vec<(f64, f64)> {
    let rule = gauss_quad::legendre::GaussLegendre::new(n.try_into().expect("at least one node"));
    let (mid, half) = (0.5 * (a + b), 0.5 * (b - a));
    rule.as_node_weight_pairs()
        .iter()
        .map(|&(x, w)| (mid + half * x, half * w))
        .collect()
}
