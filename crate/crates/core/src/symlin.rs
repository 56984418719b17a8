//! Dense symmetric-matrix linear algebra.
//!
//! Everything is sized for desk-scale problems (matrix order in the tens,
//! assembled systems in the low thousands at most), so the routines favour
//! exactness and reproducibility: a cyclic Jacobi eigensolver with a fixed
//! sweep order, a one-sided Jacobi SVD, and LU with partial pivoting.
//!
//! Symmetric matrices are vectorized with `svec`: the upper triangle in
//! row-major order, off-diagonal entries scaled by √2, so that
//! `dot(svec(X), svec(Y)) == trace(XY)`.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::num::{self, sqrt};

/// Relative tolerance for accepting (and symmetrizing) a nearly symmetric matrix.
pub const SYM_TOL: f64 = 1e-12;

/// Default relative rank cutoff for spectral decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-8;

const MAX_SWEEPS: usize = 100;

/// Dense row-major real matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Mat {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Mat::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_diag(d: &[f64]) -> Self {
        let mut m = Mat::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m[(i, i)] = *v;
        }
        m
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::dim("Mat::from_vec", rows * cols, data.len()));
        }
        Ok(Mat { rows, cols, data })
    }

    /// Build from nested rows. Panics on ragged input; meant for literals.
    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        Mat { rows: r, cols: c, data }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Mat::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Matrix whose columns are the given vectors.
    pub fn from_cols(nrows: usize, cols: &[Vec<f64>]) -> Self {
        let mut m = Mat::zeros(nrows, cols.len());
        for (j, c) in cols.iter().enumerate() {
            m.set_col(j, c);
        }
        m
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn set_col(&mut self, j: usize, v: &[f64]) {
        debug_assert_eq!(v.len(), self.rows);
        for (i, x) in v.iter().enumerate() {
            self[(i, j)] = *x;
        }
    }

    /// Columns `range` as a new matrix.
    pub fn cols_range(&self, start: usize, end: usize) -> Mat {
        Mat::from_fn(self.rows, end - start, |i, j| self[(i, start + j)])
    }

    pub fn block(&self, r0: usize, c0: usize, nr: usize, nc: usize) -> Mat {
        Mat::from_fn(nr, nc, |i, j| self[(r0 + i, c0 + j)])
    }

    pub fn set_block(&mut self, r0: usize, c0: usize, b: &Mat) {
        for i in 0..b.rows {
            for j in 0..b.cols {
                self[(r0 + i, c0 + j)] = b[(i, j)];
            }
        }
    }

    pub fn transpose(&self) -> Mat {
        Mat::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn matmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.cols, other.rows, "matmul shape");
        let mut out = Mat::zeros(self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[i * other.cols..(i + 1) * other.cols];
                for (d, b) in dst.iter_mut().zip(orow) {
                    *d += a * b;
                }
            }
        }
        out
    }

    /// `selfᵀ · other`
    pub fn tmatmul(&self, other: &Mat) -> Mat {
        assert_eq!(self.rows, other.rows, "tmatmul shape");
        let mut out = Mat::zeros(self.cols, other.cols);
        for k in 0..self.rows {
            for i in 0..self.cols {
                let a = self[(k, i)];
                if a == 0.0 {
                    continue;
                }
                for j in 0..other.cols {
                    out[(i, j)] += a * other[(k, j)];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.cols, v.len(), "matvec shape");
        (0..self.rows).map(|i| num::dot(self.row(i), v)).collect()
    }

    /// `selfᵀ · v`
    pub fn tmatvec(&self, v: &[f64]) -> Vec<f64> {
        assert_eq!(self.rows, v.len(), "tmatvec shape");
        let mut out = vec![0.0; self.cols];
        for (i, vi) in v.iter().enumerate() {
            num::axpy(*vi, self.row(i), &mut out);
        }
        out
    }

    pub fn add(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Mat { data, ..*self }
    }

    pub fn sub(&self, other: &Mat) -> Mat {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Mat { data, ..*self }
    }

    pub fn scale(&self, s: f64) -> Mat {
        let data = self.data.iter().map(|a| a * s).collect();
        Mat { data, ..*self }
    }

    pub fn add_scaled_identity(&mut self, s: f64) {
        for i in 0..self.rows.min(self.cols) {
            self[(i, i)] += s;
        }
    }

    pub fn frob_norm(&self) -> f64 {
        num::norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        num::max_abs(&self.data)
    }

    /// Frobenius inner product `trace(selfᵀ other)`.
    pub fn frob_dot(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        num::dot(&self.data, &other.data)
    }

    pub fn trace(&self) -> f64 {
        (0..self.rows.min(self.cols)).map(|i| self[(i, i)]).sum()
    }

    /// Largest `|a_ij - a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        let mut gap = 0.0f64;
        for i in 0..self.rows {
            for j in (i + 1)..self.cols {
                gap = gap.max((self[(i, j)] - self[(j, i)]).abs());
            }
        }
        gap
    }

    /// Symmetric part `(A + Aᵀ)/2`.
    pub fn sym_part(&self) -> SymMat {
        assert!(self.is_square());
        let n = self.rows;
        SymMat(Mat::from_fn(n, n, |i, j| 0.5 * (self[(i, j)] + self[(j, i)])))
    }
}

/// Dense real symmetric matrix of order `dim() >= 1` (order 0 is allowed for
/// empty blocks).
#[derive(Clone, Debug, PartialEq)]
pub struct SymMat(Mat);

impl Index<(usize, usize)> for SymMat {
    type Output = f64;
    #[inline]
    fn index(&self, idx: (usize, usize)) -> &f64 {
        &self.0[idx]
    }
}

impl SymMat {
    /// Validate a square matrix as symmetric: asymmetry up to
    /// `SYM_TOL·max(1, max|a_ij|)` is averaged away, anything larger is rejected.
    pub fn from_mat(m: Mat, name: &str) -> Result<Self> {
        if !m.is_square() {
            return Err(Error::dim(
                name,
                format!("{0}x{0}", m.rows),
                format!("{}x{}", m.rows, m.cols),
            ));
        }
        let gap = m.asymmetry();
        if gap > SYM_TOL * m.max_abs().max(1.0) {
            return Err(Error::NotSymmetric { name: name.into(), gap });
        }
        Ok(m.sym_part())
    }

    /// Symmetrize without checking. For matrices symmetric by construction.
    pub fn from_mat_unchecked(m: Mat) -> Self {
        m.sym_part()
    }

    pub fn from_rows(rows: &[&[f64]]) -> Result<Self> {
        SymMat::from_mat(Mat::from_rows(rows), "matrix")
    }

    pub fn zeros(m: usize) -> Self {
        SymMat(Mat::zeros(m, m))
    }

    pub fn identity(m: usize) -> Self {
        SymMat(Mat::identity(m))
    }

    pub fn diag(d: &[f64]) -> Self {
        SymMat(Mat::from_diag(d))
    }

    /// Build from the upper triangle `f(i, j)`, `i <= j`.
    pub fn from_upper(m: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut a = Mat::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let v = f(i, j);
                a[(i, j)] = v;
                a[(j, i)] = v;
            }
        }
        SymMat(a)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.rows
    }

    pub fn as_mat(&self) -> &Mat {
        &self.0
    }

    pub fn into_mat(self) -> Mat {
        self.0
    }

    pub fn trace(&self) -> f64 {
        self.0.trace()
    }

    /// `X∙Y = trace(XY)`.
    pub fn dot(&self, other: &SymMat) -> f64 {
        self.0.frob_dot(&other.0)
    }

    pub fn frob_norm(&self) -> f64 {
        self.0.frob_norm()
    }

    pub fn scale(&self, s: f64) -> SymMat {
        SymMat(self.0.scale(s))
    }

    pub fn add(&self, other: &SymMat) -> SymMat {
        SymMat(self.0.add(&other.0))
    }

    pub fn sub(&self, other: &SymMat) -> SymMat {
        SymMat(self.0.sub(&other.0))
    }

    pub fn add_scaled(&mut self, s: f64, other: &SymMat) {
        for (a, b) in self.0.data.iter_mut().zip(&other.0.data) {
            *a += s * b;
        }
    }

    pub fn add_scaled_identity(&mut self, s: f64) {
        self.0.add_scaled_identity(s);
    }

    /// `left ᵀ · self · right`, e.g. the blocks `EᵀXE`, `EᵀXF`.
    pub fn project(&self, left: &Mat, right: &Mat) -> Mat {
        left.tmatmul(&self.0.matmul(right))
    }

    /// `Bᵀ X B` as a symmetric matrix.
    pub fn congruence(&self, b: &Mat) -> SymMat {
        SymMat::from_mat_unchecked(self.project(b, b))
    }

    /// `B X Bᵀ` as a symmetric matrix.
    pub fn congruence_t(&self, b: &Mat) -> SymMat {
        SymMat::from_mat_unchecked(b.matmul(&self.0).matmul(&b.transpose()))
    }

    pub fn min_eig(&self) -> Result<f64> {
        Ok(eigh_ascending(self)?.values.first().copied().unwrap_or(f64::INFINITY))
    }

    /// Apply `f` to the eigenvalues.
    pub fn map_spectrum(&self, f: impl Fn(f64) -> f64) -> Result<SymMat> {
        let ed = eigh_ascending(self)?;
        let d: Vec<f64> = ed.values.iter().map(|&l| f(l)).collect();
        Ok(ed.reconstruct_with(&d))
    }
}

// ---------------------------------------------------------------------------
// svec / smat

pub fn svec_len(m: usize) -> usize {
    m * (m + 1) / 2
}

/// Position of entry `(i, j)`, `i <= j`, in `svec` of an order-`m` matrix.
pub fn svec_index(m: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    // rows 0..i contribute m, m-1, ..., m-i+1 entries
    i * m - i * i.saturating_sub(1) / 2 + (j - i)
}

pub fn svec(x: &SymMat) -> Vec<f64> {
    let m = x.dim();
    let mut v = Vec::with_capacity(svec_len(m));
    for i in 0..m {
        v.push(x[(i, i)]);
        for j in (i + 1)..m {
            v.push(core::f64::consts::SQRT_2 * x[(i, j)]);
        }
    }
    v
}

pub fn smat(v: &[f64], m: usize) -> Result<SymMat> {
    if v.len() != svec_len(m) {
        return Err(Error::dim("smat", svec_len(m), v.len()));
    }
    let mut a = Mat::zeros(m, m);
    let mut k = 0;
    for i in 0..m {
        a[(i, i)] = v[k];
        k += 1;
        for j in (i + 1)..m {
            let x = v[k] / core::f64::consts::SQRT_2;
            a[(i, j)] = x;
            a[(j, i)] = x;
            k += 1;
        }
    }
    Ok(SymMat(a))
}

/// The `k`-th element of the orthonormal svec basis of 𝕊^m.
pub fn svec_basis(m: usize, k: usize) -> SymMat {
    let mut e = vec![0.0; svec_len(m)];
    e[k] = 1.0;
    smat(&e, m).expect("length matches")
}

// ---------------------------------------------------------------------------
// Symmetric eigendecomposition

/// `X = Q diag(values) Qᵀ`, values ascending.
#[derive(Clone, Debug)]
pub struct EigenDecomp {
    pub values: Vec<f64>,
    pub vectors: Mat,
}

impl EigenDecomp {
    pub fn reconstruct_with(&self, d: &[f64]) -> SymMat {
        let q = &self.vectors;
        let m = q.rows();
        let mut a = Mat::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                let s: f64 = (0..d.len()).map(|k| q[(i, k)] * d[k] * q[(j, k)]).sum();
                a[(i, j)] = s;
                a[(j, i)] = s;
            }
        }
        SymMat(a)
    }

    pub fn reconstruct(&self) -> SymMat {
        self.reconstruct_with(&self.values)
    }
}

/// Cyclic Jacobi eigensolver. Values ascending; each eigenvector has its first
/// non-negligible component nonnegative.
pub fn eigh_ascending(x: &SymMat) -> Result<EigenDecomp> {
    let m = x.dim();
    let mut a = x.as_mat().clone();
    let mut v = Mat::identity(m);
    let eps = f64::EPSILON;
    let floor = 1e-3 * eps * a.frob_norm();

    let mut converged = m <= 1;
    for _sweep in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..m {
            for q in (p + 1)..m {
                let apq = a[(p, q)];
                if apq == 0.0 {
                    continue;
                }
                let app = a[(p, p)];
                let aqq = a[(q, q)];
                if apq.abs() <= 0.5 * eps * sqrt(app.abs() * aqq.abs()) || apq.abs() <= floor {
                    a[(p, q)] = 0.0;
                    a[(q, p)] = 0.0;
                    continue;
                }
                rotated = true;
                let theta = (aqq - app) / (2.0 * apq);
                let t = if theta.abs() > 1e150 {
                    0.5 / theta
                } else {
                    let sgn = if theta >= 0.0 { 1.0 } else { -1.0 };
                    sgn / (theta.abs() + sqrt(theta * theta + 1.0))
                };
                let c = 1.0 / sqrt(t * t + 1.0);
                let s = t * c;
                a[(p, p)] = app - t * apq;
                a[(q, q)] = aqq + t * apq;
                a[(p, q)] = 0.0;
                a[(q, p)] = 0.0;
                for k in 0..m {
                    if k != p && k != q {
                        let akp = a[(k, p)];
                        let akq = a[(k, q)];
                        let np = c * akp - s * akq;
                        let nq = s * akp + c * akq;
                        a[(k, p)] = np;
                        a[(p, k)] = np;
                        a[(k, q)] = nq;
                        a[(q, k)] = nq;
                    }
                    let vkp = v[(k, p)];
                    let vkq = v[(k, q)];
                    v[(k, p)] = c * vkp - s * vkq;
                    v[(k, q)] = s * vkp + c * vkq;
                }
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        let mut off = 0.0;
        for i in 0..m {
            for j in 0..m {
                if i != j {
                    off += a[(i, j)] * a[(i, j)];
                }
            }
        }
        return Err(Error::NoConvergence {
            what: "Jacobi eigensolver".into(),
            iterations: MAX_SWEEPS,
            residual: sqrt(off),
        });
    }

    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&i, &j| a[(i, i)].total_cmp(&a[(j, j)]));
    let values: Vec<f64> = order.iter().map(|&i| a[(i, i)]).collect();
    let mut vectors = Mat::zeros(m, m);
    for (newj, &oldj) in order.iter().enumerate() {
        let first = (0..m).map(|i| v[(i, oldj)]).find(|c| c.abs() > 1e-12).unwrap_or(0.0);
        let sgn = if first < 0.0 { -1.0 } else { 1.0 };
        for i in 0..m {
            vectors[(i, newj)] = sgn * v[(i, oldj)];
        }
    }
    Ok(EigenDecomp { values, vectors })
}

// ---------------------------------------------------------------------------
// Lyapunov operator

/// `ℒ_X(Y) = XY + YX`, exactly symmetric.
pub fn lyap_apply(x: &SymMat, y: &SymMat) -> Result<SymMat> {
    if x.dim() != y.dim() {
        return Err(Error::dim("lyap_apply", x.dim(), y.dim()));
    }
    let p = x.as_mat().matmul(y.as_mat());
    let m = x.dim();
    Ok(SymMat::from_upper(m, |i, j| p[(i, j)] + p[(j, i)]))
}

/// Solve `ℒ_X(V) = W` for `X ≻ 0` in the eigenbasis of `X`.
pub fn lyap_solve(x: &SymMat, w: &SymMat) -> Result<SymMat> {
    if x.dim() != w.dim() {
        return Err(Error::dim("lyap_solve", x.dim(), w.dim()));
    }
    let ed = eigh_ascending(x)?;
    lyap_solve_eig(&ed, w)
}

/// [`lyap_solve`] with a precomputed decomposition of `X`.
pub fn lyap_solve_eig(ed: &EigenDecomp, w: &SymMat) -> Result<SymMat> {
    let lmin = ed.values.first().copied().unwrap_or(1.0);
    if lmin <= 0.0 {
        return Err(Error::NotPositiveDefinite {
            what: "Lyapunov operator argument".into(),
            min_eig: lmin,
        });
    }
    let q = &ed.vectors;
    let wt = w.congruence(q);
    let m = w.dim();
    let vt = SymMat::from_upper(m, |i, j| wt[(i, j)] / (ed.values[i] + ed.values[j]));
    Ok(vt.congruence_t(q))
}

/// Moore-Penrose inverse of a positive semidefinite matrix. Eigenvalues below
/// `rank_tol·max(1, λ_max)` are treated as zero.
pub fn pinv_psd(x: &SymMat, rank_tol: f64) -> Result<SymMat> {
    let ed = eigh_ascending(x)?;
    let lmax = ed.values.last().copied().unwrap_or(0.0);
    let cutoff = rank_tol * lmax.max(1.0);
    let lmin = ed.values.first().copied().unwrap_or(0.0);
    if lmin < -cutoff {
        return Err(Error::Indefinite {
            what: "pinv_psd argument".into(),
            min_eig: lmin,
        });
    }
    let d: Vec<f64> = ed
        .values
        .iter()
        .map(|&l| if l >= cutoff { 1.0 / l } else { 0.0 })
        .collect();
    Ok(ed.reconstruct_with(&d))
}

// ---------------------------------------------------------------------------
// Cholesky

/// Lower Cholesky factor, or `None` if a pivot is not strictly positive.
pub fn cholesky(x: &SymMat) -> Option<Mat> {
    let n = x.dim();
    let mut l = Mat::zeros(n, n);
    for j in 0..n {
        let mut d = x[(j, j)];
        for k in 0..j {
            d -= l[(j, k)] * l[(j, k)];
        }
        if !(d > 0.0) {
            return None;
        }
        let ljj = sqrt(d);
        l[(j, j)] = ljj;
        for i in (j + 1)..n {
            let mut s = x[(i, j)];
            for k in 0..j {
                s -= l[(i, k)] * l[(j, k)];
            }
            l[(i, j)] = s / ljj;
        }
    }
    Some(l)
}

pub fn chol_psd_test(x: &SymMat) -> bool {
    cholesky(x).is_some()
}

/// `log det X` for `X ≻ 0`.
pub fn log_det_pd(x: &SymMat) -> Option<f64> {
    let l = cholesky(x)?;
    Some((0..x.dim()).map(|i| 2.0 * num::ln(l[(i, i)])).sum())
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
pub fn inv_pd(x: &SymMat) -> Result<SymMat> {
    let n = x.dim();
    let l = cholesky(x).ok_or_else(|| Error::NotPositiveDefinite {
        what: "matrix to invert".into(),
        min_eig: x.min_eig().unwrap_or(f64::NAN),
    })?;
    // invert L, then X⁻¹ = L⁻ᵀ L⁻¹
    let mut li = Mat::zeros(n, n);
    for j in 0..n {
        li[(j, j)] = 1.0 / l[(j, j)];
        for i in (j + 1)..n {
            let mut s = 0.0;
            for k in j..i {
                s -= l[(i, k)] * li[(k, j)];
            }
            li[(i, j)] = s / l[(i, i)];
        }
    }
    Ok(SymMat::from_mat_unchecked(li.tmatmul(&li)))
}

// ---------------------------------------------------------------------------
// General square systems and SVD

/// Solve `A x = b` by LU with partial pivoting.
pub fn lu_solve(a: &Mat, b: &[f64]) -> Result<Vec<f64>> {
    let n = a.rows();
    if !a.is_square() || b.len() != n {
        return Err(Error::dim(
            "lu_solve",
            format!("{n}x{n} with rhs {n}"),
            format!("{}x{} with rhs {}", a.rows(), a.cols(), b.len()),
        ));
    }
    let mut lu = a.clone();
    let mut x = b.to_vec();
    let scale = a.max_abs().max(f64::MIN_POSITIVE);
    for k in 0..n {
        let (p, pv) = (k..n)
            .map(|i| (i, lu[(i, k)].abs()))
            .fold((k, -1.0), |acc, c| if c.1 > acc.1 { c } else { acc });
        if pv <= 1e-300 || pv <= f64::EPSILON * 1e-4 * scale {
            return Err(Error::Singular {
                what: "LU factorization".into(),
                sigma_min: pv,
            });
        }
        if p != k {
            for j in 0..n {
                let t = lu[(k, j)];
                lu[(k, j)] = lu[(p, j)];
                lu[(p, j)] = t;
            }
            x.swap(k, p);
        }
        let piv = lu[(k, k)];
        for i in (k + 1)..n {
            let f = lu[(i, k)] / piv;
            if f == 0.0 {
                continue;
            }
            lu[(i, k)] = f;
            for j in (k + 1)..n {
                lu[(i, j)] -= f * lu[(k, j)];
            }
            x[i] -= f * x[k];
        }
    }
    for k in (0..n).rev() {
        let mut s = x[k];
        for j in (k + 1)..n {
            s -= lu[(k, j)] * x[j];
        }
        x[k] = s / lu[(k, k)];
    }
    Ok(x)
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`, with `s` descending,
/// `U` of size rows×cols and `V` a full cols×cols orthogonal matrix. Columns
/// of `U` belonging to zero singular values are zero.
#[derive(Clone, Debug)]
pub struct Svd {
    pub u: Mat,
    pub s: Vec<f64>,
    pub v: Mat,
}

/// One-sided (Hestenes) Jacobi SVD. Singular values carry absolute error of
/// order `ε·‖A‖`, so exact rank deficiency shows up at roundoff level.
pub fn svd(a: &Mat) -> Result<Svd> {
    let (r, c) = (a.rows(), a.cols());
    // Work on columns stored contiguously.
    let mut w: Vec<Vec<f64>> = (0..c).map(|j| a.col(j)).collect();
    let mut v: Vec<Vec<f64>> = (0..c)
        .map(|j| {
            let mut e = vec![0.0; c];
            e[j] = 1.0;
            e
        })
        .collect();
    let eps = f64::EPSILON;
    // Columns this small are zero to working precision; rotating them only
    // stirs rounding noise and can cycle.
    let negligible = {
        let t = 1e-3 * eps * a.frob_norm();
        t * t
    };
    let mut converged = c <= 1;
    for _sweep in 0..MAX_SWEEPS {
        if converged {
            break;
        }
        let mut rotated = false;
        for p in 0..c {
            for q in (p + 1)..c {
                let alpha = num::dot(&w[p], &w[p]);
                let beta = num::dot(&w[q], &w[q]);
                let gamma = num::dot(&w[p], &w[q]);
                if gamma == 0.0 || gamma.abs() <= eps * sqrt(alpha * beta) || alpha.min(beta) <= negligible {
                    continue;
                }
                rotated = true;
                let zeta = (beta - alpha) / (2.0 * gamma);
                let sgn = if zeta >= 0.0 { 1.0 } else { -1.0 };
                let t = sgn / (zeta.abs() + sqrt(1.0 + zeta * zeta));
                let cs = 1.0 / sqrt(1.0 + t * t);
                let sn = cs * t;
                let (wp, wq) = two_mut(&mut w, p, q);
                rotate(wp, wq, cs, sn);
                let (vp, vq) = two_mut(&mut v, p, q);
                rotate(vp, vq, cs, sn);
            }
        }
        if !rotated {
            converged = true;
        }
    }
    if !converged {
        return Err(Error::NoConvergence {
            what: "one-sided Jacobi SVD".into(),
            iterations: MAX_SWEEPS,
            residual: f64::NAN,
        });
    }
    let norms: Vec<f64> = w.iter().map(|col| num::norm2(col)).collect();
    let mut order: Vec<usize> = (0..c).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));
    let mut u = Mat::zeros(r, c);
    let mut vm = Mat::zeros(c, c);
    let mut s = Vec::with_capacity(c);
    for (k, &j) in order.iter().enumerate() {
        let sj = norms[j];
        s.push(sj);
        if sj > 0.0 {
            for i in 0..r {
                u[(i, k)] = w[j][i] / sj;
            }
        }
        for i in 0..c {
            vm[(i, k)] = v[j][i];
        }
    }
    Ok(Svd { u, s, v: vm })
}

fn two_mut<T>(v: &mut [T], p: usize, q: usize) -> (&mut T, &mut T) {
    debug_assert!(p < q);
    let (a, b) = v.split_at_mut(q);
    (&mut a[p], &mut b[0])
}

fn rotate(x: &mut [f64], y: &mut [f64], c: f64, s: f64) {
    for (xi, yi) in x.iter_mut().zip(y.iter_mut()) {
        let a = *xi;
        let b = *yi;
        *xi = c * a - s * b;
        *yi = s * a + c * b;
    }
}

impl Svd {
    /// Number of singular values at or above `rel_tol·σ_max`.
    pub fn rank(&self, rel_tol: f64) -> usize {
        let smax = self.s.first().copied().unwrap_or(0.0);
        if smax == 0.0 {
            return 0;
        }
        self.s.iter().filter(|&&x| x >= rel_tol * smax).count()
    }

    /// Orthonormal basis of the null space (columns of V past the rank).
    pub fn null_basis(&self, rel_tol: f64) -> Mat {
        let k = self.rank(rel_tol);
        self.v.cols_range(k, self.v.cols())
    }

    /// Orthonormal basis of the row space (complement of the null space).
    pub fn row_basis(&self, rel_tol: f64) -> Mat {
        let k = self.rank(rel_tol);
        self.v.cols_range(0, k)
    }

    /// Minimum-norm least-squares solution of `A x = b`.
    pub fn solve_min_norm(&self, b: &[f64], rel_tol: f64) -> Vec<f64> {
        let k = self.rank(rel_tol);
        let c = self.v.rows();
        let mut x = vec![0.0; c];
        for j in 0..k {
            let coef = (0..self.u.rows()).map(|i| self.u[(i, j)] * b[i]).sum::<f64>() / self.s[j];
            for (i, xi) in x.iter_mut().enumerate() {
                *xi += coef * self.v[(i, j)];
            }
        }
        x
    }
}

/// Smallest singular value of a square matrix.
pub fn min_singular_value(a: &Mat) -> Result<f64> {
    if !a.is_square() {
        return Err(Error::dim(
            "min_singular_value",
            "square matrix",
            format!("{}x{}", a.rows(), a.cols()),
        ));
    }
    if a.rows() == 0 {
        return Ok(f64::INFINITY);
    }
    Ok(svd(a)?.s.last().copied().unwrap_or(0.0).max(0.0))
}

/// `σ_min` through the eigenvalues of `AᵀA`. Squares the condition number,
/// so roundoff floors it near `sqrt(ε)·‖A‖`; kept for cross-checks only.
pub fn min_singular_value_gram(a: &Mat) -> Result<f64> {
    let g = SymMat::from_mat_unchecked(a.tmatmul(a));
    Ok(sqrt(g.min_eig()?.max(0.0)))
}

/// Minimum-norm least squares with residual `‖Ax − b‖`.
pub fn lstsq_min_norm(a: &Mat, b: &[f64], rel_tol: f64) -> Result<(Vec<f64>, f64)> {
    if b.len() != a.rows() {
        return Err(Error::dim("lstsq_min_norm", a.rows(), b.len()));
    }
    let dec = svd(a)?;
    let x = dec.solve_min_norm(b, rel_tol);
    let r = num::norm2(&num::sub(&a.matvec(&x), b));
    Ok((x, r))
}

/// Null-space basis (columns orthonormal) of `A` at relative tolerance `rel_tol`.
pub fn null_space(a: &Mat, rel_tol: f64) -> Result<Mat> {
    if a.rows() == 0 {
        return Ok(Mat::identity(a.cols()));
    }
    Ok(svd(a)?.null_basis(rel_tol))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn svec_layout_is_row_major_upper() {
        let x = SymMat::from_rows(&[&[1.0, 2.0, 3.0], &[2.0, 4.0, 5.0], &[3.0, 5.0, 6.0]]).unwrap();
        let r2 = core::f64::consts::SQRT_2;
        assert_eq!(svec(&x), vec![1.0, 2.0 * r2, 3.0 * r2, 4.0, 5.0 * r2, 6.0]);
        for i in 0..3 {
            for j in i..3 {
                let e = svec_basis(3, svec_index(3, i, j));
                assert!(e[(i, j)] != 0.0);
            }
        }
        assert_eq!(smat(&svec(&x), 3).unwrap(), x);
    }

    #[test]
    fn asymmetric_input_is_rejected_or_symmetrized() {
        let bad = Mat::from_rows(&[&[1.0, 1.0], &[1.001, 1.0]]);
        assert!(matches!(SymMat::from_mat(bad, "B"), Err(Error::NotSymmetric { .. })));
        let ok = Mat::from_rows(&[&[1.0, 1.0], &[1.0 + 1e-15, 1.0]]);
        let s = SymMat::from_mat(ok, "ok").unwrap();
        assert_eq!(s[(0, 1)], s[(1, 0)]);
    }

    #[test]
    fn eigh_identity_and_diagonal() {
        let ed = eigh_ascending(&SymMat::identity(2)).unwrap();
        assert_eq!(ed.values, vec![1.0, 1.0]);
        assert_eq!(ed.vectors, Mat::identity(2));

        let ed = eigh_ascending(&SymMat::diag(&[3.0, 0.0, 1.0])).unwrap();
        assert_eq!(ed.values, vec![0.0, 1.0, 3.0]);
        let expected = Mat::from_rows(&[&[0.0, 0.0, 1.0], &[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0]]);
        assert_eq!(ed.vectors, expected);
    }

    #[test]
    fn eigh_reconstructs_seeded_random() {
        let mut rng = crate::rng::Rng::seeded(5);
        let x = rng.sym(5);
        let ed = eigh_ascending(&x).unwrap();
        let res = ed.reconstruct().sub(&x).frob_norm();
        assert!(res <= 1e-10 * x.frob_norm().max(1.0), "residual {res}");
        let qtq = ed.vectors.tmatmul(&ed.vectors).sub(&Mat::identity(5)).frob_norm();
        assert!(qtq <= 1e-10);
        assert!(ed.values.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn lyapunov_examples() {
        let x = SymMat::diag(&[1.0, 2.0]);
        let y = SymMat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap();
        assert_eq!(
            lyap_apply(&x, &y).unwrap(),
            SymMat::from_rows(&[&[0.0, 3.0], &[3.0, 0.0]]).unwrap()
        );

        let y = SymMat::from_rows(&[&[1.0, 1.0], &[1.0, 2.0]]).unwrap();
        let w = lyap_apply(&x, &y).unwrap();
        assert_eq!(w, SymMat::from_rows(&[&[2.0, 3.0], &[3.0, 8.0]]).unwrap());
        let back = lyap_solve(&x, &w).unwrap();
        assert!(back.sub(&y).frob_norm() < 1e-14);

        let w = SymMat::from_rows(&[&[4.0, -1.0], &[-1.0, 6.0]]).unwrap();
        let v = lyap_solve(&SymMat::identity(2), &w).unwrap();
        assert!(v.sub(&w.scale(0.5)).frob_norm() < 1e-15);
        assert_eq!(
            lyap_apply(&SymMat::identity(3), &SymMat::diag(&[1.0, 2.0, 3.0])).unwrap(),
            SymMat::diag(&[2.0, 4.0, 6.0])
        );
    }

    #[test]
    fn lyap_solve_rejects_non_pd() {
        let err = lyap_solve(&SymMat::diag(&[1.0, -0.5]), &SymMat::identity(2)).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { min_eig, .. } if min_eig == -0.5));
        assert!(lyap_apply(&SymMat::identity(2), &SymMat::identity(3)).is_err());
    }

    #[test]
    fn pinv_examples() {
        assert_eq!(
            pinv_psd(&SymMat::diag(&[0.0, 2.0]), 1e-8).unwrap(),
            SymMat::diag(&[0.0, 0.5])
        );
        assert_eq!(pinv_psd(&SymMat::identity(3), 1e-8).unwrap(), SymMat::identity(3));
        assert!(matches!(
            pinv_psd(&SymMat::diag(&[-1.0, 2.0]), 1e-8),
            Err(Error::Indefinite { .. })
        ));
    }

    #[test]
    fn singular_values() {
        assert!(close(min_singular_value(&Mat::identity(4)).unwrap(), 1.0, 1e-15));
        assert_eq!(min_singular_value(&Mat::from_diag(&[3.0, 0.0])).unwrap(), 0.0);
        assert!(min_singular_value(&Mat::zeros(2, 3)).is_err());
        let a = Mat::from_rows(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let d = svd(&a).unwrap();
        // σ1·σ2 = |det| = 2, σ1² + σ2² = 30
        assert!(close(d.s[0] * d.s[1], 2.0, 1e-13));
        assert!(close(d.s[0] * d.s[0] + d.s[1] * d.s[1], 30.0, 1e-12));
    }

    #[test]
    fn cholesky_tests() {
        assert!(chol_psd_test(&SymMat::identity(3)));
        assert!(!chol_psd_test(&SymMat::diag(&[1.0, 0.0])));
        assert!(chol_psd_test(&SymMat::from_rows(&[&[2.0, 1.0], &[1.0, 2.0]]).unwrap()));
        assert!(!chol_psd_test(&SymMat::from_rows(&[&[1.0, 2.0], &[2.0, 1.0]]).unwrap()));
        let x = SymMat::from_rows(&[&[4.0, 1.0], &[1.0, 3.0]]).unwrap();
        let xi = inv_pd(&x).unwrap();
        let prod = x.as_mat().matmul(xi.as_mat());
        assert!(prod.sub(&Mat::identity(2)).frob_norm() < 1e-15);
        assert!(close(log_det_pd(&x).unwrap(), num::ln(11.0), 1e-15));
    }

    #[test]
    fn lu_and_null_space() {
        let a = Mat::from_rows(&[&[0.0, 2.0, 1.0], &[1.0, 1.0, 0.0], &[3.0, 0.0, 1.0]]);
        let x = lu_solve(&a, &[1.0, 2.0, 3.0]).unwrap();
        let r = num::sub(&a.matvec(&x), &[1.0, 2.0, 3.0]);
        assert!(num::norm2(&r) < 1e-14);
        assert!(lu_solve(&Mat::from_diag(&[1.0, 0.0]), &[1.0, 1.0]).is_err());

        let b = Mat::from_rows(&[&[1.0, 0.0, 1.0], &[0.0, 1.0, 0.0]]);
        let ns = null_space(&b, 1e-8).unwrap();
        assert_eq!(ns.cols(), 1);
        assert!(num::norm2(&b.matvec(&ns.col(0))) < 1e-15);
    }
}
