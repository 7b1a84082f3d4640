//! Dense row-major matrices and minimum-norm least squares.
//!
//! Factorizations are delegated to `faer`; the public surface only exposes
//! [`DenseMatrix`] and plain vectors so the rest of the crate stays
//! independent of the backend.

use std::ops::{Index, IndexMut};

use faer::Mat;

use crate::error::{Error, Result};

/// Relative rank cutoff used when the caller does not supply one.
pub const DEFAULT_RCOND: f64 = 1e-12;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        DenseMatrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "data length {} does not match {rows}x{cols}",
                data.len()
            )));
        }
        Ok(DenseMatrix { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for i in 0..rows {
            for j in 0..cols {
                data.push(f(i, j));
            }
        }
        DenseMatrix { rows, cols, data }
    }

    /// A single-column matrix holding `v`.
    pub fn column(v: &[f64]) -> Self {
        DenseMatrix {
            rows: v.len(),
            cols: 1,
            data: v.to_vec(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn col_to_vec(&self, j: usize) -> Vec<f64> {
        (0..self.rows).map(|i| self[(i, j)]).collect()
    }

    pub fn transpose(&self) -> Self {
        DenseMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn frobenius_norm(&self) -> f64 {
        norm2(&self.data)
    }

    pub fn max_abs(&self) -> f64 {
        norm_inf(&self.data)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols, "matvec dimension mismatch");
        (0..self.rows).map(|i| dot(self.row(i), x)).collect()
    }

    /// `Aᵀ y`.
    pub fn tr_matvec(&self, y: &[f64]) -> Vec<f64> {
        assert_eq!(y.len(), self.rows, "tr_matvec dimension mismatch");
        let mut out = vec![0.0; self.cols];
        for (i, &yi) in y.iter().enumerate() {
            if yi != 0.0 {
                for (o, a) in out.iter_mut().zip(self.row(i)) {
                    *o += yi * a;
                }
            }
        }
        out
    }

    /// Copy of the column range `[start, start + len)`.
    pub fn columns(&self, start: usize, len: usize) -> Self {
        DenseMatrix::from_fn(self.rows, len, |i, j| self[(i, start + j)])
    }

    pub fn sub(&self, other: &DenseMatrix) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::invalid("shape mismatch in subtraction"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn add(&self, other: &DenseMatrix) -> Result<Self> {
        if self.shape() != other.shape() {
            return Err(Error::invalid("shape mismatch in addition"));
        }
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Ok(DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    pub fn scale(&self, c: f64) -> Self {
        DenseMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    pub(crate) fn to_faer(&self) -> Mat<f64> {
        Mat::from_fn(self.rows, self.cols, |i, j| self.data[i * self.cols + j])
    }

    pub(crate) fn from_faer(m: faer::MatRef<'_, f64>) -> Self {
        DenseMatrix::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)])
    }
}

impl Index<(usize, usize)> for DenseMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &self.data[i * self.cols + j]
    }
}

impl IndexMut<(usize, usize)> for DenseMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut f64 {
        debug_assert!(i < self.rows && j < self.cols);
        &mut self.data[i * self.cols + j]
    }
}

#[derive(Clone, Debug)]
pub struct LstsqSolution {
    /// One solution column per right-hand side.
    pub x: DenseMatrix,
    pub rank: usize,
    /// Frobenius norm of `A X − B`.
    pub residual_norm: f64,
    pub singular_values: Vec<f64>,
}

/// Thin singular value decomposition `A = U diag(s) Vᵀ`.
#[derive(Clone, Debug)]
pub struct ThinSvd {
    u: Mat<f64>,
    s: Vec<f64>,
    v: Mat<f64>,
}

impl ThinSvd {
    pub fn new(a: &DenseMatrix) -> Result<Self> {
        if a.rows == 0 || a.cols == 0 {
            return Err(Error::invalid("SVD of an empty matrix"));
        }
        if !a.is_finite() {
            return Err(Error::invalid("non-finite entry in matrix"));
        }
        let svd = a
            .to_faer()
            .thin_svd()
            .map_err(|e| Error::numeric(format!("SVD did not converge: {e:?}")))?;
        let s: Vec<f64> = svd.S().column_vector().iter().copied().collect();
        if s.iter().any(|v| !v.is_finite()) {
            return Err(Error::numeric("SVD produced non-finite singular values"));
        }
        Ok(ThinSvd {
            u: svd.U().to_owned(),
            s,
            v: svd.V().to_owned(),
        })
    }

    pub fn singular_values(&self) -> &[f64] {
        &self.s
    }

    pub fn u(&self) -> DenseMatrix {
        DenseMatrix::from_faer(self.u.as_ref())
    }

    pub fn v(&self) -> DenseMatrix {
        DenseMatrix::from_faer(self.v.as_ref())
    }

    /// Number of singular values above `rcond · σ_max`.
    pub fn rank(&self, rcond: f64) -> usize {
        let smax = self.s.first().copied().unwrap_or(0.0);
        let cut = rcond * smax;
        self.s.iter().take_while(|&&v| v > cut && v > 0.0).count()
    }

    /// `Uᵀ f` over all retained singular triplets.
    pub fn ut_vec(&self, f: &[f64]) -> Vec<f64> {
        let k = self.s.len();
        let m = self.u.nrows();
        assert_eq!(f.len(), m);
        let mut out = vec![0.0; k];
        for (j, o) in out.iter_mut().enumerate() {
            let col = self.u.col(j);
            let mut acc = 0.0;
            for i in 0..m {
                acc += col[i] * f[i];
            }
            *o = acc;
        }
        out
    }

    /// `V w` for a coefficient vector of length `min(rows, cols)`.
    pub fn v_vec(&self, w: &[f64]) -> Vec<f64> {
        let n = self.v.nrows();
        assert_eq!(w.len(), self.s.len());
        let mut out = vec![0.0; n];
        for (j, &wj) in w.iter().enumerate() {
            if wj != 0.0 {
                let col = self.v.col(j);
                for (i, o) in out.iter_mut().enumerate() {
                    *o += col[i] * wj;
                }
            }
        }
        out
    }

    /// Minimum-norm solution `A⁺ B` with the rank cut at `rcond · σ_max`.
    pub fn solve(&self, b: &DenseMatrix, rcond: f64) -> DenseMatrix {
        let r = self.rank(rcond);
        let bf = b.to_faer();
        let ur = self.u.subcols(0, r);
        let mut c = ur.transpose() * &bf;
        for i in 0..r {
            let inv = 1.0 / self.s[i];
            for j in 0..c.ncols() {
                c[(i, j)] *= inv;
            }
        }
        let x = self.v.subcols(0, r) * &c;
        DenseMatrix::from_faer(x.as_ref())
    }

    /// Orthogonal projection `U_r U_rᵀ B` onto the numerical range of `A`.
    pub fn project(&self, b: &DenseMatrix, rcond: f64) -> DenseMatrix {
        let r = self.rank(rcond);
        let bf = b.to_faer();
        let ur = self.u.subcols(0, r);
        let c = ur.transpose() * &bf;
        let p = ur * &c;
        DenseMatrix::from_faer(p.as_ref())
    }
}

/// Minimum-norm least-squares solution of `A X ≈ B`, column by column.
pub fn min_norm_lstsq(a: &DenseMatrix, b: &DenseMatrix, rcond: f64) -> Result<LstsqSolution> {
    if a.rows == 0 || a.cols == 0 {
        return Err(Error::invalid("least squares needs a non-empty matrix"));
    }
    if b.rows != a.rows {
        return Err(Error::invalid(format!(
            "right-hand side has {} rows, matrix has {}",
            b.rows, a.rows
        )));
    }
    if !(0.0..1.0).contains(&rcond) {
        return Err(Error::invalid(format!("rcond {rcond} outside [0, 1)")));
    }
    if !b.is_finite() {
        return Err(Error::invalid("non-finite entry in right-hand side"));
    }
    let svd = ThinSvd::new(a)?;
    let x = svd.solve(b, rcond);
    let residual_norm = matmul(a, &x)?.sub(b)?.frobenius_norm();
    Ok(LstsqSolution {
        rank: svd.rank(rcond),
        singular_values: svd.s.clone(),
        x,
        residual_norm,
    })
}

pub fn matmul(a: &DenseMatrix, b: &DenseMatrix) -> Result<DenseMatrix> {
    if a.cols != b.rows {
        return Err(Error::invalid(format!(
            "cannot multiply {}x{} by {}x{}",
            a.rows, a.cols, b.rows, b.cols
        )));
    }
    if a.rows == 0 || b.cols == 0 || a.cols == 0 {
        return Ok(DenseMatrix::zeros(a.rows, b.cols));
    }
    let c = a.to_faer() * b.to_faer();
    Ok(DenseMatrix::from_faer(c.as_ref()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn norm_inf(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}
