//! Dense (row-major) and compressed-sparse-row matrices.
//!
//! Dense matrices back the small analysis/certification blocks; CSR backs
//! constraint and data matrices. Neither aims at BLAS performance.

use crate::error::{Error, Result};
use crate::float;
use crate::vector::Vector;
use alloc::vec;
use alloc::vec::Vec;

#[derive(Clone, Debug, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>, // row-major
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
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, c: f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, c);
        }
        m
    }

    pub fn from_rows(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = if r == 0 { 0 } else { rows[0].len() };
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            assert_eq!(row.len(), c, "ragged rows");
            data.extend_from_slice(row);
        }
        DenseMatrix { rows: r, cols: c, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn add_to(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] += v;
    }

    pub fn row_slice(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matvec(&self, x: &Vector) -> Vector {
        debug_assert_eq!(x.len(), self.cols);
        let mut out = Vector::zeros(self.rows);
        for r in 0..self.rows {
            let mut acc = 0.0;
            for (c, v) in self.row_slice(r).iter().enumerate() {
                acc += v * x[c];
            }
            out[r] = acc;
        }
        out
    }

    pub fn matvec_t(&self, x: &Vector) -> Vector {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = Vector::zeros(self.cols);
        for r in 0..self.rows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            for (c, v) in self.row_slice(r).iter().enumerate() {
                out[c] += v * xr;
            }
        }
        out
    }

    pub fn transpose(&self) -> DenseMatrix {
        let mut t = DenseMatrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.set(c, r, self.get(r, c));
            }
        }
        t
    }

    pub fn matmul(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!(self.cols, other.rows);
        let mut out = DenseMatrix::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                for c in 0..other.cols {
                    out.add_to(r, c, a * other.get(k, c));
                }
            }
        }
        out
    }

    pub fn add(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a += b;
        }
        out
    }

    pub fn sub(&self, other: &DenseMatrix) -> DenseMatrix {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(other.data.iter()) {
            *a -= b;
        }
        out
    }

    pub fn scaled(&self, c: f64) -> DenseMatrix {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|v| *v *= c);
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(float::abs(*v)))
    }

    /// Writes `block` into `self` with its top-left corner at `(r0, c0)`.
    pub fn set_block(&mut self, r0: usize, c0: usize, block: &DenseMatrix) {
        assert!(r0 + block.rows <= self.rows && c0 + block.cols <= self.cols);
        for r in 0..block.rows {
            for c in 0..block.cols {
                self.set(r0 + r, c0 + c, block.get(r, c));
            }
        }
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        if self.rows != self.cols {
            return false;
        }
        let scale = self.max_abs();
        let tol = rel_tol * scale;
        for r in 0..self.rows {
            for c in (r + 1)..self.cols {
                if float::abs(self.get(r, c) - self.get(c, r)) > tol {
                    return false;
                }
            }
        }
        true
    }

    /// Gram matrix `MᵀM`.
    pub fn gram(&self) -> DenseMatrix {
        self.transpose().matmul(self)
    }
}

/// Compressed sparse row storage; column indices strictly increase within
/// each row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CsrMatrix {
            rows,
            cols,
            indptr: vec![0; rows + 1],
            indices: Vec::new(),
            values: Vec::new(),
        }
    }

    pub fn scaled_identity(n: usize, c: f64) -> Self {
        CsrMatrix {
            rows: n,
            cols: n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![c; n],
        }
    }

    /// Builds from per-row `(col, value)` lists; columns must be strictly
    /// increasing in each row and inside `cols`.
    pub fn from_rows(cols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            let mut last: Option<usize> = None;
            for &(c, v) in row {
                if c >= cols {
                    return Err(Error::DimMismatch {
                        what: "csr column index",
                        expected: cols,
                        got: c,
                    });
                }
                if let Some(p) = last {
                    if c <= p {
                        return Err(Error::InvalidParam(alloc::format!(
                            "csr column indices must strictly increase within a row (got {c} after {p})"
                        )));
                    }
                }
                last = Some(c);
                indices.push(c);
                values.push(v);
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix {
            rows: rows.len(),
            cols,
            indptr,
            indices,
            values,
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let lo = self.indptr[r];
        let hi = self.indptr[r + 1];
        (&self.indices[lo..hi], &self.values[lo..hi])
    }

    pub fn matvec(&self, x: &Vector) -> Vector {
        debug_assert_eq!(x.len(), self.cols);
        let mut out = Vector::zeros(self.rows);
        for r in 0..self.rows {
            let (idx, val) = self.row(r);
            let mut acc = 0.0;
            for (c, v) in idx.iter().zip(val.iter()) {
                acc += v * x[*c];
            }
            out[r] = acc;
        }
        out
    }

    pub fn matvec_t(&self, x: &Vector) -> Vector {
        debug_assert_eq!(x.len(), self.rows);
        let mut out = Vector::zeros(self.cols);
        for r in 0..self.rows {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            let (idx, val) = self.row(r);
            for (c, v) in idx.iter().zip(val.iter()) {
                out[*c] += v * xr;
            }
        }
        out
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let mut d = DenseMatrix::zeros(self.rows, self.cols);
        for r in 0..self.rows {
            let (idx, val) = self.row(r);
            for (c, v) in idx.iter().zip(val.iter()) {
                d.set(r, *c, *v);
            }
        }
        d
    }

    /// Dense Gram matrix `MᵀM`, accumulated row by row.
    pub fn gram(&self) -> DenseMatrix {
        let mut g = DenseMatrix::zeros(self.cols, self.cols);
        for r in 0..self.rows {
            let (idx, val) = self.row(r);
            for (i, vi) in idx.iter().zip(val.iter()) {
                for (j, vj) in idx.iter().zip(val.iter()) {
                    g.add_to(*i, *j, vi * vj);
                }
            }
        }
        g
    }

    /// Vertical stack `[top; bottom]`; column counts must match.
    pub fn vstack(top: &CsrMatrix, bottom: &CsrMatrix) -> Result<CsrMatrix> {
        if top.cols != bottom.cols {
            return Err(Error::DimMismatch {
                what: "vstack columns",
                expected: top.cols,
                got: bottom.cols,
            });
        }
        let mut indptr = top.indptr.clone();
        let off = *indptr.last().unwrap();
        indptr.extend(bottom.indptr[1..].iter().map(|p| p + off));
        let mut indices = top.indices.clone();
        indices.extend_from_slice(&bottom.indices);
        let mut values = top.values.clone();
        values.extend_from_slice(&bottom.values);
        Ok(CsrMatrix {
            rows: top.rows + bottom.rows,
            cols: top.cols,
            indptr,
            indices,
            values,
        })
    }
}

/// Either storage form behind one interface; the solvers do not care which
/// one a constraint matrix uses.
#[derive(Clone, Debug, PartialEq)]
pub enum Matrix {
    Dense(DenseMatrix),
    Csr(CsrMatrix),
}

impl Matrix {
    pub fn rows(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.rows(),
            Matrix::Csr(m) => m.rows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            Matrix::Dense(m) => m.cols(),
            Matrix::Csr(m) => m.cols(),
        }
    }

    pub fn matvec(&self, x: &Vector) -> Vector {
        match self {
            Matrix::Dense(m) => m.matvec(x),
            Matrix::Csr(m) => m.matvec(x),
        }
    }

    pub fn matvec_t(&self, x: &Vector) -> Vector {
        match self {
            Matrix::Dense(m) => m.matvec_t(x),
            Matrix::Csr(m) => m.matvec_t(x),
        }
    }

    pub fn to_dense(&self) -> DenseMatrix {
        match self {
            Matrix::Dense(m) => m.clone(),
            Matrix::Csr(m) => m.to_dense(),
        }
    }

    pub fn gram(&self) -> DenseMatrix {
        match self {
            Matrix::Dense(m) => m.gram(),
            Matrix::Csr(m) => m.gram(),
        }
    }

    pub fn scaled_identity(n: usize, c: f64) -> Matrix {
        Matrix::Csr(CsrMatrix::scaled_identity(n, c))
    }

    /// `Some(c)` when the matrix is exactly `c·I`.
    pub fn as_scaled_identity(&self) -> Option<f64> {
        if self.rows() != self.cols() || self.rows() == 0 {
            return None;
        }
        match self {
            Matrix::Csr(m) => {
                let mut c: Option<f64> = None;
                for r in 0..m.rows() {
                    let (idx, val) = m.row(r);
                    // ignore explicitly stored zeros off the diagonal
                    let mut diag = 0.0;
                    for (j, v) in idx.iter().zip(val.iter()) {
                        if *j == r {
                            diag = *v;
                        } else if *v != 0.0 {
                            return None;
                        }
                    }
                    match c {
                        None => c = Some(diag),
                        Some(p) if p == diag => {}
                        _ => return None,
                    }
                }
                c
            }
            Matrix::Dense(m) => {
                let mut c: Option<f64> = None;
                for r in 0..m.rows() {
                    for col in 0..m.cols() {
                        let v = m.get(r, col);
                        if r == col {
                            match c {
                                None => c = Some(v),
                                Some(p) if p == v => {}
                                _ => return None,
                            }
                        } else if v != 0.0 {
                            return None;
                        }
                    }
                }
                c
            }
        }
    }

    pub fn is_zero(&self) -> bool {
        match self {
            Matrix::Dense(m) => m.max_abs() == 0.0,
            Matrix::Csr(m) => m.values.iter().all(|v| *v == 0.0),
        }
    }

    pub fn max_abs(&self) -> f64 {
        match self {
            Matrix::Dense(m) => m.max_abs(),
            Matrix::Csr(m) => m.values.iter().fold(0.0, |a, v| a.max(float::abs(*v))),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dense_matvec_and_transpose() {
        let m = DenseMatrix::from_rows(&[&[1.0, 2.0], &[3.0, 4.0], &[5.0, 6.0]]);
        let x = Vector::from_slice(&[1.0, -1.0]);
        assert_eq!(m.matvec(&x).as_slice(), &[-1.0, -1.0, -1.0]);
        let y = Vector::from_slice(&[1.0, 0.0, 1.0]);
        assert_eq!(m.matvec_t(&y).as_slice(), &[6.0, 8.0]);
        assert_eq!(m.transpose().get(0, 2), 5.0);
    }

    #[test]
    fn csr_round_trip_and_gram() {
        let m = CsrMatrix::from_rows(
            3,
            &[vec![(0, 1.0), (2, 2.0)], vec![], vec![(1, -1.0)]],
        )
        .unwrap();
        assert_eq!(m.nnz(), 3);
        let d = m.to_dense();
        assert_eq!(d.get(0, 2), 2.0);
        assert_eq!(d.get(2, 1), -1.0);
        let g = m.gram();
        assert_eq!(g.get(0, 0), 1.0);
        assert_eq!(g.get(0, 2), 2.0);
        assert_eq!(g.get(2, 2), 4.0);
        assert_eq!(g.get(1, 1), 1.0);
    }

    #[test]
    fn csr_rejects_unsorted_columns() {
        let err = CsrMatrix::from_rows(3, &[vec![(1, 1.0), (1, 2.0)]]);
        assert!(err.is_err());
        let err = CsrMatrix::from_rows(3, &[vec![(2, 1.0), (0, 2.0)]]);
        assert!(err.is_err());
    }

    #[test]
    fn scaled_identity_detection() {
        let m = Matrix::scaled_identity(4, -1.0);
        assert_eq!(m.as_scaled_identity(), Some(-1.0));
        let d = Matrix::Dense(DenseMatrix::from_rows(&[&[2.0, 0.0], &[0.0, 2.0]]));
        assert_eq!(d.as_scaled_identity(), Some(2.0));
        let nd = Matrix::Dense(DenseMatrix::from_rows(&[&[2.0, 1.0], &[0.0, 2.0]]));
        assert_eq!(nd.as_scaled_identity(), None);
    }

    #[test]
    fn vstack_shapes() {
        let a = CsrMatrix::scaled_identity(2, 1.0);
        let b = CsrMatrix::scaled_identity(2, 3.0);
        let s = CsrMatrix::vstack(&a, &b).unwrap();
        assert_eq!(s.rows(), 4);
        assert_eq!(s.to_dense().get(3, 1), 3.0);
    }
}
