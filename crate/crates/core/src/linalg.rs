//! Dense vectors and matrices over a [`Real`] backend, plus a compressed
//! sparse row form used by the evaluator.

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::real::Real;

#[derive(Clone, Debug, PartialEq)]
pub struct Vector<S>(Vec<S>);

impl<S: Real> Vector<S> {
    pub fn zeros(d: usize) -> Self {
        Vector(vec![S::zero(); d])
    }

    pub fn from_f64(xs: &[f64]) -> Self {
        Vector(xs.iter().map(|&x| S::from_f64(x)).collect())
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.0.iter().map(Real::to_f64).collect()
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.0
    }

    pub fn as_mut_slice(&mut self) -> &mut [S] {
        &mut self.0
    }

    pub fn into_inner(self) -> Vec<S> {
        self.0
    }

    pub fn iter(&self) -> std::slice::Iter<'_, S> {
        self.0.iter()
    }

    pub fn dot(&self, other: &Self) -> S {
        let mut acc = S::zero();
        for (a, b) in self.0.iter().zip(&other.0) {
            acc = acc + a.clone() * b.clone();
        }
        acc
    }

    pub fn add(&self, other: &Self) -> Self {
        Vector(
            self.0
                .iter()
                .zip(&other.0)
                .map(|(a, b)| a.clone() + b.clone())
                .collect(),
        )
    }

    pub fn scale(&self, k: &S) -> Self {
        Vector(self.0.iter().map(|a| a.clone() * k.clone()).collect())
    }

    /// Index of the first non-finite entry, if any.
    pub fn first_non_finite(&self) -> Option<usize> {
        self.0.iter().position(|x| !x.is_finite())
    }

    pub fn max_abs(&self) -> S {
        self.0
            .iter()
            .fold(S::zero(), |m, x| S::max_of(m, x.abs()))
    }
}

impl<S> From<Vec<S>> for Vector<S> {
    fn from(v: Vec<S>) -> Self {
        Vector(v)
    }
}

impl<S> Index<usize> for Vector<S> {
    type Output = S;
    fn index(&self, i: usize) -> &S {
        &self.0[i]
    }
}

impl<S> IndexMut<usize> for Vector<S> {
    fn index_mut(&mut self, i: usize) -> &mut S {
        &mut self.0[i]
    }
}

/// Row-major dense matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

impl<S: Real> Matrix<S> {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            data: vec![S::zero(); rows * cols],
        }
    }

    pub fn identity(d: usize) -> Self {
        let mut m = Self::zeros(d, d);
        for i in 0..d {
            m[(i, i)] = S::one();
        }
        m
    }

    pub fn from_rows(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::Dimension(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        Ok(Matrix { rows, cols, data })
    }

    pub fn from_f64(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        Self::from_rows(rows, cols, data.iter().map(|&x| S::from_f64(x)).collect())
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[S] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[S] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn matvec(&self, x: &Vector<S>) -> Vector<S> {
        debug_assert_eq!(x.dim(), self.cols);
        (0..self.rows)
            .map(|r| {
                let mut acc = S::zero();
                for (a, b) in self.row(r).iter().zip(x.iter()) {
                    acc = acc + a.clone() * b.clone();
                }
                acc
            })
            .collect::<Vec<_>>()
            .into()
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t[(c, r)] = self[(r, c)].clone();
            }
        }
        t
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(Real::is_zero)
    }
}

impl<S> Index<(usize, usize)> for Matrix<S> {
    type Output = S;
    fn index(&self, (r, c): (usize, usize)) -> &S {
        &self.data[r * self.cols + c]
    }
}

impl<S> IndexMut<(usize, usize)> for Matrix<S> {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut S {
        &mut self.data[r * self.cols + c]
    }
}

/// Compressed sparse rows. Zero entries of the dense source are dropped;
/// each row keeps its nonzeros in ascending column order so a row product
/// accumulates in the same order as the dense kernel with zeros skipped.
#[derive(Clone, Debug)]
pub struct SparseMatrix<S> {
    rows: usize,
    cols: usize,
    row_start: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<S>,
}

impl<S: Real> SparseMatrix<S> {
    pub fn from_dense(m: &Matrix<S>) -> Self {
        let mut row_start = Vec::with_capacity(m.rows + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_start.push(0);
        for r in 0..m.rows {
            for (c, v) in m.row(r).iter().enumerate() {
                if !v.is_zero() {
                    col_idx.push(c);
                    values.push(v.clone());
                }
            }
            row_start.push(col_idx.len());
        }
        SparseMatrix {
            rows: m.rows,
            cols: m.cols,
            row_start,
            col_idx,
            values,
        }
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

    pub fn row_entries(&self, r: usize) -> impl Iterator<Item = (usize, &S)> {
        let span = self.row_start[r]..self.row_start[r + 1];
        self.col_idx[span.clone()].iter().copied().zip(&self.values[span])
    }

    pub fn row_is_empty(&self, r: usize) -> bool {
        self.row_start[r] == self.row_start[r + 1]
    }

    /// Columns with at least one nonzero in any of `rows`.
    pub fn support_of_rows(&self, rows: impl IntoIterator<Item = usize>) -> Vec<bool> {
        let mut used = vec![false; self.cols];
        for r in rows {
            for (c, _) in self.row_entries(r) {
                used[c] = true;
            }
        }
        used
    }

    /// Rows with at least one nonzero in any column flagged by `cols`.
    pub fn rows_touching(&self, cols: &[bool]) -> Vec<bool> {
        (0..self.rows)
            .map(|r| self.row_entries(r).any(|(c, _)| cols[c]))
            .collect()
    }

    pub fn row_dot(&self, r: usize, x: &[S]) -> S {
        let mut acc = S::zero();
        for (c, v) in self.row_entries(r) {
            acc = acc + v.clone() * x[c].clone();
        }
        acc
    }

    pub fn matvec(&self, x: &[S]) -> Vector<S> {
        (0..self.rows)
            .map(|r| self.row_dot(r, x))
            .collect::<Vec<_>>()
            .into()
    }

    /// Product restricted to the rows listed in `rows`; other entries are zero.
    pub fn matvec_rows(&self, x: &[S], rows: &[usize]) -> Vector<S> {
        let mut out = Vector::zeros(self.rows);
        for &r in rows {
            out[r] = self.row_dot(r, x);
        }
        out
    }
}
