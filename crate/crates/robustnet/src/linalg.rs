//! Small dense complex matrices.
//!
//! Channel and beamformer math only ever touches matrices of a few dozen
//! entries, so this is a plain row-major `Vec<Complex64>` with the handful
//! of operations the crate needs.

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct CMat {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                m.data[r * cols + c] = f(r, c);
            }
        }
        m
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| {
            Complex64::new(if r == c { 1.0 } else { 0.0 }, 0.0)
        })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    #[inline]
    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn entries(&self) -> &[Complex64] {
        &self.data
    }

    /// Conjugate transpose.
    pub fn hermitian(&self) -> CMat {
        CMat::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn mul(&self, rhs: &CMat) -> CMat {
        assert_eq!(
            self.cols, rhs.rows,
            "matrix product shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = CMat::zeros(self.rows, rhs.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                for c in 0..rhs.cols {
                    let v = out.get(r, c) + a * rhs.get(k, c);
                    out.set(r, c, v);
                }
            }
        }
        out
    }

    pub fn add(&self, rhs: &CMat) -> CMat {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        let mut out = self.clone();
        for (a, b) in out.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
        out
    }

    /// `self + alpha * I`; requires a square matrix.
    pub fn add_scaled_identity(&self, alpha: f64) -> CMat {
        assert_eq!(self.rows, self.cols, "not square");
        let mut out = self.clone();
        for i in 0..self.rows {
            let v = out.get(i, i) + Complex64::new(alpha, 0.0);
            out.set(i, i, v);
        }
        out
    }

    /// Inverse by Gauss-Jordan elimination with partial pivoting.
    ///
    /// A pivot below `1e-12` relative to the largest entry is reported as a
    /// singular matrix rather than producing garbage.
    pub fn invert(&self) -> Result<CMat> {
        if self.rows != self.cols {
            return Err(Error::Usage("cannot invert a non-square matrix".into()));
        }
        let n = self.rows;
        let scale = self
            .data
            .iter()
            .map(|v| v.norm())
            .fold(0.0f64, f64::max)
            .max(f64::MIN_POSITIVE);
        let mut aug = self.clone();
        let mut inv = CMat::identity(n);

        for col in 0..n {
            let pivot_row = (col..n)
                .max_by(|&a, &b| {
                    aug.get(a, col)
                        .norm()
                        .partial_cmp(&aug.get(b, col).norm())
                        .unwrap()
                })
                .unwrap();
            if aug.get(pivot_row, col).norm() < 1e-12 * scale {
                return Err(Error::Numerical(format!(
                    "singular matrix in inversion (pivot {col})"
                )));
            }
            if pivot_row != col {
                for c in 0..n {
                    let (a, b) = (aug.get(col, c), aug.get(pivot_row, c));
                    aug.set(col, c, b);
                    aug.set(pivot_row, c, a);
                    let (a, b) = (inv.get(col, c), inv.get(pivot_row, c));
                    inv.set(col, c, b);
                    inv.set(pivot_row, c, a);
                }
            }
            let pivot = aug.get(col, col);
            for c in 0..n {
                aug.set(col, c, aug.get(col, c) / pivot);
                inv.set(col, c, inv.get(col, c) / pivot);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = aug.get(r, col);
                if factor.norm() == 0.0 {
                    continue;
                }
                for c in 0..n {
                    let v = aug.get(r, c) - factor * aug.get(col, c);
                    aug.set(r, c, v);
                    let v = inv.get(r, c) - factor * inv.get(col, c);
                    inv.set(r, c, v);
                }
            }
        }
        Ok(inv)
    }

    /// Euclidean norm of each column.
    pub fn column_norms(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|c| {
                (0..self.rows)
                    .map(|r| self.get(r, c).norm_sqr())
                    .sum::<f64>()
                    .sqrt()
            })
            .collect()
    }

    /// Scale each column to unit Euclidean norm.
    pub fn normalize_columns(&self) -> Result<CMat> {
        let norms = self.column_norms();
        if norms.iter().any(|&n| n == 0.0 || !n.is_finite()) {
            return Err(Error::Numerical(
                "cannot normalize a zero or non-finite column".into(),
            ));
        }
        Ok(CMat::from_fn(self.rows, self.cols, |r, c| {
            self.get(r, c) / norms[c]
        }))
    }

    pub fn max_abs_diff(&self, rhs: &CMat) -> f64 {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        self.data
            .iter()
            .zip(&rhs.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }
}
