//! Column-major complex matrix used for symbol frames, subcarrier frames,
//! channel matrices and radar images.
//!
//! Rows index subcarriers (or range bins), columns index OFDM symbols (or
//! Doppler bins). Columns are contiguous so per-symbol transforms work on
//! slices directly.

use num_complex::Complex64;
use std::ops::{AddAssign, SubAssign};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct ComplexGrid {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl ComplexGrid {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    /// Builds a grid from column-major data.
    pub fn from_columns(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch(format!(
                "{} values for a {rows}x{cols} grid",
                data.len()
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for c in 0..cols {
            for r in 0..rows {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
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

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> Complex64 {
        self.data[col * self.rows + row]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: Complex64) {
        self.data[col * self.rows + row] = value;
    }

    #[inline]
    pub fn get_mut(&mut self, row: usize, col: usize) -> &mut Complex64 {
        &mut self.data[col * self.rows + row]
    }

    pub fn col(&self, col: usize) -> &[Complex64] {
        &self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn col_mut(&mut self, col: usize) -> &mut [Complex64] {
        &mut self.data[col * self.rows..(col + 1) * self.rows]
    }

    pub fn columns(&self) -> impl Iterator<Item = &[Complex64]> {
        self.data.chunks_exact(self.rows.max(1)).take(self.cols)
    }

    pub fn columns_mut(&mut self) -> impl Iterator<Item = &mut [Complex64]> {
        let cols = self.cols;
        self.data.chunks_exact_mut(self.rows.max(1)).take(cols)
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// Copies row `row` into a new vector.
    pub fn row(&self, row: usize) -> Vec<Complex64> {
        (0..self.cols).map(|c| self.get(row, c)).collect()
    }

    pub fn set_row(&mut self, row: usize, values: &[Complex64]) {
        debug_assert_eq!(values.len(), self.cols);
        for (c, v) in values.iter().enumerate() {
            self.set(row, c, *v);
        }
    }

    /// First `cols` columns as a new grid.
    pub fn leading_columns(&self, cols: usize) -> Result<Self> {
        if cols > self.cols {
            return Err(Error::DimensionMismatch(format!(
                "requested {cols} columns from a grid with {}",
                self.cols
            )));
        }
        Ok(Self {
            rows: self.rows,
            cols,
            data: self.data[..cols * self.rows].to_vec(),
        })
    }

    /// |x|² of every entry, column-major.
    pub fn power(&self) -> Vec<f64> {
        self.data.iter().map(|v| v.norm_sqr()).collect()
    }

    pub fn energy(&self) -> f64 {
        self.data.iter().map(|v| v.norm_sqr()).sum()
    }

    pub fn scale(&mut self, factor: f64) {
        for v in &mut self.data {
            *v *= factor;
        }
    }

    pub fn map_inplace(&mut self, mut f: impl FnMut(Complex64) -> Complex64) {
        for v in &mut self.data {
            *v = f(*v);
        }
    }

    /// Index and value of the entry with the largest magnitude.
    pub fn argmax_power(&self) -> (usize, usize, f64) {
        let mut best = (0, 0.0);
        for (i, v) in self.data.iter().enumerate() {
            let p = v.norm_sqr();
            if p > best.1 {
                best = (i, p);
            }
        }
        (best.0 % self.rows, best.0 / self.rows, best.1)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    fn check_same_shape(&self, other: &Self) {
        assert_eq!(self.shape(), other.shape(), "grid shape mismatch");
    }
}

impl AddAssign<&ComplexGrid> for ComplexGrid {
    fn add_assign(&mut self, rhs: &ComplexGrid) {
        self.check_same_shape(rhs);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

impl SubAssign<&ComplexGrid> for ComplexGrid {
    fn sub_assign(&mut self, rhs: &ComplexGrid) {
        self.check_same_shape(rhs);
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a -= b;
        }
    }
}
