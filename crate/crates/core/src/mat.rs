//! Dense row-major AP x UE matrix.

use serde::{Deserialize, Serialize};
use std::ops::{Index, IndexMut};

/// Row-major `rows x cols` matrix; row `m` holds the per-UE entries of AP `m`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mat {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Mat {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self::filled(rows, cols, 0.0)
    }

    pub fn filled(rows: usize, cols: usize, value: f64) -> Self {
        Mat {
            rows,
            cols,
            data: vec![value; rows * cols],
        }
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for m in 0..rows {
            for k in 0..cols {
                data.push(f(m, k));
            }
        }
        Mat { rows, cols, data }
    }

    /// Builds from nested rows. Panics on ragged input.
    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        let cols = rows.first().map_or(0, Vec::len);
        assert!(rows.iter().all(|r| r.len() == cols), "ragged rows");
        Mat {
            rows: rows.len(),
            cols,
            data: rows.iter().flatten().copied().collect(),
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, m: usize) -> &[f64] {
        &self.data[m * self.cols..(m + 1) * self.cols]
    }

    pub fn row_mut(&mut self, m: usize) -> &mut [f64] {
        &mut self.data[m * self.cols..(m + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Mat {
        Mat {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| f(x)).collect(),
        }
    }

    pub fn col_sum(&self, k: usize) -> f64 {
        (0..self.rows).map(|m| self[(m, k)]).sum()
    }

    pub fn row_sum(&self, m: usize) -> f64 {
        self.row(m).iter().sum()
    }

    pub fn norm_sq(&self) -> f64 {
        self.data.iter().map(|x| x * x).sum()
    }

    pub fn max_abs_diff(&self, other: &Mat) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.is_finite())
    }
}

impl Index<(usize, usize)> for Mat {
    type Output = f64;

    #[inline]
    fn index(&self, (m, k): (usize, usize)) -> &f64 {
        debug_assert!(m < self.rows && k < self.cols);
        &self.data[m * self.cols + k]
    }
}

impl IndexMut<(usize, usize)> for Mat {
    #[inline]
    fn index_mut(&mut self, (m, k): (usize, usize)) -> &mut f64 {
        debug_assert!(m < self.rows && k < self.cols);
        &mut self.data[m * self.cols + k]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn row_major_layout() {
        let a = Mat::from_rows(&[vec![1.0, 2.0, 3.0], vec![4.0, 5.0, 6.0]]);
        assert_eq!(a.row(1), &[4.0, 5.0, 6.0]);
        assert_eq!(a[(0, 2)], 3.0);
        assert_eq!(a.col_sum(1), 7.0);
        assert_eq!(a.row_sum(0), 6.0);
    }

    #[test]
    fn from_fn_matches_index() {
        let a = Mat::from_fn(3, 4, |m, k| (10 * m + k) as f64);
        for m in 0..3 {
            for k in 0..4 {
                assert_eq!(a[(m, k)], (10 * m + k) as f64);
            }
        }
    }
}
