//! Signal shapes and flat-vector storage.
//!
//! Solvers work on flat `DVector<f64>` buffers regardless of whether a
//! component is logically a vector or a matrix; matrix signals are stored
//! column-major so reshaping is a copy-free convention, not a transform.

use nalgebra::{DMatrix, DVector};
use std::fmt;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Shape {
    Vector(usize),
    Matrix(usize, usize),
}

impl Shape {
    pub fn flat_len(&self) -> usize {
        match *self {
            Shape::Vector(d) => d,
            Shape::Matrix(m, n) => m * n,
        }
    }

    pub fn is_matrix(&self) -> bool {
        matches!(*self, Shape::Matrix(..))
    }

    pub fn is_square(&self) -> bool {
        matches!(*self, Shape::Matrix(m, n) if m == n)
    }
}

impl fmt::Display for Shape {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Shape::Vector(d) => write!(f, "vector({d})"),
            Shape::Matrix(m, n) => write!(f, "matrix({m}x{n})"),
        }
    }
}

/// View a flat column-major buffer as an `rows x cols` matrix.
pub fn reshape(flat: &DVector<f64>, rows: usize, cols: usize) -> DMatrix<f64> {
    debug_assert_eq!(flat.len(), rows * cols);
    DMatrix::from_column_slice(rows, cols, flat.as_slice())
}

/// Flatten a matrix column-major.
pub fn flatten(m: &DMatrix<f64>) -> DVector<f64> {
    DVector::from_column_slice(m.as_slice())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reshape_roundtrip() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let flat = flatten(&m);
        assert_eq!(flat.len(), 6);
        // column-major: first column first
        assert_eq!(flat[0], 1.0);
        assert_eq!(flat[1], 4.0);
        let back = reshape(&flat, 2, 3);
        assert_eq!(back, m);
    }

    #[test]
    fn flat_len() {
        assert_eq!(Shape::Vector(7).flat_len(), 7);
        assert_eq!(Shape::Matrix(3, 5).flat_len(), 15);
        assert!(Shape::Matrix(4, 4).is_square());
        assert!(!Shape::Matrix(3, 5).is_square());
    }
}
