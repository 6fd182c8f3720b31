//! Linear operators with a shared apply/adjoint contract.
//!
//! These are the measurement maps and dictionaries that appear in the
//! demixing programs: the identity, dense matrices, the orthonormal DCT,
//! Haar-random rotations, row subsampling, and the lifting that turns a
//! linear convolution into a linear map on rank-one matrices.
//!
//! Matrix-shaped inputs are flattened column-major (see [`crate::shape`]).
//! Operators are immutable after construction; `apply`/`adjoint` can be
//! called concurrently.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use rand_chacha::ChaCha8Rng;

use crate::error::{DemixError, Result};
use crate::rng::{rng_from_seed, standard_normal_vector};

#[derive(Clone, Debug)]
pub enum LinearOp {
    Identity { len: usize },
    Dense { matrix: DMatrix<f64> },
    /// Orthonormal DCT-II transform: `apply` produces DCT coefficients.
    Dct { matrix: DMatrix<f64> },
    /// Haar-distributed orthogonal matrix, deterministic per seed.
    RandomRotation { matrix: DMatrix<f64>, seed: u64 },
    /// Keeps the listed coordinates (sorted, distinct); adjoint scatters
    /// back with zeros elsewhere.
    SubsampleRows { keep: Vec<usize>, input_len: usize },
    /// Linear-convolution lifting: maps an `m x d` matrix (flattened) to
    /// the length `m + d - 1` vector `z_k = sum_{i+j=k} X_ij`, so that a
    /// rank-one `x y^t` maps to the convolution `x * y`.
    ConvLift { rows: usize, cols: usize },
}

impl LinearOp {
    pub fn identity(len: usize) -> Self {
        LinearOp::Identity { len }
    }

    pub fn dense(matrix: DMatrix<f64>) -> Self {
        LinearOp::Dense { matrix }
    }

    /// Build a dense matrix operator from row-major data.
    pub fn dense_from_rows(rows: usize, cols: usize, data: &[f64]) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(DemixError::shape(
                format!("{} entries for a {rows}x{cols} matrix", rows * cols),
                format!("{}", data.len()),
            ));
        }
        Ok(LinearOp::Dense {
            matrix: DMatrix::from_row_slice(rows, cols, data),
        })
    }

    /// Orthonormal DCT-II:
    /// `D[k][n] = c_k * sqrt(2/d) * cos(pi * (2n+1) * k / (2d))`,
    /// `c_0 = 1/sqrt(2)`, `c_k = 1` otherwise. `D` is orthogonal, so the
    /// adjoint is the inverse transform.
    pub fn dct(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(DemixError::InvalidArgument("dct dimension must be >= 1".into()));
        }
        let scale = (2.0 / d as f64).sqrt();
        let matrix = DMatrix::from_fn(d, d, |k, n| {
            let ck = if k == 0 { 1.0 / 2.0_f64.sqrt() } else { 1.0 };
            ck * scale * ((PI * (2 * n + 1) as f64 * k as f64) / (2.0 * d as f64)).cos()
        });
        Ok(LinearOp::Dct { matrix })
    }

    /// Haar-distributed random rotation, deterministic per seed: QR of an
    /// i.i.d. Gaussian matrix with the sign of the R diagonal folded into Q.
    pub fn random_rotation(d: usize, seed: u64) -> Result<Self> {
        if d == 0 {
            return Err(DemixError::InvalidArgument(
                "rotation dimension must be >= 1".into(),
            ));
        }
        let mut rng = rng_from_seed(seed);
        Ok(LinearOp::RandomRotation {
            matrix: haar_from_rng(d, &mut rng),
            seed,
        })
    }

    /// As [`LinearOp::random_rotation`] but drawing from a caller-owned
    /// stream; used when a rotation is one draw inside a larger trial.
    pub fn random_rotation_from_rng(d: usize, rng: &mut ChaCha8Rng) -> Result<Self> {
        if d == 0 {
            return Err(DemixError::InvalidArgument(
                "rotation dimension must be >= 1".into(),
            ));
        }
        Ok(LinearOp::RandomRotation {
            matrix: haar_from_rng(d, rng),
            seed: 0,
        })
    }

    pub fn subsample_rows(input_len: usize, keep: Vec<usize>) -> Result<Self> {
        if keep.is_empty() {
            return Err(DemixError::InvalidArgument("empty subsampling mask".into()));
        }
        for w in keep.windows(2) {
            if w[0] >= w[1] {
                return Err(DemixError::InvalidArgument(
                    "subsampling mask must be strictly increasing".into(),
                ));
            }
        }
        if *keep.last().expect("non-empty") >= input_len {
            return Err(DemixError::InvalidArgument(format!(
                "subsampling index {} out of range for input length {input_len}",
                keep.last().expect("non-empty")
            )));
        }
        Ok(LinearOp::SubsampleRows { keep, input_len })
    }

    pub fn conv_lift(rows: usize, cols: usize) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(DemixError::InvalidArgument(
                "convolution lifting needs positive dimensions".into(),
            ));
        }
        Ok(LinearOp::ConvLift { rows, cols })
    }

    pub fn input_len(&self) -> usize {
        match self {
            LinearOp::Identity { len } => *len,
            LinearOp::Dense { matrix } => matrix.ncols(),
            LinearOp::Dct { matrix } => matrix.ncols(),
            LinearOp::RandomRotation { matrix, .. } => matrix.ncols(),
            LinearOp::SubsampleRows { input_len, .. } => *input_len,
            LinearOp::ConvLift { rows, cols } => rows * cols,
        }
    }

    pub fn output_len(&self) -> usize {
        match self {
            LinearOp::Identity { len } => *len,
            LinearOp::Dense { matrix } => matrix.nrows(),
            LinearOp::Dct { matrix } => matrix.nrows(),
            LinearOp::RandomRotation { matrix, .. } => matrix.nrows(),
            LinearOp::SubsampleRows { keep, .. } => keep.len(),
            LinearOp::ConvLift { rows, cols } => rows + cols - 1,
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, LinearOp::Identity { .. })
    }

    /// True for kinds that are orthogonal by construction.
    pub fn is_orthogonal_kind(&self) -> bool {
        matches!(
            self,
            LinearOp::Identity { .. } | LinearOp::Dct { .. } | LinearOp::RandomRotation { .. }
        )
    }

    pub fn apply(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        if x.len() != self.input_len() {
            return Err(DemixError::shape(
                format!("input of length {}", self.input_len()),
                format!("length {}", x.len()),
            ));
        }
        Ok(match self {
            LinearOp::Identity { .. } => x.clone(),
            LinearOp::Dense { matrix }
            | LinearOp::Dct { matrix }
            | LinearOp::RandomRotation { matrix, .. } => matrix * x,
            LinearOp::SubsampleRows { keep, .. } => {
                DVector::from_fn(keep.len(), |i, _| x[keep[i]])
            }
            LinearOp::ConvLift { rows, cols } => {
                let mut out = DVector::zeros(rows + cols - 1);
                for j in 0..*cols {
                    for i in 0..*rows {
                        out[i + j] += x[j * rows + i];
                    }
                }
                out
            }
        })
    }

    pub fn adjoint(&self, y: &DVector<f64>) -> Result<DVector<f64>> {
        if y.len() != self.output_len() {
            return Err(DemixError::shape(
                format!("input of length {}", self.output_len()),
                format!("length {}", y.len()),
            ));
        }
        Ok(match self {
            LinearOp::Identity { .. } => y.clone(),
            LinearOp::Dense { matrix }
            | LinearOp::Dct { matrix }
            | LinearOp::RandomRotation { matrix, .. } => matrix.transpose() * y,
            LinearOp::SubsampleRows { keep, input_len } => {
                let mut out = DVector::zeros(*input_len);
                for (i, &k) in keep.iter().enumerate() {
                    out[k] = y[i];
                }
                out
            }
            LinearOp::ConvLift { rows, cols } => {
                let mut out = DVector::zeros(rows * cols);
                for j in 0..*cols {
                    for i in 0..*rows {
                        out[j * rows + i] = y[i + j];
                    }
                }
                out
            }
        })
    }

    /// Materialize the operator as a dense matrix (columns = images of the
    /// standard basis). Used by the exhaustive l0 oracle.
    pub fn to_dense(&self) -> Result<DMatrix<f64>> {
        let (m, n) = (self.output_len(), self.input_len());
        let mut out = DMatrix::zeros(m, n);
        let mut e = DVector::zeros(n);
        for j in 0..n {
            e[j] = 1.0;
            let col = self.apply(&e)?;
            out.set_column(j, &col);
            e[j] = 0.0;
        }
        Ok(out)
    }

    /// Operator norm (largest singular value). Cheap at desk scale; used
    /// to pick stable step sizes for the decomposition solver.
    pub fn operator_norm(&self) -> Result<f64> {
        match self {
            LinearOp::Identity { .. }
            | LinearOp::Dct { .. }
            | LinearOp::RandomRotation { .. } => Ok(1.0),
            LinearOp::SubsampleRows { .. } => Ok(1.0),
            LinearOp::ConvLift { rows, cols } => Ok(((*rows).min(*cols) as f64).sqrt()),
            LinearOp::Dense { matrix } => {
                let sv = crate::atoms::singular_values(matrix)?;
                Ok(sv.iter().fold(0.0_f64, |m, v| m.max(*v)))
            }
        }
    }

    /// Max-abs deviation of `A^t A` from the identity; only meaningful for
    /// square operators.
    pub fn orthogonality_defect(&self) -> Result<f64> {
        if self.input_len() != self.output_len() {
            return Err(DemixError::InvalidArgument(
                "orthogonality defect requires a square operator".into(),
            ));
        }
        let a = self.to_dense()?;
        let gram = a.transpose() * &a;
        let n = gram.nrows();
        let mut worst = 0.0_f64;
        for i in 0..n {
            for j in 0..n {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((gram[(i, j)] - target).abs());
            }
        }
        Ok(worst)
    }
}

fn haar_from_rng(d: usize, rng: &mut ChaCha8Rng) -> DMatrix<f64> {
    // Column-major fill keeps the draw order pinned.
    let mut a = DMatrix::zeros(d, d);
    for j in 0..d {
        let col = standard_normal_vector(rng, d);
        a.set_column(j, &col);
    }
    let qr = a.qr();
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..d {
        if r[(j, j)] < 0.0 {
            for i in 0..d {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::standard_normal_vector;

    #[test]
    fn identity_applies() {
        let op = LinearOp::identity(3);
        let x = DVector::from_column_slice(&[1.0, 2.0, 3.0]);
        assert_eq!(op.apply(&x).unwrap(), x);
        assert_eq!(op.adjoint(&x).unwrap(), x);
    }

    #[test]
    fn dct_of_constant_concentrates() {
        let op = LinearOp::dct(4).unwrap();
        let x = DVector::from_element(4, 1.0);
        let y = op.apply(&x).unwrap();
        assert!((y[0] - 2.0).abs() < 1e-12);
        for k in 1..4 {
            assert!(y[k].abs() < 1e-12);
        }
    }

    #[test]
    fn dct_maps_basis_to_basis() {
        // Applying the transform to its own synthesis atoms must give
        // standard basis vectors.
        let d = 8;
        let op = LinearOp::dct(d).unwrap();
        for k in 0..d {
            let mut coeff = DVector::zeros(d);
            coeff[k] = 1.0;
            let atom = op.adjoint(&coeff).unwrap();
            let back = op.apply(&atom).unwrap();
            for i in 0..d {
                let target = if i == k { 1.0 } else { 0.0 };
                assert!((back[i] - target).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn dense_picks_columns() {
        let m = DMatrix::from_row_slice(2, 3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]);
        let op = LinearOp::dense(m.clone());
        for j in 0..3 {
            let mut e = DVector::zeros(3);
            e[j] = 1.0;
            let col = op.apply(&e).unwrap();
            assert_eq!(col, m.column(j).clone_owned());
        }
    }

    #[test]
    fn rotation_is_orthogonal_and_deterministic() {
        let op = LinearOp::random_rotation(32, 99).unwrap();
        assert!(op.orthogonality_defect().unwrap() <= 1e-10);
        let op2 = LinearOp::random_rotation(32, 99).unwrap();
        match (&op, &op2) {
            (LinearOp::RandomRotation { matrix: a, .. }, LinearOp::RandomRotation { matrix: b, .. }) => {
                assert_eq!(a, b);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn rotation_dim_one_is_sign() {
        let op = LinearOp::random_rotation(1, 5).unwrap();
        let x = DVector::from_column_slice(&[1.0]);
        let y = op.apply(&x).unwrap();
        assert!((y[0].abs() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn rotation_rejects_zero_dim() {
        assert!(LinearOp::random_rotation(0, 1).is_err());
    }

    #[test]
    fn adjoint_pairing_holds() {
        let mut rng = rng_from_seed(4);
        let ops = vec![
            LinearOp::identity(6),
            LinearOp::dct(6).unwrap(),
            LinearOp::random_rotation(6, 1).unwrap(),
            LinearOp::dense(DMatrix::from_fn(4, 6, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0)),
            LinearOp::subsample_rows(6, vec![0, 2, 5]).unwrap(),
            LinearOp::conv_lift(2, 3).unwrap(),
        ];
        for op in &ops {
            for _ in 0..100 {
                let x = standard_normal_vector(&mut rng, op.input_len());
                let y = standard_normal_vector(&mut rng, op.output_len());
                let lhs = op.apply(&x).unwrap().dot(&y);
                let rhs = x.dot(&op.adjoint(&y).unwrap());
                assert!(
                    (lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs()),
                    "pairing violated: {lhs} vs {rhs}"
                );
            }
        }
    }

    #[test]
    fn subsample_roundtrip() {
        let op = LinearOp::subsample_rows(5, vec![1, 3]).unwrap();
        let x = DVector::from_column_slice(&[10.0, 11.0, 12.0, 13.0, 14.0]);
        let kept = op.apply(&x).unwrap();
        assert_eq!(kept, DVector::from_column_slice(&[11.0, 13.0]));
        let back = op.adjoint(&kept).unwrap();
        assert_eq!(back, DVector::from_column_slice(&[0.0, 11.0, 0.0, 13.0, 0.0]));
        // apply after adjoint is the identity on kept coordinates
        assert_eq!(op.apply(&back).unwrap(), kept);
    }

    #[test]
    fn conv_lift_of_outer_product_is_convolution() {
        let op = LinearOp::conv_lift(2, 2).unwrap();
        // x = [1,2], y = [3,4]: X = x y^t, column-major flat [3,6,4,8]
        let x_flat = DVector::from_column_slice(&[3.0, 6.0, 4.0, 8.0]);
        let z = op.apply(&x_flat).unwrap();
        assert_eq!(z, DVector::from_column_slice(&[3.0, 10.0, 8.0]));
    }

    #[test]
    fn conv_lift_basis_corner() {
        let op = LinearOp::conv_lift(3, 4).unwrap();
        let mut e = DVector::zeros(12);
        e[0] = 1.0; // X = e1 e1^t
        let z = op.apply(&e).unwrap();
        assert_eq!(z.len(), 6);
        assert_eq!(z[0], 1.0);
        assert!(z.iter().skip(1).all(|&v| v == 0.0));
    }

    #[test]
    fn operator_norm_of_conv_lift() {
        let op = LinearOp::conv_lift(3, 5).unwrap();
        // longest anti-diagonal has min(m, d) entries
        assert!((op.operator_norm().unwrap() - 3.0_f64.sqrt()).abs() < 1e-12);
        // cross-check against the dense spectral norm
        let dense = LinearOp::dense(op.to_dense().unwrap());
        assert!((dense.operator_norm().unwrap() - 3.0_f64.sqrt()).abs() < 1e-9);
    }

    #[test]
    fn shape_errors() {
        let op = LinearOp::dct(4).unwrap();
        let bad = DVector::zeros(5);
        assert!(matches!(op.apply(&bad), Err(DemixError::ShapeMismatch { .. })));
        assert!(matches!(op.adjoint(&bad), Err(DemixError::ShapeMismatch { .. })));
    }
}
