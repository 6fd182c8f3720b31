//! Texture inpainting by rank-sparsity decomposition:
//! `min ||X||_S1 + lambda * ||Y||_1 s.t. X + Y = Z0` pulls a low-rank
//! texture out from under sparse occlusions.

use nalgebra::DMatrix;

use crate::atoms::GaugeSpec;
use crate::error::{DemixError, Result};
use crate::operators::LinearOp;
use crate::rng::{mix_seed, rng_from_seed, sample_support};
use crate::shape::{flatten, reshape};
use crate::solvers::{admm_demix, Component, DemixProblem, SolveStatus, SolverOptions};

/// Synthetic test scene: a block checkerboard (rank two) with a sparse
/// corruption of fixed magnitude and random signs.
#[derive(Clone, Debug)]
pub struct TextureSpec {
    pub size: usize,
    pub block: usize,
    /// Fraction of entries corrupted.
    pub corruption_frac: f64,
    pub magnitude: f64,
    pub seed: u64,
}

impl Default for TextureSpec {
    fn default() -> Self {
        TextureSpec {
            size: 32,
            block: 4,
            corruption_frac: 0.05,
            magnitude: 3.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub enum TextureInput {
    Synthetic(TextureSpec),
    Image(DMatrix<f64>),
}

#[derive(Clone, Debug)]
pub struct TextureReport {
    pub observation: DMatrix<f64>,
    pub low_rank: DMatrix<f64>,
    pub sparse: DMatrix<f64>,
    /// Relative Frobenius errors against the planted parts (synthetic
    /// inputs only).
    pub low_rank_rel_err: Option<f64>,
    pub sparse_rel_err: Option<f64>,
    pub lambda: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

/// Alternating block checkerboard; rank two for any block size that tiles
/// the image.
pub fn checkerboard(size: usize, block: usize) -> DMatrix<f64> {
    assert!(block >= 1);
    DMatrix::from_fn(size, size, |i, j| {
        if ((i / block) + (j / block)) % 2 == 0 {
            1.0
        } else {
            0.0
        }
    })
}

fn synthesize(spec: &TextureSpec) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    if spec.size == 0 || spec.block == 0 || spec.size % (2 * spec.block) != 0 {
        return Err(DemixError::InvalidArgument(
            "size must be a positive multiple of twice the block size".into(),
        ));
    }
    if !(0.0..=1.0).contains(&spec.corruption_frac) {
        return Err(DemixError::InvalidArgument(
            "corruption fraction must lie in [0, 1]".into(),
        ));
    }
    let low_rank = checkerboard(spec.size, spec.block);
    let total = spec.size * spec.size;
    let corrupted = (spec.corruption_frac * total as f64).round() as usize;
    let mut rng = rng_from_seed(mix_seed(spec.seed, &[0x7e87]));
    let mut sparse = DMatrix::zeros(spec.size, spec.size);
    for &flat in &sample_support(&mut rng, total, corrupted) {
        use rand::Rng;
        let sign = if rng.gen::<bool>() { 1.0 } else { -1.0 };
        sparse[(flat % spec.size, flat / spec.size)] = sign * spec.magnitude;
    }
    let observation = &low_rank + &sparse;
    Ok((observation, low_rank, sparse))
}

/// Split an image into low-rank and sparse parts. The default
/// regularization weight is `1 / sqrt(max(rows, cols))`.
pub fn demo_texture(
    input: &TextureInput,
    lambda: Option<f64>,
    opts: &SolverOptions,
) -> Result<TextureReport> {
    let (observation, truth) = match input {
        TextureInput::Synthetic(spec) => {
            let (z, lo, sp) = synthesize(spec)?;
            (z, Some((lo, sp)))
        }
        TextureInput::Image(m) => {
            if m.nrows() > 512 || m.ncols() > 512 {
                return Err(DemixError::InvalidArgument(
                    "images beyond 512x512 are out of desk scale".into(),
                ));
            }
            if m.is_empty() {
                return Err(DemixError::InvalidArgument("empty image".into()));
            }
            (m.clone(), None)
        }
    };
    let (rows, cols) = (observation.nrows(), observation.ncols());
    let lambda = lambda.unwrap_or(1.0 / (rows.max(cols) as f64).sqrt());
    if !(lambda > 0.0) {
        return Err(DemixError::InvalidArgument(format!(
            "lambda must be positive, got {lambda}"
        )));
    }

    let n = rows * cols;
    let problem = DemixProblem::new(
        flatten(&observation),
        LinearOp::identity(n),
        vec![
            Component::new(GaugeSpec::schatten1(rows, cols), 1.0),
            Component::new(GaugeSpec::l1(n), lambda),
        ],
        None,
    )?;
    let result = admm_demix(&problem, opts)?;
    let low_rank = reshape(&result.components[0], rows, cols);
    let sparse = reshape(&result.components[1], rows, cols);

    let (low_rank_rel_err, sparse_rel_err) = match &truth {
        Some((lo, sp)) => {
            let lo_err = (&low_rank - lo).norm() / lo.norm().max(f64::MIN_POSITIVE);
            let sp_norm = sp.norm();
            let sp_err = if sp_norm > 0.0 {
                (&sparse - sp).norm() / sp_norm
            } else {
                sparse.norm()
            };
            (Some(lo_err), Some(sp_err))
        }
        None => (None, None),
    };

    Ok(TextureReport {
        observation,
        low_rank,
        sparse,
        low_rank_rel_err,
        sparse_rel_err,
        lambda,
        status: result.status,
        iterations: result.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tight_opts() -> SolverOptions {
        SolverOptions::default()
            .with_tols(1e-10, 1e-10)
            .with_max_iter(5000)
    }

    #[test]
    fn checkerboard_is_rank_two() {
        let board = checkerboard(32, 4);
        let sv = board.svd(false, false).singular_values;
        let above: usize = sv.iter().filter(|&&s| s > 1e-9).count();
        assert_eq!(above, 2);
    }

    #[test]
    fn corrupted_checkerboard_separates() {
        let input = TextureInput::Synthetic(TextureSpec::default());
        let report = demo_texture(&input, None, &tight_opts()).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        assert!((report.lambda - 1.0 / 32f64.sqrt()).abs() < 1e-12);
        assert!(report.low_rank_rel_err.unwrap() <= 1e-3);
        assert!(report.sparse_rel_err.unwrap() <= 1e-3);
    }

    #[test]
    fn zero_corruption_keeps_sparse_part_empty() {
        let spec = TextureSpec {
            corruption_frac: 0.0,
            ..TextureSpec::default()
        };
        let board = checkerboard(spec.size, spec.block);
        let report =
            demo_texture(&TextureInput::Synthetic(spec), None, &tight_opts()).unwrap();
        assert!(report.sparse.norm() <= 1e-6, "sparse norm {}", report.sparse.norm());
        assert!((report.low_rank - board).norm() <= 1e-6);
    }

    #[test]
    fn zero_image_gives_zero_parts() {
        let input = TextureInput::Image(DMatrix::zeros(8, 8));
        let report = demo_texture(&input, None, &tight_opts()).unwrap();
        assert_eq!(report.low_rank.norm(), 0.0);
        assert_eq!(report.sparse.norm(), 0.0);
    }

    #[test]
    fn misaligned_block_size_is_refused() {
        let spec = TextureSpec {
            size: 30,
            block: 4,
            ..TextureSpec::default()
        };
        assert!(demo_texture(&TextureInput::Synthetic(spec), None, &tight_opts()).is_err());
    }
}
