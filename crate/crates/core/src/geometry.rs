//! Statistical dimension of convex cones.
//!
//! The statistical dimension `delta(C) = E ||Proj_C(g)||^2` (g standard
//! Gaussian) measures a cone's effective degrees of freedom. It governs a
//! sharp phase transition: demixing two incoherently oriented components
//! can succeed precisely when the normalized total statistical dimension
//! of their descent cones stays below one.
//!
//! For the l1 descent cone the projection norm is computed in closed form:
//! the polar of the descent cone at a point with sign pattern `s` is the
//! cone over the l1 subdifferential, and by Moreau's decomposition
//! `||Proj_C(g)||^2 = dist^2(g, C_polar)`, a one-dimensional convex
//! piecewise-quadratic minimization solved exactly by breakpoint
//! enumeration ([`polar_distance_l1`]).

use rayon::prelude::*;

use nalgebra::DVector;

use crate::error::{DemixError, Result};
use crate::rng::{mix_seed, rng_from_seed, standard_normal_vector};

/// Cones with known projection norms.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum ConeModel {
    /// A k-dimensional linear subspace of R^d (coordinates 0..k by
    /// rotational invariance).
    Subspace { dim: usize, ambient: usize },
    /// The nonnegative orthant of R^d.
    Orthant { ambient: usize },
    /// Descent cone of the l1 norm at a point with the given sign pattern
    /// (entries in {-1, 0, +1}; nonzeros mark the support).
    DescentL1 { ambient: usize, signs: Vec<i8> },
}

impl ConeModel {
    pub fn subspace(dim: usize, ambient: usize) -> Result<Self> {
        if dim > ambient {
            return Err(DemixError::InvalidArgument(format!(
                "subspace dimension {dim} exceeds ambient {ambient}"
            )));
        }
        Ok(ConeModel::Subspace { dim, ambient })
    }

    pub fn orthant(ambient: usize) -> Self {
        ConeModel::Orthant { ambient }
    }

    pub fn descent_l1(signs: Vec<i8>) -> Result<Self> {
        if signs.iter().any(|&s| s < -1 || s > 1) {
            return Err(DemixError::InvalidArgument(
                "sign pattern entries must be -1, 0, or +1".into(),
            ));
        }
        Ok(ConeModel::DescentL1 {
            ambient: signs.len(),
            signs,
        })
    }

    /// Canonical s-sparse pattern: +1 on the first `s` coordinates. The
    /// statistical dimension depends only on the support size, so this
    /// stands in for any s-sparse sign pattern.
    pub fn descent_l1_sparse(ambient: usize, s: usize) -> Result<Self> {
        if s > ambient {
            return Err(DemixError::InvalidArgument(format!(
                "sparsity {s} exceeds ambient {ambient}"
            )));
        }
        let mut signs = vec![0i8; ambient];
        for sign in signs.iter_mut().take(s) {
            *sign = 1;
        }
        Self::descent_l1(signs)
    }

    pub fn ambient(&self) -> usize {
        match self {
            ConeModel::Subspace { ambient, .. }
            | ConeModel::Orthant { ambient }
            | ConeModel::DescentL1 { ambient, .. } => *ambient,
        }
    }

    /// Squared norm of the projection of `g` onto the cone.
    pub fn projection_norm_sq(&self, g: &DVector<f64>) -> f64 {
        match self {
            ConeModel::Subspace { dim, .. } => g.iter().take(*dim).map(|v| v * v).sum(),
            ConeModel::Orthant { .. } => g.iter().map(|v| v.max(0.0).powi(2)).sum(),
            ConeModel::DescentL1 { signs, .. } => polar_distance_l1(g, signs),
        }
    }
}

impl std::fmt::Display for ConeModel {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConeModel::Subspace { dim, ambient } => write!(f, "subspace(k={dim},d={ambient})"),
            ConeModel::Orthant { ambient } => write!(f, "orthant(d={ambient})"),
            ConeModel::DescentL1 { ambient, signs } => {
                let s = signs.iter().filter(|&&v| v != 0).count();
                write!(f, "descent-l1(d={ambient},s={s})")
            }
        }
    }
}

/// Squared distance from `g` to the polar of the l1 descent cone with the
/// given sign pattern; by Moreau's decomposition this equals the squared
/// norm of the projection of `g` onto the descent cone itself.
///
/// The polar cone is `{t * u : t >= 0, u_i = s_i on the support,
/// |u_i| <= 1 off it}`, so the squared distance is
///
/// ```text
/// min_{t >= 0}  sum_{i in supp} (g_i - t s_i)^2
///             + sum_{i not in supp} max(|g_i| - t, 0)^2
/// ```
///
/// a convex piecewise quadratic in `t` minimized exactly: pieces break at
/// the off-support magnitudes, and each piece's vertex is rational in
/// prefix sums.
pub fn polar_distance_l1(g: &DVector<f64>, signs: &[i8]) -> f64 {
    assert_eq!(g.len(), signs.len(), "sign pattern length mismatch");

    let mut support_count = 0usize;
    let mut support_dot = 0.0; // sum over support of g_i * s_i
    let mut support_sq = 0.0;
    let mut off: Vec<f64> = Vec::new();
    for (i, &s) in signs.iter().enumerate() {
        if s != 0 {
            support_count += 1;
            support_dot += g[i] * f64::from(s);
            support_sq += g[i] * g[i];
        } else {
            off.push(g[i].abs());
        }
    }
    off.sort_unstable_by(|a, b| a.partial_cmp(b).expect("finite magnitudes"));
    let m = off.len();

    // suffix sums over the sorted off-support magnitudes
    let mut suffix_sum = vec![0.0; m + 1];
    let mut suffix_sq = vec![0.0; m + 1];
    for i in (0..m).rev() {
        suffix_sum[i] = suffix_sum[i + 1] + off[i];
        suffix_sq[i] = suffix_sq[i + 1] + off[i] * off[i];
    }

    let mut best = f64::INFINITY;
    // Interval k: t in [off[k-1], off[k]] (0 and +inf at the ends); terms
    // with magnitude above t are active.
    for k in 0..=m {
        let lo = if k == 0 { 0.0 } else { off[k - 1] };
        let hi = if k == m { f64::INFINITY } else { off[k] };
        let a = support_count as f64 + (m - k) as f64;
        let b = support_dot + suffix_sum[k];
        let c = support_sq + suffix_sq[k];
        let t = if a > 0.0 {
            (b / a).clamp(lo.max(0.0), hi)
        } else {
            lo
        };
        let value = if a > 0.0 { a * t * t - 2.0 * b * t + c } else { c };
        if value < best {
            best = value;
        }
    }
    best.max(0.0)
}

/// Monte Carlo estimate of a statistical dimension.
#[derive(Clone, Copy, Debug)]
pub struct SdimEstimate {
    pub mean: f64,
    /// Sample standard deviation divided by sqrt(samples).
    pub stderr: f64,
    pub samples: usize,
}

/// Samples are drawn in fixed-size blocks seeded as `mix(seed, block)`, so
/// the estimate is identical no matter how many threads process blocks.
const SDIM_BLOCK: usize = 256;

/// Estimate `delta(C) = E ||Proj_C(g)||^2` with `samples` Gaussian draws.
/// Deterministic per seed and independent of thread count.
pub fn sdim_monte_carlo(cone: &ConeModel, samples: usize, seed: u64) -> Result<SdimEstimate> {
    if samples < 100 {
        return Err(DemixError::InvalidArgument(format!(
            "need at least 100 samples, got {samples}"
        )));
    }
    let d = cone.ambient();
    let blocks: Vec<(usize, usize)> = (0..samples.div_ceil(SDIM_BLOCK))
        .map(|b| (b, SDIM_BLOCK.min(samples - b * SDIM_BLOCK)))
        .collect();

    // (count, mean, sum of squared deviations) per block, combined in
    // block order afterwards.
    let partials: Vec<(usize, f64, f64)> = blocks
        .par_iter()
        .map(|&(block, count)| {
            let mut rng = rng_from_seed(mix_seed(seed, &[0x5d13, block as u64]));
            let mut mean = 0.0;
            let mut m2 = 0.0;
            for i in 0..count {
                let g = standard_normal_vector(&mut rng, d);
                let value = cone.projection_norm_sq(&g);
                let delta = value - mean;
                mean += delta / (i + 1) as f64;
                m2 += delta * (value - mean);
            }
            (count, mean, m2)
        })
        .collect();

    let mut count = 0usize;
    let mut mean = 0.0;
    let mut m2 = 0.0;
    for (c, bm, bm2) in partials {
        if c == 0 {
            continue;
        }
        let total = count + c;
        let delta = bm - mean;
        mean += delta * c as f64 / total as f64;
        m2 += bm2 + delta * delta * (count as f64 * c as f64) / total as f64;
        count = total;
    }
    let variance = if count > 1 { m2 / (count - 1) as f64 } else { 0.0 };
    Ok(SdimEstimate {
        mean,
        stderr: (variance / count as f64).sqrt(),
        samples: count,
    })
}

/// Normalized total statistical dimension: `(sum of deltas) / d`.
pub fn total_delta(d: usize, deltas: &[f64]) -> f64 {
    assert!(d >= 1, "ambient dimension must be positive");
    deltas.iter().sum::<f64>() / d as f64
}

/// As [`total_delta`] but estimating each cone's contribution by Monte
/// Carlo; errors if any cone lives in a different ambient dimension.
pub fn total_delta_mc(d: usize, cones: &[ConeModel], samples: usize, seed: u64) -> Result<f64> {
    let mut deltas = Vec::with_capacity(cones.len());
    for (i, cone) in cones.iter().enumerate() {
        if cone.ambient() != d {
            return Err(DemixError::InvalidArgument(format!(
                "cone {i} has ambient dimension {}, expected {d}",
                cone.ambient()
            )));
        }
        deltas.push(sdim_monte_carlo(cone, samples, mix_seed(seed, &[i as u64]))?.mean);
    }
    Ok(total_delta(d, &deltas))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SuccessPrediction {
    LikelySuccess,
    LikelyFailure,
    Indeterminate,
}

/// Classify a normalized total statistical dimension against the phase
/// transition at `delta = 1` with transition band `margin_constant / sqrt(d)`.
///
/// The band constant is caller-supplied (default 1 in the experiment
/// drivers); it controls reporting only and never gates solver behavior.
pub fn predict_success(delta: f64, d: usize, margin_constant: f64) -> SuccessPrediction {
    assert!(d >= 1 && margin_constant > 0.0);
    let band = margin_constant / (d as f64).sqrt();
    if delta <= 1.0 - band {
        SuccessPrediction::LikelySuccess
    } else if delta >= 1.0 + band {
        SuccessPrediction::LikelyFailure
    } else {
        SuccessPrediction::Indeterminate
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn polar_distance_vanishes_on_polar_ray() {
        // g proportional to the sign pattern on the support, zero off it,
        // lies inside the polar cone.
        let signs = vec![1i8, -1, 0, 0];
        let g = DVector::from_column_slice(&[2.0, -2.0, 0.0, 0.0]);
        assert!(polar_distance_l1(&g, &signs) <= 1e-14);
    }

    #[test]
    fn polar_distance_dense_pattern_closed_form() {
        // No off-support terms: distance to the single ray {t*s : t >= 0}
        // is ||g||^2 - ((<g,s>)_+)^2 / d.
        let signs = vec![1i8, 1, -1, 1];
        let g = DVector::from_column_slice(&[0.3, -1.2, 0.7, 2.0]);
        let dot: f64 = g[0] + g[1] - g[2] + g[3];
        let expect = g.norm_squared() - dot.max(0.0).powi(2) / 4.0;
        assert!((polar_distance_l1(&g, &signs) - expect).abs() <= 1e-12);

        // negative correlation clamps t to zero
        let g2 = DVector::from_column_slice(&[-1.0, -1.0, 1.0, -1.0]);
        assert!((polar_distance_l1(&g2, &signs) - g2.norm_squared()).abs() <= 1e-12);
    }

    #[test]
    fn subspace_estimate_matches_dimension() {
        let cone = ConeModel::subspace(16, 64).unwrap();
        let est = sdim_monte_carlo(&cone, 20_000, 7).unwrap();
        assert!(
            (est.mean - 16.0).abs() <= 3.0 * est.stderr,
            "subspace estimate {} +/- {}",
            est.mean,
            est.stderr
        );
    }

    #[test]
    fn orthant_estimate_matches_half_dimension() {
        let cone = ConeModel::orthant(64);
        let est = sdim_monte_carlo(&cone, 20_000, 7).unwrap();
        assert!(
            (est.mean - 32.0).abs() <= 3.0 * est.stderr,
            "orthant estimate {} +/- {}",
            est.mean,
            est.stderr
        );
    }

    #[test]
    fn estimates_are_thread_count_independent() {
        let cone = ConeModel::descent_l1_sparse(32, 4).unwrap();
        let serial = rayon::ThreadPoolBuilder::new()
            .num_threads(1)
            .build()
            .unwrap()
            .install(|| sdim_monte_carlo(&cone, 5_000, 3).unwrap());
        let parallel = sdim_monte_carlo(&cone, 5_000, 3).unwrap();
        assert_eq!(serial.mean.to_bits(), parallel.mean.to_bits());
        assert_eq!(serial.stderr.to_bits(), parallel.stderr.to_bits());
    }

    #[test]
    fn descent_cone_monotone_in_sparsity() {
        let d = 64;
        let mut last = 0.0;
        for s in [1usize, 8, 16, 32, 64] {
            let cone = ConeModel::descent_l1_sparse(d, s).unwrap();
            let est = sdim_monte_carlo(&cone, 20_000, 13).unwrap();
            assert!(
                est.mean + 3.0 * est.stderr >= last,
                "delta should grow with sparsity: {} after {last}",
                est.mean
            );
            last = est.mean;
        }
    }

    #[test]
    fn descent_cone_extremes() {
        let d = 64;
        // fully dense pattern: the cone is a halfspace, delta = d - 1/2
        let dense = ConeModel::descent_l1_sparse(d, d).unwrap();
        let est = sdim_monte_carlo(&dense, 20_000, 5).unwrap();
        assert!((est.mean - (d as f64 - 0.5)).abs() <= 3.0 * est.stderr);
        assert!(est.mean <= d as f64 - 3.0 * est.stderr);
        // 1-sparse pattern: small but nonnegative
        let sparse = ConeModel::descent_l1_sparse(d, 1).unwrap();
        let est = sdim_monte_carlo(&sparse, 20_000, 5).unwrap();
        assert!(est.mean >= 0.0 && est.mean < d as f64 / 2.0);
        // subspace extremes are exact
        let zero = ConeModel::subspace(0, 16).unwrap();
        assert_eq!(sdim_monte_carlo(&zero, 1000, 1).unwrap().mean, 0.0);
        let full = ConeModel::subspace(16, 16).unwrap();
        let est = sdim_monte_carlo(&full, 5000, 1).unwrap();
        assert!((est.mean - 16.0).abs() <= 3.0 * est.stderr);
    }

    #[test]
    fn estimate_bounds_hold() {
        let cone = ConeModel::descent_l1_sparse(32, 5).unwrap();
        let est = sdim_monte_carlo(&cone, 2_000, 9).unwrap();
        assert!(est.mean >= 0.0);
        assert!(est.mean <= 32.0 + 3.0 * est.stderr);
        assert_eq!(est.samples, 2_000);
    }

    #[test]
    fn total_delta_arithmetic() {
        assert_eq!(total_delta(64, &[32.0, 32.0]), 1.0);
        assert_eq!(total_delta(64, &[0.0, 0.0]), 0.0);
        // symmetric in argument order
        assert_eq!(total_delta(10, &[3.0, 7.0]), total_delta(10, &[7.0, 3.0]));
    }

    #[test]
    fn total_delta_mc_checks_dimensions() {
        let cones = vec![
            ConeModel::orthant(8),
            ConeModel::subspace(2, 9).unwrap(),
        ];
        assert!(total_delta_mc(8, &cones, 500, 1).is_err());
    }

    #[test]
    fn prediction_thresholds() {
        assert_eq!(
            predict_success(0.5, 100, 1.0),
            SuccessPrediction::LikelySuccess
        );
        assert_eq!(
            predict_success(1.5, 100, 1.0),
            SuccessPrediction::LikelyFailure
        );
        assert_eq!(
            predict_success(1.0, 100, 1.0),
            SuccessPrediction::Indeterminate
        );
        assert_eq!(
            predict_success(1.0, 10_000, 1.0),
            SuccessPrediction::Indeterminate
        );
    }

    #[test]
    fn samples_precondition() {
        let cone = ConeModel::orthant(4);
        assert!(sdim_monte_carlo(&cone, 99, 0).is_err());
    }
}
