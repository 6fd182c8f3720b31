//! Empirical phase diagram for demixing two sparse vectors that are
//! incoherently oriented by a random rotation.
//!
//! For each sparsity pair `(s_x, s_y)` the driver plants `x0` (s_x-sparse)
//! and `y0 = Q^t c` (c s_y-sparse, Q a fresh Haar rotation), observes
//! `z0 = x0 + y0`, and attempts recovery with
//! `min ||x||_1 + lambda * ||Q y||_1 s.t. x + y = z0` over a grid of
//! regularization weights; a trial succeeds if any weight recovers `x0` to
//! the requested relative accuracy (success in the existential sense the
//! transition theory uses). Each cell also carries the normalized total
//! statistical dimension of the two planted descent cones, so empirical
//! rates can be read against the predicted transition at one.

use rayon::prelude::*;

use nalgebra::DVector;

use crate::atoms::GaugeSpec;
use crate::contour::contour_polylines;
use crate::error::{DemixError, Result};
use crate::geometry::{sdim_monte_carlo, ConeModel};
use crate::io::csv::PhaseRow;
use crate::operators::LinearOp;
use crate::rng::{mix_seed, rng_from_seed, sample_support};
use crate::solvers::{admm_demix, Component, DemixProblem, SolveStatus, SolverOptions};

#[derive(Clone, Debug)]
pub struct PhaseGridSpec {
    pub d: usize,
    /// Cells to evaluate, as explicit `(s_x, s_y)` pairs.
    pub sparsity_grid: Vec<(usize, usize)>,
    pub trials_per_cell: usize,
    /// Regularization weights swept per trial; success means any of them
    /// recovers the planted pair.
    pub lambda_grid: Vec<f64>,
    /// Relative l2 recovery threshold.
    pub success_tol: f64,
    pub seed: u64,
    pub solver: SolverOptions,
    /// Monte Carlo samples behind each cell's statistical dimension.
    pub delta_samples: usize,
}

impl PhaseGridSpec {
    /// Nine logarithmically spaced weights from 1e-2 to 1e2.
    pub fn default_lambda_grid() -> Vec<f64> {
        (0..9).map(|k| 10f64.powf(-2.0 + 0.5 * k as f64)).collect()
    }

    /// A full product grid over one axis of sparsity values.
    pub fn square(d: usize, axis: &[usize], trials_per_cell: usize, seed: u64) -> Self {
        let sparsity_grid = axis
            .iter()
            .flat_map(|&sx| axis.iter().map(move |&sy| (sx, sy)))
            .collect();
        PhaseGridSpec {
            d,
            sparsity_grid,
            trials_per_cell,
            lambda_grid: Self::default_lambda_grid(),
            success_tol: 1e-3,
            seed,
            solver: SolverOptions::default()
                .with_tols(1e-9, 1e-9)
                .with_max_iter(1500),
            delta_samples: 20_000,
        }
    }

    /// Desk-scale diagram: d = 64 on a 17x17 sparsity grid with 25 trials
    /// per cell and the default weight sweep.
    pub fn desk_default(seed: u64) -> Self {
        let d = 64usize;
        let steps = 17usize;
        let axis: Vec<usize> = (0..steps)
            .map(|j| 1 + ((j as f64) * (d as f64 - 1.0) / (steps as f64 - 1.0)).round() as usize)
            .collect();
        Self::square(d, &axis, 25, seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.d == 0 {
            return Err(DemixError::InvalidArgument("d must be positive".into()));
        }
        for &(sx, sy) in &self.sparsity_grid {
            if sx < 1 || sx > self.d || sy < 1 || sy > self.d {
                return Err(DemixError::InvalidArgument(format!(
                    "sparsity pair ({sx},{sy}) must lie in 1..={}",
                    self.d
                )));
            }
        }
        if self.sparsity_grid.is_empty() {
            return Err(DemixError::InvalidArgument("empty sparsity grid".into()));
        }
        if self.trials_per_cell < 1 {
            return Err(DemixError::InvalidArgument("trials must be >= 1".into()));
        }
        if !(self.success_tol > 0.0) {
            return Err(DemixError::InvalidArgument(
                "success tolerance must be positive".into(),
            ));
        }
        if self.lambda_grid.is_empty() || self.lambda_grid.iter().any(|&l| !(l > 0.0)) {
            return Err(DemixError::InvalidArgument(
                "lambda grid must be non-empty and positive".into(),
            ));
        }
        self.solver.validate()
    }
}

#[derive(Clone, Debug)]
pub struct PhaseCell {
    pub s_x: usize,
    pub s_y: usize,
    pub success_rate: f64,
    /// Normalized total statistical dimension of the two descent cones.
    pub delta: f64,
    /// Trials whose every solve ended in divergence (counted as failures).
    pub diverged_trials: usize,
}

#[derive(Clone, Debug)]
pub struct ContourSet {
    pub level: f64,
    /// Polylines in `(s_x, s_y)` coordinates.
    pub polylines: Vec<Vec<(f64, f64)>>,
}

#[derive(Clone, Debug)]
pub struct PhaseGridResult {
    pub d: usize,
    pub s_x_axis: Vec<usize>,
    pub s_y_axis: Vec<usize>,
    /// Cells in the spec's order.
    pub cells: Vec<PhaseCell>,
    /// Empirical success-rate contours at 5%, 50%, and 95% (present only
    /// when the cells form a full product grid).
    pub contours: Vec<ContourSet>,
}

impl PhaseGridResult {
    fn index(&self, ix: usize, iy: usize) -> usize {
        // product grids are laid out s_x-major
        ix * self.s_y_axis.len() + iy
    }

    pub fn rate_at(&self, ix: usize, iy: usize) -> f64 {
        self.cells[self.index(ix, iy)].success_rate
    }

    pub fn delta_at(&self, ix: usize, iy: usize) -> f64 {
        self.cells[self.index(ix, iy)].delta
    }

    /// Assemble a result from parallel arrays (s_x-major product order);
    /// used by rendering tests.
    pub fn from_parts(
        s_x_axis: Vec<usize>,
        s_y_axis: Vec<usize>,
        rates: Vec<f64>,
        deltas: Vec<f64>,
        diverged: Vec<usize>,
    ) -> Self {
        let mut cells = Vec::with_capacity(rates.len());
        for (ix, &sx) in s_x_axis.iter().enumerate() {
            for (iy, &sy) in s_y_axis.iter().enumerate() {
                let k = ix * s_y_axis.len() + iy;
                cells.push(PhaseCell {
                    s_x: sx,
                    s_y: sy,
                    success_rate: rates[k],
                    delta: deltas[k],
                    diverged_trials: diverged[k],
                });
            }
        }
        let d = *s_x_axis.iter().max().unwrap_or(&1);
        let mut out = PhaseGridResult {
            d,
            s_x_axis,
            s_y_axis,
            cells,
            contours: Vec::new(),
        };
        out.contours = out.compute_contours();
        out
    }

    fn compute_contours(&self) -> Vec<ContourSet> {
        let xs: Vec<f64> = self.s_x_axis.iter().map(|&v| v as f64).collect();
        let ys: Vec<f64> = self.s_y_axis.iter().map(|&v| v as f64).collect();
        [0.05, 0.5, 0.95]
            .iter()
            .map(|&level| ContourSet {
                level,
                polylines: contour_polylines(
                    &xs,
                    &ys,
                    &|ix, iy| self.rate_at(ix, iy),
                    level,
                ),
            })
            .collect()
    }

    pub fn csv_rows(&self) -> Vec<PhaseRow> {
        self.cells
            .iter()
            .map(|c| PhaseRow {
                s_x: c.s_x,
                s_y: c.s_y,
                success_rate: c.success_rate,
                delta: c.delta,
            })
            .collect()
    }
}

/// Run the phase diagram. Cells are independent work items scheduled over
/// the current thread pool; per-cell trial seeds are
/// `mix(seed, s_x, s_y, trial)`, so the result is bit-identical at any
/// thread count.
pub fn run_phase_diagram(spec: &PhaseGridSpec) -> Result<PhaseGridResult> {
    spec.validate()?;
    let d = spec.d;

    // one statistical-dimension estimate per distinct sparsity level
    let mut levels: Vec<usize> = spec
        .sparsity_grid
        .iter()
        .flat_map(|&(sx, sy)| [sx, sy])
        .collect();
    levels.sort_unstable();
    levels.dedup();
    let mut delta_of: std::collections::BTreeMap<usize, f64> = Default::default();
    for &s in &levels {
        let cone = ConeModel::descent_l1_sparse(d, s)?;
        let est = sdim_monte_carlo(&cone, spec.delta_samples, mix_seed(spec.seed, &[0xde17a, s as u64]))?;
        delta_of.insert(s, est.mean);
    }

    let cells: Vec<PhaseCell> = spec
        .sparsity_grid
        .par_iter()
        .map(|&(sx, sy)| -> Result<PhaseCell> {
            let mut successes = 0usize;
            let mut diverged = 0usize;
            for trial in 0..spec.trials_per_cell {
                match run_trial(spec, sx, sy, trial)? {
                    TrialOutcome::Success => successes += 1,
                    TrialOutcome::Failure => {}
                    TrialOutcome::AllDiverged => diverged += 1,
                }
            }
            Ok(PhaseCell {
                s_x: sx,
                s_y: sy,
                success_rate: successes as f64 / spec.trials_per_cell as f64,
                delta: (delta_of[&sx] + delta_of[&sy]) / d as f64,
                diverged_trials: diverged,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let mut s_x_axis: Vec<usize> = spec.sparsity_grid.iter().map(|&(sx, _)| sx).collect();
    s_x_axis.sort_unstable();
    s_x_axis.dedup();
    let mut s_y_axis: Vec<usize> = spec.sparsity_grid.iter().map(|&(_, sy)| sy).collect();
    s_y_axis.sort_unstable();
    s_y_axis.dedup();

    let is_product_grid = spec.sparsity_grid.len() == s_x_axis.len() * s_y_axis.len()
        && spec
            .sparsity_grid
            .iter()
            .enumerate()
            .all(|(k, &(sx, sy))| {
                sx == s_x_axis[k / s_y_axis.len()] && sy == s_y_axis[k % s_y_axis.len()]
            });

    let mut result = PhaseGridResult {
        d,
        s_x_axis,
        s_y_axis,
        cells,
        contours: Vec::new(),
    };
    if is_product_grid {
        result.contours = result.compute_contours();
    }
    Ok(result)
}

enum TrialOutcome {
    Success,
    Failure,
    /// every weight in the sweep diverged
    AllDiverged,
}

fn run_trial(spec: &PhaseGridSpec, sx: usize, sy: usize, trial: usize) -> Result<TrialOutcome> {
    let d = spec.d;
    let mut rng = rng_from_seed(mix_seed(
        spec.seed,
        &[sx as u64, sy as u64, trial as u64],
    ));

    // planted pair: sparse x0; y0 sparse in a freshly rotated basis
    let x_support = sample_support(&mut rng, d, sx);
    let mut x0 = DVector::zeros(d);
    for &i in &x_support {
        x0[i] = standard_normal_scalar(&mut rng);
    }
    let y_support = sample_support(&mut rng, d, sy);
    let mut coeff = DVector::zeros(d);
    for &i in &y_support {
        coeff[i] = standard_normal_scalar(&mut rng);
    }
    let rotation = LinearOp::random_rotation_from_rng(d, &mut rng)?;
    let y0 = rotation.adjoint(&coeff)?;
    let z0 = &x0 + &y0;
    let x_norm = x0.norm();

    let mut any_finished = false;
    for &lambda in &spec.lambda_grid {
        let problem = DemixProblem::new(
            z0.clone(),
            LinearOp::identity(d),
            vec![
                Component::new(GaugeSpec::l1(d), 1.0),
                Component::with_dictionary(GaugeSpec::l1(d), lambda, rotation.clone()),
            ],
            None,
        )?;
        let result = admm_demix(&problem, &spec.solver)?;
        if result.status == SolveStatus::Diverged {
            continue;
        }
        any_finished = true;
        let err = (&result.components[0] - &x0).norm() / x_norm;
        if err <= spec.success_tol {
            return Ok(TrialOutcome::Success);
        }
    }
    Ok(if any_finished {
        TrialOutcome::Failure
    } else {
        TrialOutcome::AllDiverged
    })
}

fn standard_normal_scalar(rng: &mut rand_chacha::ChaCha8Rng) -> f64 {
    use rand::Rng;
    rng.sample(rand_distr::StandardNormal)
}
