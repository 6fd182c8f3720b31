//! Blind deconvolution by lifting: the convolution of two unknown signals
//! is linear in their outer product, so recovering a rank-one matrix from
//! `z0 = C(X)` with the nuclear-norm gauge recovers both factors at once.

use nalgebra::{DMatrix, DVector};

use crate::atoms::{thin_svd, GaugeSpec};
use crate::error::{DemixError, Result};
use crate::operators::LinearOp;
use crate::rng::{mix_seed, rng_from_seed, standard_normal_vector};
use crate::shape::reshape;
use crate::solvers::{
    decomposition_demix, stable_rho, Component, DemixProblem, SolveStatus, SolverOptions,
};

#[derive(Clone, Debug)]
pub struct BlindDeconvReport {
    /// Recovered lifted matrix (m x d).
    pub lifted: DMatrix<f64>,
    pub channel_true: DVector<f64>,
    pub source_true: DVector<f64>,
    /// Leading singular pair of the recovered matrix, scaled so
    /// `channel_estimate * source_estimate^t` is its best rank-one
    /// approximation; the channel's largest-magnitude entry is positive.
    pub channel_estimate: DVector<f64>,
    pub source_estimate: DVector<f64>,
    pub top_singular_value: f64,
    /// `||C(X_hat) - z0||`.
    pub feasibility: f64,
    pub objective: f64,
    /// Nuclear norm of the planted rank-one matrix.
    pub ground_truth_objective: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

/// Draw Gaussian channel (length m) and source (length d), convolve, and
/// recover the lifted rank-one matrix with the nuclear-norm program.
pub fn demo_blind_deconv(
    m: usize,
    d: usize,
    seed: u64,
    opts: Option<&SolverOptions>,
) -> Result<BlindDeconvReport> {
    if m == 0 || d == 0 {
        return Err(DemixError::InvalidArgument("dimensions must be positive".into()));
    }
    if m > 32 || d > 32 {
        return Err(DemixError::InvalidArgument(
            "blind deconvolution demo is limited to m, d <= 32".into(),
        ));
    }
    let mut rng = rng_from_seed(mix_seed(seed, &[0xb11d]));
    let channel = standard_normal_vector(&mut rng, m);
    let source = standard_normal_vector(&mut rng, d);
    demo_blind_deconv_with(&channel, &source, opts)
}

/// Same program for caller-provided factors.
pub fn demo_blind_deconv_with(
    channel: &DVector<f64>,
    source: &DVector<f64>,
    opts: Option<&SolverOptions>,
) -> Result<BlindDeconvReport> {
    let m = channel.len();
    let d = source.len();
    let lift = LinearOp::conv_lift(m, d)?;
    // z0 = channel * source (linear convolution) = C(channel source^t)
    let mut z0 = DVector::zeros(m + d - 1);
    for i in 0..m {
        for j in 0..d {
            z0[i + j] += channel[i] * source[j];
        }
    }

    let problem = DemixProblem::new(
        z0.clone(),
        lift,
        vec![Component::new(GaugeSpec::schatten1(m, d), 1.0)],
        None,
    )?;
    let default_opts = SolverOptions::default()
        .with_rho(stable_rho(&problem, 0.5)?)
        .with_tols(1e-9, 1e-9)
        .with_max_iter(50_000);
    let opts = opts.cloned().unwrap_or(default_opts);
    let result = decomposition_demix(&problem, &opts)?;

    let lifted = reshape(&result.components[0], m, d);
    let (u, sv, vt) = thin_svd(&lifted)?;
    let sigma = sv[0];
    let mut uvec = u.column(0).into_owned();
    let mut vvec = vt.row(0).transpose();
    // pin the sign: make the channel's largest-magnitude entry positive
    let lead = uvec
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().partial_cmp(&b.1.abs()).expect("finite"))
        .map(|(i, _)| i)
        .unwrap_or(0);
    if uvec[lead] < 0.0 {
        uvec = -uvec;
        vvec = -vvec;
    }
    let scale = sigma.sqrt();

    let feasibility = (problem.measurement().apply(&result.components[0])? - &z0).norm();
    Ok(BlindDeconvReport {
        lifted,
        channel_true: channel.clone(),
        source_true: source.clone(),
        channel_estimate: uvec * scale,
        source_estimate: vvec * scale,
        top_singular_value: sigma,
        feasibility,
        objective: result.objective,
        ground_truth_objective: channel.norm() * source.norm(),
        status: result.status,
        iterations: result.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_lifting_recovers_source_exactly() {
        // m = 1: the lifting is invertible, X = z0 as a row
        let channel = DVector::from_column_slice(&[1.0]);
        let mut rng = rng_from_seed(8);
        let source = standard_normal_vector(&mut rng, 6);
        let report = demo_blind_deconv_with(&channel, &source, None).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        let row = report.lifted.row(0).transpose();
        assert!((&row - &source).norm() <= 1e-6 * source.norm());
    }

    #[test]
    fn square_instance_is_feasible_and_tight() {
        let report = demo_blind_deconv(8, 8, 5, None).unwrap();
        assert_eq!(report.status, SolveStatus::Converged);
        let z_norm = report.ground_truth_objective; // scale proxy
        assert!(
            report.feasibility <= 1e-6 * z_norm.max(1.0),
            "feasibility {}",
            report.feasibility
        );
        assert!(
            report.objective <= report.ground_truth_objective + 1e-4,
            "objective {} vs ground truth {}",
            report.objective,
            report.ground_truth_objective
        );
    }

    #[test]
    fn oversize_request_is_refused() {
        assert!(demo_blind_deconv(40, 8, 0, None).is_err());
    }
}
