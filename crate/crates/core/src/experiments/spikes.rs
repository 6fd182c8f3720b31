//! Spikes + sines separation: a sparse impulse train plus a signal that is
//! sparse in the orthonormal DCT basis, split by
//! `min ||x||_1 + ||D y||_1 s.t. x + y = z0`.

use nalgebra::DVector;

use crate::atoms::GaugeSpec;
use crate::error::{DemixError, Result};
use crate::io::csv::WaveformRow;
use crate::operators::LinearOp;
use crate::rng::{mix_seed, rng_from_seed, sample_support, standard_normal_vector};
use crate::solvers::{admm_demix, Component, DemixProblem, SolveStatus, SolverOptions};

#[derive(Clone, Debug)]
pub struct SpikesReport {
    pub x_true: DVector<f64>,
    pub y_true: DVector<f64>,
    pub x_hat: DVector<f64>,
    pub y_hat: DVector<f64>,
    /// Relative l2 error (absolute when the true component is zero).
    pub x_rel_err: f64,
    pub y_rel_err: f64,
    pub status: SolveStatus,
    pub iterations: usize,
}

impl SpikesReport {
    pub fn waveform_rows(&self) -> Vec<WaveformRow> {
        (0..self.x_true.len())
            .map(|i| WaveformRow {
                i,
                z0: self.x_true[i] + self.y_true[i],
                x_true: self.x_true[i],
                x_hat: self.x_hat[i],
                y_true: self.y_true[i],
                y_hat: self.y_hat[i],
            })
            .collect()
    }
}

fn rel_err(estimate: &DVector<f64>, truth: &DVector<f64>) -> f64 {
    let norm = truth.norm();
    if norm > 0.0 {
        (estimate - truth).norm() / norm
    } else {
        estimate.norm()
    }
}

/// Plant `s_spike` impulses and `s_dct` DCT atoms with Gaussian amplitudes,
/// mix, and separate with unit regularization weight.
///
/// Requires `s_spike + s_dct <= d / 4`; denser mixes leave the
/// high-probability recovery regime this demo documents.
pub fn demo_spikes_sines(
    d: usize,
    s_spike: usize,
    s_dct: usize,
    seed: u64,
) -> Result<SpikesReport> {
    if d == 0 {
        return Err(DemixError::InvalidArgument("d must be positive".into()));
    }
    if s_spike + s_dct > d / 4 {
        return Err(DemixError::InvalidArgument(format!(
            "s_spike + s_dct = {} exceeds d/4 = {}",
            s_spike + s_dct,
            d / 4
        )));
    }
    let mut rng = rng_from_seed(mix_seed(seed, &[0x5b1c]));
    let dct = LinearOp::dct(d)?;

    let mut x0 = DVector::zeros(d);
    for &i in &sample_support(&mut rng, d, s_spike) {
        x0[i] = standard_normal_vector(&mut rng, 1)[0];
    }
    let mut coeff = DVector::zeros(d);
    for &i in &sample_support(&mut rng, d, s_dct) {
        coeff[i] = standard_normal_vector(&mut rng, 1)[0];
    }
    let y0 = dct.adjoint(&coeff)?;
    let z0 = &x0 + &y0;

    let problem = DemixProblem::new(
        z0,
        LinearOp::identity(d),
        vec![
            Component::new(GaugeSpec::l1(d), 1.0),
            Component::with_dictionary(GaugeSpec::l1(d), 1.0, dct),
        ],
        None,
    )?;
    let opts = SolverOptions::default()
        .with_tols(1e-10, 1e-10)
        .with_max_iter(5000);
    let result = admm_demix(&problem, &opts)?;

    let x_hat = result.components[0].clone();
    let y_hat = result.components[1].clone();
    Ok(SpikesReport {
        x_rel_err: rel_err(&x_hat, &x0),
        y_rel_err: rel_err(&y_hat, &y0),
        x_true: x0,
        y_true: y0,
        x_hat,
        y_hat,
        status: result.status,
        iterations: result.iterations,
    })
}
