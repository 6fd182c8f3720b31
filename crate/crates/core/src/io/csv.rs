//! CSV report writers with pinned schemas.
//!
//! Floats are serialized with 17 significant digits so every value
//! round-trips exactly and repeated runs produce byte-identical files.

use std::fs;
use std::path::Path;

use crate::error::{DemixError, Result};

/// 17 significant digits: enough for exact f64 round trips.
pub fn fmt_float(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent).map_err(|source| DemixError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    fs::write(path, bytes).map_err(|source| DemixError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Rows of the phase-diagram report; header `s_x,s_y,success_rate,delta`.
pub struct PhaseRow {
    pub s_x: usize,
    pub s_y: usize,
    pub success_rate: f64,
    pub delta: f64,
}

pub fn phase_csv(rows: &[PhaseRow]) -> String {
    let mut out = String::from("s_x,s_y,success_rate,delta\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.s_x,
            r.s_y,
            fmt_float(r.success_rate),
            fmt_float(r.delta)
        ));
    }
    out
}

pub fn write_phase_csv(rows: &[PhaseRow], path: &Path) -> Result<()> {
    write_bytes(path, phase_csv(rows).as_bytes())
}

/// Rows of the statistical-dimension report; header
/// `cone,d,samples,mean,stderr`.
pub struct SdimRow {
    pub cone: String,
    pub d: usize,
    pub samples: usize,
    pub mean: f64,
    pub stderr: f64,
}

pub fn sdim_csv(rows: &[SdimRow]) -> String {
    let mut out = String::from("cone,d,samples,mean,stderr\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            r.cone,
            r.d,
            r.samples,
            fmt_float(r.mean),
            fmt_float(r.stderr)
        ));
    }
    out
}

pub fn write_sdim_csv(rows: &[SdimRow], path: &Path) -> Result<()> {
    write_bytes(path, sdim_csv(rows).as_bytes())
}

/// Rows of the bearing-estimation report; header
/// `method,theta_true,theta_est,error_deg`.
pub struct DoaRow {
    pub method: &'static str,
    pub theta_true: f64,
    pub theta_est: f64,
    pub error_deg: f64,
}

pub fn doa_csv(rows: &[DoaRow]) -> String {
    let mut out = String::from("method,theta_true,theta_est,error_deg\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{}\n",
            r.method,
            fmt_float(r.theta_true),
            fmt_float(r.theta_est),
            fmt_float(r.error_deg)
        ));
    }
    out
}

pub fn write_doa_csv(rows: &[DoaRow], path: &Path) -> Result<()> {
    write_bytes(path, doa_csv(rows).as_bytes())
}

/// Waveform dump for the spikes+sines demo; header
/// `i,z0,x_true,x_hat,y_true,y_hat`.
pub struct WaveformRow {
    pub i: usize,
    pub z0: f64,
    pub x_true: f64,
    pub x_hat: f64,
    pub y_true: f64,
    pub y_hat: f64,
}

pub fn waveform_csv(rows: &[WaveformRow]) -> String {
    let mut out = String::from("i,z0,x_true,x_hat,y_true,y_hat\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.i,
            fmt_float(r.z0),
            fmt_float(r.x_true),
            fmt_float(r.x_hat),
            fmt_float(r.y_true),
            fmt_float(r.y_hat)
        ));
    }
    out
}

pub fn write_waveform_csv(rows: &[WaveformRow], path: &Path) -> Result<()> {
    write_bytes(path, waveform_csv(rows).as_bytes())
}
