//! PGM (portable graymap) reading and writing.
//!
//! Writes binary `P5` with maxval 255, row-major. Reads both ASCII `P2`
//! and binary `P5`; maxval above 255 is rejected as unsupported. Parse
//! errors report the byte offset where reading stopped.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;

use crate::error::{DemixError, Result};

#[derive(Clone, Debug)]
pub struct PgmImage {
    pub width: usize,
    pub height: usize,
    /// Row-major, one byte per pixel.
    pub pixels: Vec<u8>,
}

pub fn write_pgm(image: &PgmImage, path: &Path) -> Result<()> {
    assert_eq!(image.pixels.len(), image.width * image.height);
    let mut bytes = format!("P5\n{} {}\n255\n", image.width, image.height).into_bytes();
    bytes.extend_from_slice(&image.pixels);
    crate::io::csv::write_bytes(path, &bytes)
}

pub fn read_pgm(path: &Path) -> Result<PgmImage> {
    let bytes = fs::read(path).map_err(|source| DemixError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let fail = |offset: usize, message: &str| DemixError::Format {
        path: path.to_path_buf(),
        offset,
        message: message.to_string(),
    };

    let mut pos = 0usize;
    let magic = token(&bytes, &mut pos).ok_or_else(|| fail(pos, "missing magic number"))?;
    let binary = match magic.as_str() {
        "P5" => true,
        "P2" => false,
        other => return Err(fail(0, &format!("unsupported magic `{other}`"))),
    };
    let width = parse_usize(&bytes, &mut pos).map_err(|o| fail(o, "bad width"))?;
    let height = parse_usize(&bytes, &mut pos).map_err(|o| fail(o, "bad height"))?;
    let maxval = parse_usize(&bytes, &mut pos).map_err(|o| fail(o, "bad maxval"))?;
    if maxval > 255 {
        return Err(fail(pos, &format!("maxval {maxval} exceeds 255")));
    }
    if maxval == 0 {
        return Err(fail(pos, "maxval must be positive"));
    }

    let count = width * height;
    let pixels = if binary {
        // exactly one whitespace byte separates the header from the raster
        if pos >= bytes.len() || !bytes[pos].is_ascii_whitespace() {
            return Err(fail(pos, "missing raster separator"));
        }
        pos += 1;
        if bytes.len() < pos + count {
            return Err(fail(bytes.len(), "truncated raster"));
        }
        bytes[pos..pos + count].to_vec()
    } else {
        let mut px = Vec::with_capacity(count);
        for _ in 0..count {
            let v = parse_usize(&bytes, &mut pos).map_err(|o| fail(o, "bad pixel value"))?;
            if v > maxval {
                return Err(fail(pos, &format!("pixel {v} exceeds maxval {maxval}")));
            }
            px.push(v as u8);
        }
        px
    };
    Ok(PgmImage {
        width,
        height,
        pixels,
    })
}

/// Next whitespace-delimited token, skipping `#` comment lines.
fn token(bytes: &[u8], pos: &mut usize) -> Option<String> {
    loop {
        while *pos < bytes.len() && bytes[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < bytes.len() && bytes[*pos] == b'#' {
            while *pos < bytes.len() && bytes[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < bytes.len() && !bytes[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if *pos > start {
        Some(String::from_utf8_lossy(&bytes[start..*pos]).into_owned())
    } else {
        None
    }
}

fn parse_usize(bytes: &[u8], pos: &mut usize) -> std::result::Result<usize, usize> {
    let at = *pos;
    let t = token(bytes, pos).ok_or(at)?;
    t.parse::<usize>().map_err(|_| at)
}

/// Rescale a real matrix affinely onto 0..255 (constant matrices map to 0).
pub fn matrix_to_image(m: &DMatrix<f64>) -> PgmImage {
    let (lo, hi) = m
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
            (lo.min(v), hi.max(v))
        });
    let span = hi - lo;
    let mut pixels = Vec::with_capacity(m.nrows() * m.ncols());
    for i in 0..m.nrows() {
        for j in 0..m.ncols() {
            let v = if span > 0.0 {
                ((m[(i, j)] - lo) / span * 255.0).round()
            } else {
                0.0
            };
            pixels.push(v as u8);
        }
    }
    PgmImage {
        width: m.ncols(),
        height: m.nrows(),
        pixels,
    }
}

/// Pixels as a real matrix in 0..=255.
pub fn image_to_matrix(img: &PgmImage) -> DMatrix<f64> {
    DMatrix::from_fn(img.height, img.width, |i, j| {
        f64::from(img.pixels[i * img.width + j])
    })
}
