//! Halftone-based compression and reconstruction.
//!
//! A signal is folded row-major into a near-square matrix, binarized with
//! Floyd-Steinberg error diffusion, and approximately recovered by 2-D
//! Gaussian low-pass filtering of the bit plane.

use std::io::Write;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::audio_io::ByteSignal;
use crate::error::{Error, Result};

/// Row-major real matrix holding a folded signal. Entries past `orig_len`
/// are zero padding.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
    pub orig_len: usize,
}

impl SignalMatrix {
    #[inline]
    pub fn at(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }
}

/// Binary matrix produced by dithering, same shape as its source matrix.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitPlane {
    pub rows: usize,
    pub cols: usize,
    pub bits: Vec<u8>,
    pub orig_len: usize,
}

impl BitPlane {
    /// Build a plane from a flat bit sequence of length `orig_len`, padding the
    /// tail with zeros.
    pub fn from_bits(bits: &[u8], rows: usize, cols: usize) -> Result<Self> {
        if rows * cols < bits.len() {
            return Err(Error::InvalidConfig(format!(
                "{rows}x{cols} plane cannot hold {} bits",
                bits.len()
            )));
        }
        let mut plane = vec![0u8; rows * cols];
        plane[..bits.len()].copy_from_slice(bits);
        Ok(Self { rows, cols, bits: plane, orig_len: bits.len() })
    }

    /// Row-major bits truncated to `orig_len`.
    pub fn flatten(&self) -> Vec<u8> {
        self.bits[..self.orig_len].to_vec()
    }

    pub fn storage(&self) -> StorageSizes {
        StorageSizes::for_samples(self.orig_len)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianConfig {
    pub sigma: f64,
}

impl Default for GaussianConfig {
    fn default() -> Self {
        Self { sigma: 1.5 }
    }
}

impl GaussianConfig {
    /// Odd window width `2 * floor(2 * sigma) + 1`.
    pub fn kernel_size(&self) -> usize {
        2 * (2.0 * self.sigma).floor() as usize + 1
    }
}

/// Matrix dimensions for a signal of `len` samples.
///
/// With `rows` absent the matrix is near square: `n = floor(sqrt(len))` and
/// `m = ceil(len / n)`.
pub fn matrix_dims(len: usize, rows: Option<usize>) -> Result<(usize, usize)> {
    if len == 0 {
        return Err(Error::EmptyInput);
    }
    let n = match rows {
        Some(0) => return Err(Error::InvalidConfig("rows must be positive".into())),
        Some(r) if r > len => return Err(Error::RowsExceedLength { rows: r, len }),
        Some(r) => r,
        None => isqrt(len),
    };
    Ok((n, len.div_ceil(n)))
}

fn isqrt(x: usize) -> usize {
    let mut r = (x as f64).sqrt() as usize;
    while r * r > x {
        r -= 1;
    }
    while (r + 1) * (r + 1) <= x {
        r += 1;
    }
    r
}

pub fn reshape_to_matrix(values: &[f64], rows: Option<usize>) -> Result<SignalMatrix> {
    let (rows, cols) = matrix_dims(values.len(), rows)?;
    let mut data = vec![0.0; rows * cols];
    data[..values.len()].copy_from_slice(values);
    Ok(SignalMatrix { rows, cols, data, orig_len: values.len() })
}

pub fn flatten_matrix(matrix: &SignalMatrix) -> Vec<f64> {
    matrix.data[..matrix.orig_len].to_vec()
}

const DITHER_THRESHOLD: f64 = 127.5;

/// Floyd-Steinberg error diffusion on a [0, 255] matrix.
///
/// Plain raster scan, threshold 127.5, weights 7/16, 3/16, 5/16, 1/16. Error
/// that would land outside the matrix is dropped.
pub fn dither(matrix: &SignalMatrix) -> Result<BitPlane> {
    if let Some(index) = matrix.data.iter().position(|v| !(0.0..=255.0).contains(v)) {
        return Err(Error::OutOfRange { index, value: matrix.data[index] });
    }
    let (rows, cols) = (matrix.rows, matrix.cols);
    let mut bits = vec![0u8; rows * cols];
    // two rolling rows of accumulated error
    let mut cur = vec![0.0f64; cols];
    let mut next = vec![0.0f64; cols];
    for r in 0..rows {
        for c in 0..cols {
            let v = matrix.data[r * cols + c] + cur[c];
            let (bit, out) = if v > DITHER_THRESHOLD { (1, 255.0) } else { (0, 0.0) };
            bits[r * cols + c] = bit;
            let err = v - out;
            if c + 1 < cols {
                cur[c + 1] += err * 7.0 / 16.0;
            }
            if r + 1 < rows {
                if c > 0 {
                    next[c - 1] += err * 3.0 / 16.0;
                }
                next[c] += err * 5.0 / 16.0;
                if c + 1 < cols {
                    next[c + 1] += err * 1.0 / 16.0;
                }
            }
        }
        std::mem::swap(&mut cur, &mut next);
        next.iter_mut().for_each(|e| *e = 0.0);
    }
    Ok(BitPlane { rows, cols, bits, orig_len: matrix.orig_len })
}

/// Sampled, normalized 2-D Gaussian as a row-major `size x size` array.
pub fn gaussian_kernel(config: &GaussianConfig) -> Result<Vec<f64>> {
    let sigma = config.sigma;
    if !(sigma > 0.0) || !sigma.is_finite() {
        return Err(Error::NonPositiveSigma(sigma));
    }
    let size = config.kernel_size();
    let half = (size / 2) as i64;
    let norm = 1.0 / (2.0 * std::f64::consts::PI * sigma * sigma);
    let mut kernel = Vec::with_capacity(size * size);
    for y in -half..=half {
        for x in -half..=half {
            let d2 = (x * x + y * y) as f64;
            kernel.push(norm * (-d2 / (2.0 * sigma * sigma)).exp());
        }
    }
    let total: f64 = kernel.iter().sum();
    kernel.iter_mut().for_each(|w| *w /= total);
    Ok(kernel)
}

/// Low-pass the bit plane with the Gaussian kernel (replicate borders).
pub fn inverse_halftone(plane: &BitPlane, config: &GaussianConfig) -> Result<SignalMatrix> {
    let kernel = gaussian_kernel(config)?;
    let size = config.kernel_size();
    let half = (size / 2) as isize;
    let (rows, cols) = (plane.rows, plane.cols);
    let clamp = |v: isize, hi: usize| v.clamp(0, hi as isize - 1) as usize;
    let mut data = vec![0.0; rows * cols];
    data.par_chunks_mut(cols.max(1)).enumerate().for_each(|(r, out)| {
        for (c, o) in out.iter_mut().enumerate() {
            let mut acc = 0.0;
            for ky in 0..size {
                let rr = clamp(r as isize + ky as isize - half, rows);
                let row = &plane.bits[rr * cols..(rr + 1) * cols];
                let krow = &kernel[ky * size..(ky + 1) * size];
                for (kx, &w) in krow.iter().enumerate() {
                    let cc = clamp(c as isize + kx as isize - half, cols);
                    acc += w * f64::from(row[cc]);
                }
            }
            *o = acc.clamp(0.0, 1.0);
        }
    });
    Ok(SignalMatrix { rows, cols, data, orig_len: plane.orig_len })
}

/// Linear fit of the reconstruction against the original (scaled to [0, 1]).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub n: usize,
    pub pearson_r: f64,
    pub slope: f64,
    pub intercept: f64,
    pub rmse: f64,
    pub r_squared: f64,
}

/// Regress `reconstructed` (in [0, 1]) on `original.values / 255`.
pub fn hcr_roundtrip_stats(original: &ByteSignal, reconstructed: &[f64]) -> Result<CorrelationReport> {
    let x: Vec<f64> = original.values.iter().map(|v| v / 255.0).collect();
    linear_fit(&x, reconstructed)
}

pub(crate) fn linear_fit(x: &[f64], y: &[f64]) -> Result<CorrelationReport> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    if x.len() < 2 {
        return Err(Error::TooShort { needed: 2, got: x.len() });
    }
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let (mut sxx, mut syy, mut sxy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        let (dx, dy) = (a - mx, b - my);
        sxx += dx * dx;
        syy += dy * dy;
        sxy += dx * dy;
    }
    if sxx == 0.0 {
        return Err(Error::ZeroVariance("original"));
    }
    if syy == 0.0 {
        return Err(Error::ZeroVariance("reconstruction"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = x
        .iter()
        .zip(y)
        .map(|(a, b)| {
            let e = b - (slope * a + intercept);
            e * e
        })
        .sum();
    let pearson_r = sxy / (sxx * syy).sqrt();
    Ok(CorrelationReport {
        n: x.len(),
        pearson_r,
        slope,
        intercept,
        // residual degrees of freedom n - 2, as in a standard regression table
        rmse: if x.len() > 2 { (sse / (n - 2.0)).sqrt() } else { 0.0 },
        r_squared: 1.0 - sse / syy,
    })
}

/// Storage needed for `samples` values in several representations.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StorageSizes {
    pub samples: usize,
    /// 16-bit PCM source.
    pub pcm16_bytes: usize,
    /// One byte per element (byte-scaled signal).
    pub byte_per_element: usize,
    /// One f64 per element, the accounting of a double-precision array.
    pub f64_bytes: usize,
    /// Bit plane packed 8 bits per byte.
    pub bitplane_packed_bytes: usize,
}

impl StorageSizes {
    pub fn for_samples(samples: usize) -> Self {
        Self {
            samples,
            pcm16_bytes: samples * 2,
            byte_per_element: samples,
            f64_bytes: samples * 8,
            bitplane_packed_bytes: samples.div_ceil(8),
        }
    }
}

/// Write a [0, 255] matrix as binary 8-bit PGM (P5).
pub fn write_pgm<W: Write>(matrix: &SignalMatrix, scale: f64, mut out: W) -> std::io::Result<()> {
    write!(out, "P5\n{} {}\n255\n", matrix.cols, matrix.rows)?;
    let bytes: Vec<u8> = matrix
        .data
        .iter()
        .map(|v| (v * scale).round().clamp(0.0, 255.0) as u8)
        .collect();
    out.write_all(&bytes)
}

/// Write a bit plane as binary PBM (P4). PBM treats 1 as black, so bits are
/// inverted to keep loud samples bright.
pub fn write_pbm<W: Write>(plane: &BitPlane, mut out: W) -> std::io::Result<()> {
    write!(out, "P4\n{} {}\n", plane.cols, plane.rows)?;
    let row_bytes = plane.cols.div_ceil(8);
    let mut buf = vec![0u8; row_bytes];
    for r in 0..plane.rows {
        buf.iter_mut().for_each(|b| *b = 0);
        for c in 0..plane.cols {
            if plane.bits[r * plane.cols + c] == 0 {
                buf[c / 8] |= 0x80 >> (c % 8);
            }
        }
        out.write_all(&buf)?;
    }
    Ok(())
}
