//! Wavelet-scalogram feature space built from the extracted side information.
//!
//! The transform uses an analytic Morlet wavelet with L1 scale normalization,
//! so a unit-amplitude tone produces a unit-magnitude ridge at any scale.

use std::f64::consts::PI;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MIN_CWT_LEN: usize = 16;
/// Signals longer than this are transformed blockwise.
pub const BLOCK_THRESHOLD: usize = 1 << 20;
pub const BLOCK_LEN: usize = 1 << 18;
pub const BLOCK_OVERLAP: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalogramConfig {
    /// Morlet center frequency in radians per unit scale.
    pub omega0: f64,
    pub voices_per_octave: usize,
    pub freq_min: f64,
    /// Upper analysis frequency; Nyquist when `None`.
    pub freq_max: Option<f64>,
}

impl Default for ScalogramConfig {
    fn default() -> Self {
        Self { omega0: 6.0, voices_per_octave: 8, freq_min: 20.0, freq_max: None }
    }
}

impl ScalogramConfig {
    /// Analysis frequencies in Hz, from `freq_max` down by `2^(-1/voices)`
    /// steps while at or above `freq_min`.
    pub fn frequencies(&self, rate: u32) -> Result<Vec<f64>> {
        let nyquist = f64::from(rate) / 2.0;
        let fmax = self.freq_max.unwrap_or(nyquist);
        let fmin = self.freq_min;
        if !(fmin > 0.0) || !(fmin < fmax) || fmax > nyquist {
            return Err(Error::BadFrequencyRange { min: fmin, max: fmax });
        }
        if self.voices_per_octave == 0 {
            return Err(Error::InvalidConfig("voices_per_octave must be at least 1".into()));
        }
        if !(self.omega0 > 0.0) {
            return Err(Error::InvalidConfig("omega0 must be positive".into()));
        }
        let v = self.voices_per_octave as f64;
        let count = (v * (fmax / fmin).log2() + 1e-9).floor() as usize + 1;
        Ok((0..count).map(|j| fmax * 2f64.powf(-(j as f64) / v)).collect())
    }

    /// Scale (in samples) whose wavelet peaks at `freq` Hz.
    pub fn scale_for(&self, freq: f64, rate: u32) -> f64 {
        self.omega0 * f64::from(rate) / (2.0 * PI * freq)
    }

    pub fn n_scales(&self, rate: u32) -> Result<usize> {
        Ok(self.frequencies(rate)?.len())
    }
}

/// Complex wavelet coefficients, one row per scale, high frequency first.
#[derive(Debug, Clone, PartialEq)]
pub struct Scalogram {
    pub coeffs: Vec<Vec<Complex64>>,
    pub scales: Vec<f64>,
    pub frequencies: Vec<f64>,
    pub config: ScalogramConfig,
}

impl Scalogram {
    pub fn n_scales(&self) -> usize {
        self.scales.len()
    }

    pub fn len(&self) -> usize {
        self.coeffs.first().map_or(0, Vec::len)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Frequency response of the L1-normalized analytic Morlet at `scale`.
#[inline]
fn morlet_hat(scale: f64, omega: f64, omega0: f64) -> f64 {
    if omega <= 0.0 {
        0.0
    } else {
        let d = scale * omega - omega0;
        2.0 * (-0.5 * d * d).exp()
    }
}

struct Spectrum {
    data: Vec<Complex64>,
    inverse: Arc<dyn Fft<f64>>,
}

impl Spectrum {
    fn new(signal: &[f64]) -> Self {
        let mut planner = FftPlanner::new();
        let forward = planner.plan_fft_forward(signal.len());
        let inverse = planner.plan_fft_inverse(signal.len());
        let mut data: Vec<Complex64> = signal.iter().map(|&x| Complex64::new(x, 0.0)).collect();
        forward.process(&mut data);
        Self { data, inverse }
    }

    /// One scalogram row, computed as a periodic correlation in frequency.
    fn row(&self, scale: f64, omega0: f64) -> Vec<Complex64> {
        let n = self.data.len();
        let norm = 1.0 / n as f64;
        let mut buf: Vec<Complex64> = self
            .data
            .iter()
            .enumerate()
            .map(|(k, &x)| {
                let omega = if k <= n / 2 { 2.0 * PI * k as f64 / n as f64 } else { -1.0 };
                x * (morlet_hat(scale, omega, omega0) * norm)
            })
            .collect();
        self.inverse.process(&mut buf);
        buf
    }
}

pub fn cwt_scalogram(signal: &[f64], rate: u32, config: &ScalogramConfig) -> Result<Scalogram> {
    if signal.len() < MIN_CWT_LEN {
        return Err(Error::TooShort { needed: MIN_CWT_LEN, got: signal.len() });
    }
    let frequencies = config.frequencies(rate)?;
    let scales: Vec<f64> = frequencies.iter().map(|&f| config.scale_for(f, rate)).collect();
    let block = if signal.len() > BLOCK_THRESHOLD { BLOCK_LEN } else { signal.len() };
    let coeffs = blocked_rows(signal, &scales, config.omega0, block, BLOCK_OVERLAP, |row| row);
    Ok(Scalogram { coeffs, scales, frequencies, config: *config })
}

/// Run the transform over overlapping blocks of `block` samples, keeping only
/// interior columns of each block, and map every finished row through `f`.
fn blocked_rows<T: Send + Clone + Default>(
    signal: &[f64],
    scales: &[f64],
    omega0: f64,
    block: usize,
    overlap: usize,
    f: impl Fn(Vec<Complex64>) -> Vec<T> + Sync,
) -> Vec<Vec<T>> {
    let len = signal.len();
    if block >= len {
        let spectrum = Spectrum::new(signal);
        return scales.par_iter().map(|&s| f(spectrum.row(s, omega0))).collect();
    }
    assert!(block > 2 * overlap);
    let hop = block - overlap;
    let mut out = vec![vec![T::default(); len]; scales.len()];
    let mut start = 0;
    loop {
        let end = (start + block).min(len);
        let keep_from = if start == 0 { 0 } else { start + overlap / 2 };
        let keep_to = if end == len { len } else { start + hop + overlap / 2 };
        let spectrum = Spectrum::new(&signal[start..end]);
        let rows: Vec<Vec<T>> = scales.par_iter().map(|&s| f(spectrum.row(s, omega0))).collect();
        for (dst, row) in out.iter_mut().zip(rows) {
            dst[keep_from..keep_to].clone_from_slice(&row[keep_from - start..keep_to - start]);
        }
        if end == len {
            break;
        }
        start += hop;
    }
    out
}

/// Per-time feature vectors: real scalogram parts followed by the side
/// information. Stored column-major; row `t` is `[Re W[0][t], ..., e[t]]`.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureTable {
    n_rows: usize,
    columns: Vec<Vec<f64>>,
}

impl FeatureTable {
    pub fn from_columns(columns: Vec<Vec<f64>>) -> Result<Self> {
        let n_rows = columns.first().map_or(0, Vec::len);
        if let Some(bad) = columns.iter().find(|c| c.len() != n_rows) {
            return Err(Error::LengthMismatch { left: n_rows, right: bad.len() });
        }
        Ok(Self { n_rows, columns })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut columns = vec![Vec::with_capacity(rows.len()); dim];
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch { expected: dim, got: row.len() });
            }
            for (c, &v) in columns.iter_mut().zip(row) {
                c.push(v);
            }
        }
        Ok(Self { n_rows: rows.len(), columns })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn dim(&self) -> usize {
        self.columns.len()
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    #[inline]
    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.columns[col][row]
    }

    pub fn row(&self, t: usize) -> Vec<f64> {
        self.columns.iter().map(|c| c[t]).collect()
    }

    /// Table holding only the given rows, in the given order.
    pub fn select_rows(&self, rows: &[usize]) -> Self {
        Self {
            n_rows: rows.len(),
            columns: self.columns.iter().map(|c| rows.iter().map(|&r| c[r]).collect()).collect(),
        }
    }

    fn check_finite(&self) -> Result<()> {
        for (col, c) in self.columns.iter().enumerate() {
            if let Some(row) = c.iter().position(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row, col });
            }
        }
        Ok(())
    }

    /// CSV with header `s0..s{n-1},e`.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let n = self.dim().saturating_sub(1);
        let header: Vec<String> = (0..n).map(|i| format!("s{i}")).chain(["e".to_string()]).collect();
        w.write_record(&header)?;
        for t in 0..self.n_rows {
            w.write_record(self.columns.iter().map(|c| c[t].to_string()))?;
        }
        w.flush()?;
        Ok(())
    }
}

pub fn assemble_features(scalogram: &Scalogram, side_info: &[f64]) -> Result<FeatureTable> {
    if scalogram.len() != side_info.len() {
        return Err(Error::LengthMismatch { left: scalogram.len(), right: side_info.len() });
    }
    let mut columns: Vec<Vec<f64>> =
        scalogram.coeffs.iter().map(|row| row.iter().map(|c| c.re).collect()).collect();
    columns.push(side_info.to_vec());
    let table = FeatureTable { n_rows: side_info.len(), columns };
    table.check_finite()?;
    Ok(table)
}

/// Same result as `assemble_features(cwt_scalogram(..))` without holding the
/// complex coefficient matrix in memory.
pub fn scalogram_features(side_info: &[f64], rate: u32, config: &ScalogramConfig) -> Result<FeatureTable> {
    if side_info.len() < MIN_CWT_LEN {
        return Err(Error::TooShort { needed: MIN_CWT_LEN, got: side_info.len() });
    }
    let scales: Vec<f64> = config.frequencies(rate)?.iter().map(|&f| config.scale_for(f, rate)).collect();
    let block = if side_info.len() > BLOCK_THRESHOLD { BLOCK_LEN } else { side_info.len() };
    let mut columns = blocked_rows(side_info, &scales, config.omega0, block, BLOCK_OVERLAP, |row| {
        row.iter().map(|c| c.re).collect()
    });
    columns.push(side_info.to_vec());
    let table = FeatureTable { n_rows: side_info.len(), columns };
    table.check_finite()?;
    Ok(table)
}
