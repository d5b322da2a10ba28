//! Quality metrics and gap simulation.

mod benchmark;

use std::f64::consts::PI;

use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

pub use benchmark::{run_benchmark, BenchRow, BenchmarkPlan, BenchmarkReport, Summary, CSV_HEADER};

use crate::error::{Error, Result};
use crate::regress::GapSpec;
use crate::rng::SplitMix64;

/// Reported when the test signal equals the reference exactly.
pub const SNR_CAP_DB: f64 = 300.0;
pub const EDGE_MARGIN_SECS: f64 = 0.5;
pub const LSD_FRAME: usize = 2048;
pub const LSD_HOP: usize = 512;
/// Power floor for the log spectra, -100 dB.
const LSD_FLOOR: f64 = 1e-10;

pub const LSD_DISCLAIMER: &str =
    "lsd is a log-spectral distance proxy; perceptual grades (PEAQ ODG, Hansen QC) are not computed";

pub fn ms_to_samples(ms: f64, rate: u32) -> usize {
    (ms * f64::from(rate) / 1000.0).round().max(0.0) as usize
}

/// `10 log10(|S|^2 / |S - T|^2)`, capped at [`SNR_CAP_DB`] for zero error.
pub fn snr(reference: &[f64], test: &[f64]) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::LengthMismatch { left: reference.len(), right: test.len() });
    }
    let signal: f64 = reference.iter().map(|v| v * v).sum();
    if signal == 0.0 {
        return Err(Error::ZeroReference);
    }
    let noise: f64 = reference.iter().zip(test).map(|(a, b)| (a - b) * (a - b)).sum();
    if noise == 0.0 {
        return Ok(SNR_CAP_DB);
    }
    Ok(10.0 * (signal / noise).log10())
}

/// SNR over the concatenated gap samples only.
pub fn snr_gap(reference: &[f64], test: &[f64], gaps: &[GapSpec]) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::LengthMismatch { left: reference.len(), right: test.len() });
    }
    GapSpec::check_all(gaps, reference.len())?;
    let (r, t): (Vec<f64>, Vec<f64>) =
        gaps.iter().flat_map(|g| g.range()).map(|i| (reference[i], test[i])).unzip();
    snr(&r, &t)
}

fn hann(n: usize) -> Vec<f64> {
    (0..n).map(|i| 0.5 - 0.5 * (2.0 * PI * i as f64 / (n - 1) as f64).cos()).collect()
}

/// Mean over Hann-windowed frames of the RMS difference between the two
/// log power spectra (dB, floored at -100 dB).
pub fn log_spectral_distance(reference: &[f64], test: &[f64], frame: usize, hop: usize) -> Result<f64> {
    if reference.len() != test.len() {
        return Err(Error::LengthMismatch { left: reference.len(), right: test.len() });
    }
    if frame < 2 || hop == 0 {
        return Err(Error::InvalidConfig("frame must be >= 2 and hop >= 1".into()));
    }
    if reference.len() < frame {
        return Err(Error::TooShort { needed: frame, got: reference.len() });
    }
    let window = hann(frame);
    let fft = FftPlanner::new().plan_fft_forward(frame);
    let bins = frame / 2 + 1;
    let log_power = |x: &[f64]| -> Vec<f64> {
        let mut buf: Vec<Complex64> = x.iter().zip(&window).map(|(v, w)| Complex64::new(v * w, 0.0)).collect();
        fft.process(&mut buf);
        buf[..bins].iter().map(|c| 10.0 * c.norm_sqr().max(LSD_FLOOR).log10()).collect()
    };
    let frames = 1 + (reference.len() - frame) / hop;
    let total: f64 = (0..frames)
        .map(|f| {
            let at = f * hop;
            let a = log_power(&reference[at..at + frame]);
            let b = log_power(&test[at..at + frame]);
            (a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / bins as f64).sqrt()
        })
        .sum();
    Ok(total / frames as f64)
}

/// Pearson correlation; `None` if either side has zero variance.
pub fn pearson(a: &[f64], b: &[f64]) -> Result<Option<f64>> {
    match crate::hcr::linear_fit(a, b) {
        Ok(fit) => Ok(Some(fit.pearson_r)),
        Err(Error::ZeroVariance(_)) => Ok(None),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GapMetrics {
    pub start: usize,
    pub len: usize,
    pub snr: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub snr_full: f64,
    /// SNR over all gap samples; absent without gaps or for silent gaps.
    pub snr_gap: Option<f64>,
    pub lsd: Option<f64>,
    pub pearson_r: Option<f64>,
    pub per_gap: Vec<GapMetrics>,
    pub note: String,
}

pub fn evaluate(reference: &[f64], test: &[f64], gaps: &[GapSpec]) -> Result<MetricsReport> {
    let snr_full = snr(reference, test)?;
    GapSpec::check_all(gaps, reference.len())?;
    let optional = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::ZeroReference | Error::TooShort { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    let snr_gap = if gaps.is_empty() { None } else { optional(snr_gap(reference, test, gaps))? };
    let per_gap = gaps
        .iter()
        .map(|g| {
            Ok(GapMetrics {
                start: g.start,
                len: g.len,
                snr: optional(snr(&reference[g.range()], &test[g.range()]))?,
            })
        })
        .collect::<Result<_>>()?;
    Ok(MetricsReport {
        snr_full,
        snr_gap,
        lsd: optional(log_spectral_distance(reference, test, LSD_FRAME, LSD_HOP))?,
        pearson_r: pearson(reference, test)?,
        per_gap,
        note: LSD_DISCLAIMER.to_string(),
    })
}

/// Place `count` gaps of each listed length uniformly at random, pairwise
/// disjoint and at least half a second from either end of the clip.
///
/// Gaps come back grouped by length in the order of `gap_ms`.
pub fn simulate_gaps(length: usize, rate: u32, gap_ms: &[f64], count: usize, seed: u64) -> Result<Vec<GapSpec>> {
    let margin = ms_to_samples(EDGE_MARGIN_SECS * 1000.0, rate);
    let lens: Vec<usize> = gap_ms.iter().map(|&ms| ms_to_samples(ms, rate)).collect();
    if lens.contains(&0) {
        return Err(Error::InvalidConfig("gap length rounds to zero samples".into()));
    }
    let needed = lens.iter().sum::<usize>() * count + 2 * margin;
    if needed > length {
        return Err(Error::DoesNotFit(format!("{needed} samples needed, clip has {length}")));
    }
    let mut rng = SplitMix64::new(seed);
    let mut placed: Vec<GapSpec> = Vec::with_capacity(lens.len() * count);
    for &len in &lens {
        for _ in 0..count {
            let hi = length - margin - len;
            let mut attempts = 0;
            let gap = loop {
                let g = GapSpec::new(margin + rng.below(hi - margin + 1), len);
                if placed.iter().all(|p| g.end() <= p.start || p.end() <= g.start) {
                    break g;
                }
                attempts += 1;
                if attempts >= 10_000 {
                    return Err(Error::DoesNotFit("could not place disjoint gaps".into()));
                }
            };
            placed.push(gap);
        }
    }
    Ok(placed)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn noise(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = SplitMix64::new(seed);
        (0..n).map(|_| rng.next_f64() - 0.5).collect()
    }

    #[test]
    fn snr_analytic() {
        let s = noise(1000, 1);
        let half: Vec<f64> = s.iter().map(|v| 0.5 * v).collect();
        let neg: Vec<f64> = s.iter().map(|v| -v).collect();
        assert!((snr(&s, &half).unwrap() - 6.020_599_913_279_624).abs() < 1e-6);
        assert!((snr(&s, &neg).unwrap() + 6.020_599_913_279_624).abs() < 1e-6);
        assert_eq!(snr(&s, &s).unwrap(), SNR_CAP_DB);
        assert!(matches!(snr(&[0.0; 4], &[1.0; 4]), Err(Error::ZeroReference)));
        assert!(matches!(snr(&[1.0; 4], &[1.0; 3]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn snr_scale_covariant() {
        let s = noise(500, 2);
        let e = noise(500, 3);
        let t: Vec<f64> = s.iter().zip(&e).map(|(a, b)| a - 0.1 * b).collect();
        let base = snr(&s, &t).unwrap();
        for c in [1e-3, 0.5, 7.0, 1e4] {
            let sc: Vec<f64> = s.iter().map(|v| v * c).collect();
            let tc: Vec<f64> = t.iter().map(|v| v * c).collect();
            assert!((snr(&sc, &tc).unwrap() - base).abs() < 1e-9);
        }
    }

    #[test]
    fn gap_snr() {
        let s = noise(400, 4);
        let gaps = [GapSpec::new(10, 30), GapSpec::new(200, 50)];
        let mut zeroed = s.clone();
        let mut perfect = s.clone();
        for g in &gaps {
            zeroed[g.range()].iter_mut().for_each(|v| *v = 0.0);
            perfect[g.range()].iter_mut().for_each(|v| *v = *v);
        }
        assert!(snr_gap(&s, &zeroed, &gaps).unwrap().abs() < 1e-9);
        assert_eq!(snr_gap(&s, &perfect, &gaps).unwrap(), SNR_CAP_DB);
        assert!(snr_gap(&s, &zeroed, &gaps).unwrap() <= snr(&s, &zeroed).unwrap());
    }

    #[test]
    fn lsd_cases() {
        let s = noise(8192, 5);
        assert_eq!(log_spectral_distance(&s, &s, 2048, 512).unwrap(), 0.0);
        let double: Vec<f64> = s.iter().map(|v| 2.0 * v).collect();
        let d = log_spectral_distance(&s, &double, 2048, 512).unwrap();
        assert!((d - 10.0 * 4f64.log10()).abs() < 1e-9, "{d}");
        let silence = vec![0.0; 8192];
        let d = log_spectral_distance(&s, &silence, 2048, 512).unwrap();
        assert!(d.is_finite() && d > 50.0, "{d}");
        assert!(matches!(log_spectral_distance(&s[..100], &s[..100], 2048, 512), Err(Error::TooShort { .. })));
    }

    #[test]
    fn evaluate_fields() {
        let s: Vec<f64> = noise(5000, 6).iter().map(|v| v * 1000.0).collect();
        let gaps = [GapSpec::new(1000, 300)];
        let rep = evaluate(&s, &s, &gaps).unwrap();
        assert_eq!(rep.snr_full, SNR_CAP_DB);
        assert_eq!(rep.snr_gap, Some(SNR_CAP_DB));
        assert_eq!(rep.lsd, Some(0.0));
        assert!((rep.pearson_r.unwrap() - 1.0).abs() < 1e-12);
        let mut z = s.clone();
        z[1000..1300].iter_mut().for_each(|v| *v = 0.0);
        let rep = evaluate(&s, &z, &gaps).unwrap();
        assert!(rep.snr_gap.unwrap().abs() < 1e-9);
        assert_eq!(rep.per_gap.len(), 1);
        let v = serde_json::to_value(&rep).unwrap();
        for key in ["snr_full", "snr_gap", "lsd", "pearson_r", "per_gap"] {
            assert!(v.get(key).is_some(), "{key}");
        }
    }

    #[test]
    fn gap_unit_conversion() {
        let gaps = simulate_gaps(441_000, 44100, &[100.0], 1, 0).unwrap();
        assert_eq!(gaps.len(), 1);
        assert_eq!(gaps[0].len, 4410);
        assert!(gaps[0].start >= 22050 && gaps[0].end() <= 441_000 - 22050);
        assert_eq!(ms_to_samples(300.0, 44100), 13230);
    }

    #[test]
    fn gaps_that_cannot_fit() {
        assert!(matches!(simulate_gaps(44100, 44100, &[300.0], 1, 0), Err(Error::DoesNotFit(_))));
        assert!(matches!(simulate_gaps(100_000, 16000, &[1000.0], 6, 0), Err(Error::DoesNotFit(_))));
    }

    #[test]
    fn many_gaps_disjoint_and_deterministic() {
        let gaps = simulate_gaps(60 * 44100, 44100, &[100.0, 300.0], 5, 9).unwrap();
        assert_eq!(gaps.len(), 10);
        assert_eq!(gaps, simulate_gaps(60 * 44100, 44100, &[100.0, 300.0], 5, 9).unwrap());
        for (i, a) in gaps.iter().enumerate() {
            for b in &gaps[i + 1..] {
                assert!(a.end() <= b.start || b.end() <= a.start);
            }
        }
        assert!(gaps[..5].iter().all(|g| g.len == 4410));
        assert!(gaps[5..].iter().all(|g| g.len == 13230));
    }
}
