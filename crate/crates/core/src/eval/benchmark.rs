use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};

use super::{log_spectral_distance, simulate_gaps, snr, snr_gap, LSD_DISCLAIMER, LSD_FRAME, LSD_HOP};
use crate::audio_io::{read_wav, write_wav, AudioClip};
use crate::error::{Error, Result};
use crate::regress::{reconstruct_gap, GapSpec, Method, ReconstructConfig};
use crate::rng::derive_seed;
use crate::stego::{self_embed, EmbedOptions};

pub const CSV_HEADER: [&str; 8] = ["clip", "method", "gap_ms", "snr_full", "snr_gap", "lsd", "wall_ms", "error"];

fn default_methods() -> Vec<Method> {
    Method::ALL.to_vec()
}

fn one() -> usize {
    1
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkPlan {
    pub clips: Vec<PathBuf>,
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub gap_lengths_ms: Vec<f64>,
    #[serde(default = "one")]
    pub gaps_per_clip: usize,
    #[serde(default)]
    pub seed: u64,
    #[serde(default)]
    pub reconstruct: ReconstructConfig,
    /// Off by default so that repeated runs give byte-identical CSVs.
    #[serde(default)]
    pub record_wall_time: bool,
    #[serde(default = "yes")]
    pub write_audio: bool,
}

impl BenchmarkPlan {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let plan: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.clips.is_empty() || self.methods.is_empty() || self.gap_lengths_ms.is_empty() {
            return Err(Error::InvalidConfig("plan needs clips, methods and gap lengths".into()));
        }
        if self.gaps_per_clip == 0 {
            return Err(Error::InvalidConfig("gaps_per_clip must be positive".into()));
        }
        if self.gap_lengths_ms.iter().any(|ms| !ms.is_finite() || *ms <= 0.0) {
            return Err(Error::InvalidConfig("gap lengths must be positive".into()));
        }
        Ok(())
    }
}

/// One (clip, gap, method) outcome. Metrics are absent when `error` is set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchRow {
    pub clip: String,
    pub method: Method,
    pub gap_ms: f64,
    pub snr_full: Option<f64>,
    pub snr_gap: Option<f64>,
    pub lsd: Option<f64>,
    pub wall_ms: f64,
    pub error: Option<String>,
    /// Index of the scored case this row belongs to.
    #[serde(skip)]
    pub case: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub tests: usize,
    pub wins: BTreeMap<String, BTreeMap<String, usize>>,
    pub note: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchmarkReport {
    pub rows: Vec<BenchRow>,
    pub summary: Summary,
}

struct Scores {
    snr_full: f64,
    snr_gap: Option<f64>,
    lsd: Option<f64>,
}

fn score(reference: &[f64], test: &[f64], gap: GapSpec) -> Result<Scores> {
    let optional = |r: Result<f64>| match r {
        Ok(v) => Ok(Some(v)),
        Err(Error::ZeroReference | Error::TooShort { .. }) => Ok(None),
        Err(e) => Err(e),
    };
    Ok(Scores {
        snr_full: snr(reference, test)?,
        snr_gap: optional(snr_gap(reference, test, &[gap]))?,
        lsd: optional(log_spectral_distance(reference, test, LSD_FRAME, LSD_HOP))?,
    })
}

fn error_row(clip: &str, method: Method, gap_ms: f64, err: &Error) -> BenchRow {
    BenchRow {
        clip: clip.to_string(),
        method,
        gap_ms,
        snr_full: None,
        snr_gap: None,
        lsd: None,
        wall_ms: 0.0,
        error: Some(err.name().to_string()),
        case: None,
    }
}

fn clip_stem(path: &Path) -> String {
    path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "clip".into())
}

/// Run every method on every simulated gap of every clip.
///
/// The rf method reconstructs from the self-embedded clip; the baselines
/// work on the plain original. Both are scored against the original.
/// Writes `results.csv`, `summary.json` and, if enabled, reconstructed audio
/// under `audio/`. A failing case produces rows with an `error` tag and the
/// run continues.
pub fn run_benchmark(plan: &BenchmarkPlan, out_dir: impl AsRef<Path>) -> Result<BenchmarkReport> {
    plan.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir)?;
    if plan.write_audio {
        fs::create_dir_all(out_dir.join("audio"))?;
    }

    let mut rows = Vec::new();
    let mut cases = 0usize;
    for (ci, path) in plan.clips.iter().enumerate() {
        let name = path.to_string_lossy().into_owned();
        let prepared = read_wav(path).and_then(|clip| {
            let gaps = simulate_gaps(
                clip.len(),
                clip.sample_rate,
                &plan.gap_lengths_ms,
                plan.gaps_per_clip,
                derive_seed(plan.seed, ci as u64),
            )?;
            let (stego, manifest) = self_embed(&clip, &EmbedOptions::default())?;
            Ok((clip, stego, manifest, gaps))
        });
        let (clip, stego, manifest, gaps) = match prepared {
            Ok(p) => p,
            Err(e) => {
                for &ms in &plan.gap_lengths_ms {
                    rows.extend(plan.methods.iter().map(|&m| error_row(&name, m, ms, &e)));
                }
                continue;
            }
        };
        let reference = clip.to_f64();
        for (gi, gap) in gaps.iter().enumerate() {
            let gap_ms = plan.gap_lengths_ms[gi / plan.gaps_per_clip];
            let case = cases;
            cases += 1;
            let mut case_manifest = manifest.clone();
            case_manifest.gaps = vec![*gap];
            for &method in &plan.methods {
                let source = if method == Method::Rf { &stego } else { &clip };
                let mut corrupted: AudioClip = source.clone();
                corrupted.samples[gap.range()].iter_mut().for_each(|s| *s = 0);

                let started = Instant::now();
                let result = reconstruct_gap(&corrupted, &case_manifest, method, &plan.reconstruct);
                let wall_ms = if plan.record_wall_time { started.elapsed().as_secs_f64() * 1000.0 } else { 0.0 };

                let row = result.and_then(|recon| {
                    if plan.write_audio {
                        let file = format!("c{ci}_{}_g{gi}_{}.wav", clip_stem(path), method);
                        write_wav(&recon, out_dir.join("audio").join(file))?;
                    }
                    let s = score(&reference, &recon.to_f64(), *gap)?;
                    Ok(BenchRow {
                        clip: name.clone(),
                        method,
                        gap_ms,
                        snr_full: Some(s.snr_full),
                        snr_gap: s.snr_gap,
                        lsd: s.lsd,
                        wall_ms,
                        error: None,
                        case: Some(case),
                    })
                });
                rows.push(row.unwrap_or_else(|e| error_row(&name, method, gap_ms, &e)));
            }
        }
    }

    let summary = summarize(&rows, &plan.methods, cases);
    write_csv(&rows, &out_dir.join("results.csv"))?;
    fs::write(out_dir.join("summary.json"), serde_json::to_string_pretty(&summary)? + "\n")?;
    Ok(BenchmarkReport { rows, summary })
}

/// Count, per metric, how often each method is best on a case. Ties go to
/// the method listed first in the plan.
fn summarize(rows: &[BenchRow], methods: &[Method], cases: usize) -> Summary {
    type Pick = fn(&BenchRow) -> Option<f64>;
    let metrics: [(&str, Pick, bool); 3] = [
        ("snr_full", |r| r.snr_full, true),
        ("snr_gap", |r| r.snr_gap, true),
        ("lsd", |r| r.lsd, false),
    ];
    let mut wins = BTreeMap::new();
    for (metric, pick, higher) in metrics {
        let mut counts: BTreeMap<String, usize> = methods.iter().map(|m| (m.to_string(), 0)).collect();
        for case in 0..cases {
            let mut best: Option<(Method, f64)> = None;
            for m in methods {
                let value = rows.iter().find(|r| r.case == Some(case) && r.method == *m).and_then(pick);
                if let Some(v) = value {
                    let better = match best {
                        None => true,
                        Some((_, b)) => if higher { v > b } else { v < b },
                    };
                    if better {
                        best = Some((*m, v));
                    }
                }
            }
            if let Some((m, _)) = best {
                *counts.entry(m.to_string()).or_default() += 1;
            }
        }
        wins.insert(metric.to_string(), counts);
    }
    Summary { tests: cases, wins, note: LSD_DISCLAIMER.to_string() }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x:.6}")).unwrap_or_default()
}

fn write_csv(rows: &[BenchRow], path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.clip.clone(),
            r.method.to_string(),
            format!("{}", r.gap_ms),
            fmt_opt(r.snr_full),
            fmt_opt(r.snr_gap),
            fmt_opt(r.lsd),
            format!("{:.3}", r.wall_ms),
            r.error.clone().unwrap_or_default(),
        ])?;
    }
    w.flush()?;
    Ok(())
}
