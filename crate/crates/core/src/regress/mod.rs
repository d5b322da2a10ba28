//! Gap reconstruction: split the feature rows by gap membership, fit a forest
//! on the intact region, predict the gap and splice the estimate back in.

mod forest;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use forest::{bootstrap_rows, rf_predict, rf_train, ForestConfig, ForestModel, Node, Tree, TIE_TOLERANCE};

use crate::audio_io::{pcm_from_f64, AudioClip};
use crate::baselines::{self, JanssenConfig};
use crate::error::{Error, Result};
use crate::features::{scalogram_features, FeatureTable, ScalogramConfig};
use crate::rng::SplitMix64;
use crate::stego::{extract_side_info, Manifest};

/// A run of `len` missing samples starting at `start`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct GapSpec {
    pub start: usize,
    pub len: usize,
}

impl GapSpec {
    pub fn new(start: usize, len: usize) -> Self {
        Self { start, len }
    }

    pub fn end(&self) -> usize {
        self.start + self.len
    }

    pub fn contains(&self, i: usize) -> bool {
        (self.start..self.end()).contains(&i)
    }

    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.end()
    }

    /// Non-empty, inside `[0, len)` and pairwise disjoint.
    pub fn check_all(gaps: &[GapSpec], len: usize) -> Result<()> {
        for g in gaps {
            if g.len == 0 || g.end() > len {
                return Err(Error::GapOutOfRange { start: g.start, end: g.end(), len });
            }
        }
        let mut sorted = gaps.to_vec();
        sorted.sort_unstable();
        for w in sorted.windows(2) {
            if w[1].start < w[0].end() {
                return Err(Error::OverlappingGaps(w[1].start));
            }
        }
        Ok(())
    }
}

/// Membership mask for `gaps` over `len` samples.
pub fn gap_mask(gaps: &[GapSpec], len: usize) -> Vec<bool> {
    let mut mask = vec![false; len];
    for g in gaps {
        mask[g.range()].iter_mut().for_each(|m| *m = true);
    }
    mask
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainTestSplit {
    pub train_x: FeatureTable,
    pub train_y: Vec<f64>,
    pub train_indices: Vec<usize>,
    pub test_x: FeatureTable,
    pub test_indices: Vec<usize>,
}

const SUBSAMPLE_SALT: u64 = 0x5355_4253_414D_504C;

/// Rows inside any gap become test rows; the rest train against `signal`.
///
/// When more than `max_train_rows` training rows exist, a uniform subset is
/// kept (partial Fisher-Yates seeded from `seed`), in ascending time order.
/// `train_indices` always lists the full training region.
pub fn split_train_test(
    features: &FeatureTable,
    signal: &[f64],
    gaps: &[GapSpec],
    max_train_rows: usize,
    seed: u64,
) -> Result<TrainTestSplit> {
    let n = signal.len();
    if features.n_rows() != n {
        return Err(Error::LengthMismatch { left: features.n_rows(), right: n });
    }
    GapSpec::check_all(gaps, n)?;
    let mask = gap_mask(gaps, n);
    let (test_indices, train_indices): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| mask[i]);
    if train_indices.is_empty() {
        return Err(Error::EmptyTrainSet);
    }
    let mut kept = train_indices.clone();
    if kept.len() > max_train_rows.max(1) {
        let keep = max_train_rows.max(1);
        let mut rng = SplitMix64::new(seed ^ SUBSAMPLE_SALT);
        for i in 0..keep {
            let j = i + rng.below(kept.len() - i);
            kept.swap(i, j);
        }
        kept.truncate(keep);
        kept.sort_unstable();
    }
    Ok(TrainTestSplit {
        train_x: features.select_rows(&kept),
        train_y: kept.iter().map(|&i| signal[i]).collect(),
        train_indices,
        test_x: features.select_rows(&test_indices),
        test_indices,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Rf,
    Janssen,
    Linear,
    Zero,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Rf, Method::Janssen, Method::Linear, Method::Zero];

    pub fn as_str(&self) -> &'static str {
        match self {
            Method::Rf => "rf",
            Method::Janssen => "janssen",
            Method::Linear => "linear",
            Method::Zero => "zero",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown method {s:?}")))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct ReconstructConfig {
    pub forest: ForestConfig,
    pub janssen: JanssenConfig,
    pub scalogram: ScalogramConfig,
}

/// Feature table for a stego clip as the receiver sees it: declared gap
/// samples are treated as lost (zero) before anything is read.
pub fn receiver_features(corrupted: &AudioClip, manifest: &Manifest, scalogram: &ScalogramConfig) -> Result<FeatureTable> {
    let zeroed = zero_gaps(corrupted, &manifest.gaps);
    let side = extract_side_info(&zeroed, manifest)?;
    scalogram_features(&side, corrupted.sample_rate, scalogram)
}

fn zero_gaps(clip: &AudioClip, gaps: &[GapSpec]) -> AudioClip {
    let mut out = clip.clone();
    for g in gaps {
        out.samples[g.range()].iter_mut().for_each(|s| *s = 0);
    }
    out
}

/// Estimate every gap listed in the manifest with `method` and splice the
/// estimate into a copy of `corrupted`. Samples outside the gaps are returned
/// untouched.
pub fn reconstruct_gap(
    corrupted: &AudioClip,
    manifest: &Manifest,
    method: Method,
    config: &ReconstructConfig,
) -> Result<AudioClip> {
    if manifest.gaps.is_empty() {
        return Err(Error::NoGaps);
    }
    manifest.check_clip(corrupted)?;
    GapSpec::check_all(&manifest.gaps, corrupted.len())?;
    let mut gaps = manifest.gaps.clone();
    gaps.sort_unstable();

    let signal = zero_gaps(corrupted, &gaps).to_f64();
    let estimate: Vec<f64> = match method {
        Method::Rf => {
            let features = receiver_features(corrupted, manifest, &config.scalogram)?;
            let split = split_train_test(&features, &signal, &gaps, config.forest.max_train_rows, config.forest.seed)?;
            let model = rf_train(&split.train_x, &split.train_y, &config.forest)?;
            let predicted = rf_predict(&model, &split.test_x)?;
            let mut out = signal;
            for (&i, p) in split.test_indices.iter().zip(predicted) {
                out[i] = p;
            }
            out
        }
        Method::Zero => gaps.iter().try_fold(signal, |s, g| baselines::fill_zero(&s, *g))?,
        Method::Linear => gaps.iter().try_fold(signal, |s, g| baselines::fill_linear(&s, *g))?,
        Method::Janssen => gaps
            .iter()
            .try_fold(signal, |s, g| baselines::janssen_inpaint(&s, *g, &config.janssen))?,
    };

    let mut out = corrupted.clone();
    for g in &gaps {
        for i in g.range() {
            out.samples[i] = pcm_from_f64(estimate[i]);
        }
    }
    Ok(out)
}
