//! Keyed self-embedding of the halftoned signal into its own sample LSBs, and
//! recovery of the smoothed side information from a (possibly gapped) copy.

use serde::{Deserialize, Serialize};

use crate::audio_io::{scale_to_bytes, AudioClip, ByteSignal, ScaleParams};
use crate::error::{Error, Result};
use crate::hcr::{self, BitPlane, GaussianConfig};
use crate::regress::GapSpec;
use crate::rng::{shuffle, SplitMix64};

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StegoKey {
    pub seed: u64,
}

impl StegoKey {
    /// The default key is the number of samples being protected.
    pub fn for_length(len: usize) -> Self {
        Self { seed: len as u64 }
    }
}

/// A bijection on `0..len`. Applying it to a sequence `v` yields `w` with
/// `w[i] = v[mapping[i]]`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl Permutation {
    pub fn from_mapping(mapping: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; mapping.len()];
        for &m in &mapping {
            if m >= mapping.len() || std::mem::replace(&mut seen[m], true) {
                return Err(Error::NotABijection);
            }
        }
        Ok(Self { mapping })
    }

    pub fn identity(len: usize) -> Self {
        Self { mapping: (0..len).collect() }
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn len(&self) -> usize {
        self.mapping.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mapping.is_empty()
    }

    /// `w[i] = v[mapping[i]]`.
    pub fn apply<T: Copy>(&self, v: &[T]) -> Vec<T> {
        assert_eq!(v.len(), self.mapping.len());
        self.mapping.iter().map(|&m| v[m]).collect()
    }

    /// Inverse of [`Permutation::apply`]: `v[mapping[i]] = w[i]`.
    pub fn unapply<T: Copy + Default>(&self, w: &[T]) -> Vec<T> {
        assert_eq!(w.len(), self.mapping.len());
        let mut v = vec![T::default(); w.len()];
        for (i, &m) in self.mapping.iter().enumerate() {
            v[m] = w[i];
        }
        v
    }
}

/// Fisher-Yates over `0..length` driven by SplitMix64 seeded with the key.
pub fn make_permutation(length: usize, key: StegoKey) -> Result<Permutation> {
    if length == 0 {
        return Err(Error::ZeroLength);
    }
    let mut mapping: Vec<usize> = (0..length).collect();
    shuffle(&mut mapping, &mut SplitMix64::new(key.seed));
    Ok(Permutation { mapping })
}

pub fn invert_permutation(p: &Permutation) -> Result<Permutation> {
    let n = p.mapping.len();
    let mut inv = vec![usize::MAX; n];
    for (i, &m) in p.mapping.iter().enumerate() {
        if m >= n || inv[m] != usize::MAX {
            return Err(Error::NotABijection);
        }
        inv[m] = i;
    }
    Ok(Permutation { mapping: inv })
}

/// Overwrite bit 0 of every sample. Bits must be 0 or 1.
pub fn embed_lsb(samples: &[i16], bits: &[u8]) -> Result<Vec<i16>> {
    if samples.len() != bits.len() {
        return Err(Error::LengthMismatch { left: samples.len(), right: bits.len() });
    }
    Ok(samples.iter().zip(bits).map(|(&s, &b)| (s & !1) | i16::from(b & 1)).collect())
}

pub fn extract_lsb(samples: &[i16]) -> Vec<u8> {
    samples.iter().map(|&s| (s & 1) as u8).collect()
}

/// Sidecar record that lets a receiver undo the embedding. Field names are the
/// on-disk JSON schema.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub version: u32,
    pub seed: u64,
    pub orig_len: u64,
    pub matrix_rows: u32,
    pub matrix_cols: u32,
    pub scale_min: f64,
    pub scale_max: f64,
    pub degenerate: bool,
    pub sample_rate: u32,
    pub sigma: f64,
    #[serde(default)]
    pub gaps: Vec<GapSpec>,
}

impl Manifest {
    pub fn key(&self) -> StegoKey {
        StegoKey { seed: self.seed }
    }

    pub fn scale(&self) -> ScaleParams {
        ScaleParams { min_val: self.scale_min, max_val: self.scale_max, degenerate: self.degenerate }
    }

    pub fn gaussian(&self) -> GaussianConfig {
        GaussianConfig { sigma: self.sigma }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let m: Manifest = serde_json::from_str(text)?;
        m.validate()?;
        Ok(m)
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let mut text = self.to_json()?;
        text.push('\n');
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != MANIFEST_VERSION {
            return Err(Error::ManifestMismatch(format!("unsupported version {}", self.version)));
        }
        if (self.matrix_rows as u64) * (self.matrix_cols as u64) < self.orig_len {
            return Err(Error::ManifestMismatch("matrix smaller than signal".into()));
        }
        if self.scale_max < self.scale_min {
            return Err(Error::ManifestMismatch("scale_max < scale_min".into()));
        }
        if !(self.sigma > 0.0) {
            return Err(Error::NonPositiveSigma(self.sigma));
        }
        GapSpec::check_all(&self.gaps, self.orig_len as usize)
    }

    /// Confirm the clip is the one this manifest describes.
    pub fn check_clip(&self, clip: &AudioClip) -> Result<()> {
        if clip.len() as u64 != self.orig_len {
            return Err(Error::ManifestMismatch(format!(
                "clip has {} samples, manifest {}",
                clip.len(),
                self.orig_len
            )));
        }
        if clip.sample_rate != self.sample_rate {
            return Err(Error::ManifestMismatch(format!(
                "clip rate {} Hz, manifest {} Hz",
                clip.sample_rate, self.sample_rate
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmbedOptions {
    /// Permutation key; defaults to the sample count.
    pub seed: Option<u64>,
    pub sigma: f64,
    /// Matrix rows; near-square when absent.
    pub rows: Option<usize>,
}

impl Default for EmbedOptions {
    fn default() -> Self {
        Self { seed: None, sigma: GaussianConfig::default().sigma, rows: None }
    }
}

/// The halftone of a clip: byte-scale, fold into a matrix, dither.
pub fn halftone(clip: &AudioClip, rows: Option<usize>) -> Result<(ByteSignal, BitPlane)> {
    let scaled = scale_to_bytes(&clip.to_f64())?;
    let matrix = hcr::reshape_to_matrix(&scaled.values, rows)?;
    let plane = hcr::dither(&matrix)?;
    Ok((scaled, plane))
}

pub const MIN_EMBED_LEN: usize = 4;

/// Embed a permuted halftone of `clip` into its own LSBs.
pub fn self_embed(clip: &AudioClip, options: &EmbedOptions) -> Result<(AudioClip, Manifest)> {
    if clip.len() < MIN_EMBED_LEN {
        return Err(Error::TooShort { needed: MIN_EMBED_LEN, got: clip.len() });
    }
    if !(options.sigma > 0.0) {
        return Err(Error::NonPositiveSigma(options.sigma));
    }
    let (scaled, plane) = halftone(clip, options.rows)?;
    let key = options.seed.map_or_else(|| StegoKey::for_length(clip.len()), |seed| StegoKey { seed });
    let perm = make_permutation(clip.len(), key)?;
    let payload = perm.apply(&plane.flatten());
    let stego = AudioClip::new(embed_lsb(&clip.samples, &payload)?, clip.sample_rate)?;
    let manifest = Manifest {
        version: MANIFEST_VERSION,
        seed: key.seed,
        orig_len: clip.len() as u64,
        matrix_rows: plane.rows as u32,
        matrix_cols: plane.cols as u32,
        scale_min: scaled.scale.min_val,
        scale_max: scaled.scale.max_val,
        degenerate: scaled.scale.degenerate,
        sample_rate: clip.sample_rate,
        sigma: options.sigma,
        gaps: Vec::new(),
    };
    Ok((stego, manifest))
}

/// LSBs of `stego` with the permutation undone: the halftone bitstream as far
/// as the file still carries it.
pub fn recover_bitstream(stego: &AudioClip, manifest: &Manifest) -> Result<Vec<u8>> {
    manifest.check_clip(stego)?;
    let perm = make_permutation(stego.len(), manifest.key())?;
    Ok(perm.unapply(&extract_lsb(&stego.samples)))
}

/// Smoothed side information, one value in [0, 1] per sample.
pub fn extract_side_info(stego: &AudioClip, manifest: &Manifest) -> Result<Vec<f64>> {
    manifest.validate()?;
    let bits = recover_bitstream(stego, manifest)?;
    let plane = BitPlane::from_bits(&bits, manifest.matrix_rows as usize, manifest.matrix_cols as usize)?;
    let smoothed = hcr::inverse_halftone(&plane, &manifest.gaussian())?;
    Ok(hcr::flatten_matrix(&smoothed))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::synth;

    #[test]
    fn singleton_permutation() {
        for seed in [0, 1, 99, u64::MAX] {
            assert_eq!(make_permutation(1, StegoKey { seed }).unwrap().mapping(), &[0]);
        }
        assert!(matches!(make_permutation(0, StegoKey { seed: 1 }), Err(Error::ZeroLength)));
    }

    // SplitMix64(seed=8), swap i <-> next % (i+1) for i = 7..1; the literal
    // was cross-checked against a separate Python implementation.
    #[test]
    fn golden_length_eight() {
        let mut rng = SplitMix64::new(8);
        let draws: Vec<u64> = (0..7).map(|_| rng.next_u64()).collect();
        let mut expect: Vec<usize> = (0..8).collect();
        for (k, i) in (1..8).rev().enumerate() {
            expect.swap(i, (draws[k] % (i as u64 + 1)) as usize);
        }
        let p = make_permutation(8, StegoKey { seed: 8 }).unwrap();
        assert_eq!(p.mapping(), expect.as_slice());
        assert_eq!(p.mapping(), &[3, 5, 0, 2, 4, 1, 7, 6]);
    }

    #[test]
    fn invert_small() {
        let p = Permutation::from_mapping(vec![2, 0, 1]).unwrap();
        assert_eq!(invert_permutation(&p).unwrap().mapping(), &[1, 2, 0]);
        let id = Permutation::identity(5);
        assert_eq!(invert_permutation(&id).unwrap(), id);
        assert!(matches!(Permutation::from_mapping(vec![0, 0]), Err(Error::NotABijection)));
        assert!(matches!(Permutation::from_mapping(vec![0, 2]), Err(Error::NotABijection)));
    }

    #[test]
    fn inverse_composes_to_identity() {
        for (len, seed) in [(2usize, 3u64), (17, 5), (1000, 1000), (100_000, 42)] {
            let p = make_permutation(len, StegoKey { seed }).unwrap();
            let q = invert_permutation(&p).unwrap();
            for i in 0..len {
                assert_eq!(q.mapping()[p.mapping()[i]], i);
                assert_eq!(p.mapping()[q.mapping()[i]], i);
            }
            assert_eq!(invert_permutation(&q).unwrap(), p);
            let v: Vec<u32> = (0..len as u32).map(|x| x.wrapping_mul(2654435761)).collect();
            assert_eq!(p.unapply(&p.apply(&v)), v);
            assert_eq!(q.apply(&p.apply(&v)), v);
        }
    }

    #[test]
    fn lsb_examples() {
        assert_eq!(embed_lsb(&[0x7FFE], &[1]).unwrap(), vec![0x7FFF]);
        assert_eq!(embed_lsb(&[0x7FFF], &[1]).unwrap(), vec![0x7FFF]);
        assert_eq!(embed_lsb(&[-32768, -1], &[1, 0]).unwrap(), vec![-32767, -2]);
        assert_eq!(extract_lsb(&[0, 1, 2, 3]), vec![0, 1, 0, 1]);
        assert_eq!(extract_lsb(&[-1, -2]), vec![1, 0]);
        assert_eq!(extract_lsb(&[0; 6]), vec![0; 6]);
        assert!(matches!(embed_lsb(&[1, 2], &[1]), Err(Error::LengthMismatch { .. })));
    }

    #[test]
    fn self_embed_round_trip() {
        let clip = synth::music(16000, 2.0, 3);
        let (stego, manifest) = self_embed(&clip, &EmbedOptions::default()).unwrap();
        assert_eq!(manifest.seed, clip.len() as u64);
        assert!(clip.samples.iter().zip(&stego.samples).all(|(a, b)| (a - b).abs() <= 1));
        let (_, plane) = halftone(&clip, None).unwrap();
        assert_eq!(recover_bitstream(&stego, &manifest).unwrap(), plane.flatten());

        let side = extract_side_info(&stego, &manifest).unwrap();
        let direct = hcr::flatten_matrix(&hcr::inverse_halftone(&plane, &GaussianConfig::default()).unwrap());
        assert_eq!(side, direct);
    }

    #[test]
    fn self_embed_custom_seed_and_determinism() {
        let clip = synth::music(8000, 1.0, 9);
        let opts = EmbedOptions { seed: Some(77), ..Default::default() };
        let (a, ma) = self_embed(&clip, &opts).unwrap();
        let (b, mb) = self_embed(&clip, &opts).unwrap();
        assert_eq!((a.clone(), ma.clone()), (b, mb));
        assert_eq!(ma.seed, 77);
        let (_, plane) = halftone(&clip, None).unwrap();
        assert_eq!(recover_bitstream(&a, &ma).unwrap(), plane.flatten());
    }

    #[test]
    fn self_embed_too_short() {
        let clip = AudioClip::new(vec![1, 2, 3], 8000).unwrap();
        assert!(matches!(self_embed(&clip, &EmbedOptions::default()), Err(Error::TooShort { .. })));
    }

    #[test]
    fn manifest_mismatch() {
        let clip = synth::music(8000, 1.0, 2);
        let (stego, manifest) = self_embed(&clip, &EmbedOptions::default()).unwrap();
        let shorter = AudioClip::new(stego.samples[1..].to_vec(), 8000).unwrap();
        assert!(matches!(extract_side_info(&shorter, &manifest), Err(Error::ManifestMismatch(_))));
        let resampled = AudioClip::new(stego.samples.clone(), 16000).unwrap();
        assert!(matches!(extract_side_info(&resampled, &manifest), Err(Error::ManifestMismatch(_))));
    }

    #[test]
    fn manifest_json_schema() {
        let m = Manifest {
            version: 1,
            seed: 9,
            orig_len: 10,
            matrix_rows: 3,
            matrix_cols: 4,
            scale_min: -5.0,
            scale_max: 7.0,
            degenerate: false,
            sample_rate: 44100,
            sigma: 1.5,
            gaps: vec![GapSpec { start: 2, len: 3 }],
        };
        let v: serde_json::Value = serde_json::from_str(&m.to_json().unwrap()).unwrap();
        let keys: Vec<&str> = v.as_object().unwrap().keys().map(String::as_str).collect();
        let mut expected = vec![
            "version", "seed", "orig_len", "matrix_rows", "matrix_cols", "scale_min", "scale_max",
            "degenerate", "sample_rate", "sigma", "gaps",
        ];
        let mut got = keys.clone();
        got.sort_unstable();
        expected.sort_unstable();
        assert_eq!(got, expected);
        assert_eq!(v["gaps"][0]["start"], 2);
        assert_eq!(v["gaps"][0]["len"], 3);
        assert_eq!(Manifest::from_json(&m.to_json().unwrap()).unwrap(), m);

        let bad = m.to_json().unwrap().replace("\"matrix_cols\": 4", "\"matrix_cols\": 3");
        assert!(matches!(Manifest::from_json(&bad), Err(Error::ManifestMismatch(_))));
    }
}
