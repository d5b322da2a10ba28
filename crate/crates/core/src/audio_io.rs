//! PCM16 WAV reading/writing and the byte-scaled signal domain.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Mono 16-bit PCM audio.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AudioClip {
    pub samples: Vec<i16>,
    pub sample_rate: u32,
}

impl AudioClip {
    pub fn new(samples: Vec<i16>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive".into()));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.samples.iter().map(|&s| f64::from(s)).collect()
    }

    /// Round and clamp real-valued PCM units into a clip.
    pub fn from_f64(values: &[f64], sample_rate: u32) -> Result<Self> {
        Self::new(values.iter().map(|&v| pcm_from_f64(v)).collect(), sample_rate)
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / f64::from(self.sample_rate)
    }
}

/// Round to nearest and clamp into the 16-bit range. NaN maps to 0.
pub fn pcm_from_f64(v: f64) -> i16 {
    if v.is_nan() {
        0
    } else {
        v.round().clamp(f64::from(i16::MIN), f64::from(i16::MAX)) as i16
    }
}

/// Affine map used to move a signal into [0, 255] and back.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleParams {
    pub min_val: f64,
    pub max_val: f64,
    pub degenerate: bool,
}

/// Real values in [0, 255] together with the map that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct ByteSignal {
    pub values: Vec<f64>,
    pub scale: ScaleParams,
}

pub fn scale_to_bytes(samples: &[f64]) -> Result<ByteSignal> {
    if samples.is_empty() {
        return Err(Error::EmptyInput);
    }
    let (min_val, max_val) = samples
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)));
    let degenerate = max_val == min_val;
    let values = if degenerate {
        vec![0.0; samples.len()]
    } else {
        let range = max_val - min_val;
        samples
            .iter()
            .map(|&x| ((x - min_val) / range * 255.0).clamp(0.0, 255.0))
            .collect()
    };
    Ok(ByteSignal { values, scale: ScaleParams { min_val, max_val, degenerate } })
}

pub fn unscale_from_bytes(signal: &ByteSignal) -> Vec<f64> {
    let ScaleParams { min_val, max_val, degenerate } = signal.scale;
    if degenerate {
        return vec![min_val; signal.values.len()];
    }
    let range = max_val - min_val;
    signal.values.iter().map(|&v| v / 255.0 * range + min_val).collect()
}

const WAVE_FORMAT_PCM: u16 = 1;
const HEADER_LEN: usize = 44;

/// Serialize a clip as a canonical 44-byte-header mono PCM16 WAV.
pub fn encode_wav(clip: &AudioClip) -> Vec<u8> {
    let data_len = (clip.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(HEADER_LEN + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVE");
    out.extend_from_slice(b"fmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&WAVE_FORMAT_PCM.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&clip.sample_rate.to_le_bytes());
    out.extend_from_slice(&(clip.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for s in &clip.samples {
        out.extend_from_slice(&s.to_le_bytes());
    }
    out
}

pub fn write_wav(clip: &AudioClip, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_wav(clip))?;
    Ok(())
}

/// Read a mono PCM16 file. Multichannel input is rejected.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    read_wav_channel(path, None)
}

/// Read a PCM16 file, taking `channel` from multichannel input.
pub fn read_wav_channel(path: impl AsRef<Path>, channel: Option<u16>) -> Result<AudioClip> {
    decode_wav(&fs::read(path)?, channel)
}

struct Format {
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

fn u16_at(b: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([b[at], b[at + 1]])
}

fn u32_at(b: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([b[at], b[at + 1], b[at + 2], b[at + 3]])
}

pub fn decode_wav(bytes: &[u8], channel: Option<u16>) -> Result<AudioClip> {
    if bytes.len() < 12 || &bytes[0..4] != b"RIFF" || &bytes[8..12] != b"WAVE" {
        return Err(Error::NotWav("missing RIFF/WAVE signature".into()));
    }
    let mut pos = 12;
    let mut format: Option<Format> = None;
    while pos + 8 <= bytes.len() {
        let id = &bytes[pos..pos + 4];
        let size = u32_at(bytes, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + 16 > bytes.len() {
                    return Err(Error::TruncatedFile("fmt chunk".into()));
                }
                let code = u16_at(bytes, body);
                let bits = u16_at(bytes, body + 14);
                if code != WAVE_FORMAT_PCM {
                    return Err(Error::UnsupportedEncoding(format!("format code {code}")));
                }
                if bits != 16 {
                    return Err(Error::UnsupportedEncoding(format!("{bits}-bit samples")));
                }
                let channels = u16_at(bytes, body + 2);
                let sample_rate = u32_at(bytes, body + 4);
                if channels == 0 || sample_rate == 0 {
                    return Err(Error::NotWav("zero channels or sample rate".into()));
                }
                format = Some(Format { channels, sample_rate, bits });
            }
            b"data" => {
                let fmt = format.ok_or_else(|| Error::NotWav("data chunk before fmt".into()))?;
                debug_assert_eq!(fmt.bits, 16);
                if body + size > bytes.len() {
                    return Err(Error::TruncatedFile(format!(
                        "data chunk declares {size} bytes, {} present",
                        bytes.len() - body
                    )));
                }
                let frame = 2 * fmt.channels as usize;
                if !size.is_multiple_of(frame) {
                    return Err(Error::TruncatedFile("partial sample frame".into()));
                }
                let pick = match (fmt.channels, channel) {
                    (1, None) => 0,
                    (n, None) => return Err(Error::MultichannelWithoutFlag(n)),
                    (n, Some(c)) if c >= n => {
                        return Err(Error::InvalidConfig(format!("channel {c} of {n}")))
                    }
                    (_, Some(c)) => c as usize,
                };
                let samples = bytes[body..body + size]
                    .chunks_exact(frame)
                    .map(|f| i16::from_le_bytes([f[2 * pick], f[2 * pick + 1]]))
                    .collect();
                return AudioClip::new(samples, fmt.sample_rate);
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body + size + (size & 1);
    }
    match format {
        Some(_) => Err(Error::TruncatedFile("no data chunk".into())),
        None => Err(Error::NotWav("no fmt chunk".into())),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn header(format: u16, channels: u16, bits: u16, data: &[u8]) -> Vec<u8> {
        let mut b = Vec::new();
        b.extend_from_slice(b"RIFF");
        b.extend_from_slice(&(36 + data.len() as u32).to_le_bytes());
        b.extend_from_slice(b"WAVEfmt ");
        b.extend_from_slice(&16u32.to_le_bytes());
        b.extend_from_slice(&format.to_le_bytes());
        b.extend_from_slice(&channels.to_le_bytes());
        b.extend_from_slice(&16000u32.to_le_bytes());
        let align = channels * bits / 8;
        b.extend_from_slice(&(16000 * u32::from(align)).to_le_bytes());
        b.extend_from_slice(&align.to_le_bytes());
        b.extend_from_slice(&bits.to_le_bytes());
        b.extend_from_slice(b"data");
        b.extend_from_slice(&(data.len() as u32).to_le_bytes());
        b.extend_from_slice(data);
        b
    }

    #[test]
    fn decodes_little_endian_payload() {
        let bytes = header(1, 1, 16, &[0x00, 0x00, 0xFF, 0x7F, 0x00, 0x80, 0x01, 0x00]);
        let clip = decode_wav(&bytes, None).unwrap();
        assert_eq!(clip.samples, vec![0, 32767, -32768, 1]);
        assert_eq!(clip.sample_rate, 16000);
    }

    #[test]
    fn encodes_payload_and_canonical_header() {
        let clip = AudioClip::new(vec![0, 32767, -32768, 1], 16000).unwrap();
        let bytes = encode_wav(&clip);
        assert_eq!(bytes.len(), 44 + 8);
        assert_eq!(&bytes[44..], &[0x00, 0x00, 0xFF, 0x7F, 0x00, 0x80, 0x01, 0x00]);
        assert_eq!(bytes, header(1, 1, 16, &bytes[44..]));
    }

    #[test]
    fn rejects_24_bit() {
        let bytes = header(1, 1, 24, &[0; 6]);
        assert!(matches!(decode_wav(&bytes, None), Err(Error::UnsupportedEncoding(_))));
    }

    #[test]
    fn rejects_float_format() {
        let bytes = header(3, 1, 16, &[0; 4]);
        assert!(matches!(decode_wav(&bytes, None), Err(Error::UnsupportedEncoding(_))));
    }

    #[test]
    fn rejects_garbage() {
        assert!(matches!(decode_wav(b"OggS....", None), Err(Error::NotWav(_))));
    }

    #[test]
    fn truncated_data_chunk() {
        let mut bytes = header(1, 1, 16, &[1, 0, 2, 0]);
        bytes.truncate(bytes.len() - 2);
        assert!(matches!(decode_wav(&bytes, None), Err(Error::TruncatedFile(_))));
    }

    #[test]
    fn multichannel_needs_flag() {
        let bytes = header(1, 2, 16, &[1, 0, 2, 0, 3, 0, 4, 0]);
        assert!(matches!(decode_wav(&bytes, None), Err(Error::MultichannelWithoutFlag(2))));
        assert_eq!(decode_wav(&bytes, Some(0)).unwrap().samples, vec![1, 3]);
        assert_eq!(decode_wav(&bytes, Some(1)).unwrap().samples, vec![2, 4]);
    }

    #[test]
    fn skips_unknown_chunks() {
        let mut bytes = header(1, 1, 16, &[5, 0]);
        // splice a LIST chunk with odd length (padded) between fmt and data
        let list = [b"LIST".as_slice(), &3u32.to_le_bytes(), &[1, 2, 3, 0]].concat();
        bytes.splice(36..36, list);
        assert_eq!(decode_wav(&bytes, None).unwrap().samples, vec![5]);
    }

    #[test]
    fn empty_clip_round_trips() {
        let clip = AudioClip::new(vec![], 8000).unwrap();
        let bytes = encode_wav(&clip);
        assert_eq!(bytes.len(), 44);
        assert_eq!(u32_at(&bytes, 40), 0);
        assert_eq!(decode_wav(&bytes, None).unwrap(), clip);
    }

    #[test]
    fn scale_endpoints() {
        let s = scale_to_bytes(&[-1.0, 0.0, 1.0]).unwrap();
        assert_eq!(s.values, vec![0.0, 127.5, 255.0]);
        assert_eq!(s.scale, ScaleParams { min_val: -1.0, max_val: 1.0, degenerate: false });
    }

    #[test]
    fn scale_degenerate() {
        let s = scale_to_bytes(&[5.0, 5.0, 5.0]).unwrap();
        assert_eq!(s.values, vec![0.0; 3]);
        assert!(s.scale.degenerate);
        assert_eq!(unscale_from_bytes(&s), vec![5.0; 3]);
    }

    #[test]
    fn scale_fixed_point() {
        let s = scale_to_bytes(&[0.0, 64.0, 255.0]).unwrap();
        assert_eq!(s.values, vec![0.0, 64.0, 255.0]);
    }

    #[test]
    fn scale_empty() {
        assert!(matches!(scale_to_bytes(&[]), Err(Error::EmptyInput)));
    }

    #[test]
    fn unscale_known() {
        let s = ByteSignal {
            values: vec![0.0, 255.0],
            scale: ScaleParams { min_val: -1.0, max_val: 1.0, degenerate: false },
        };
        assert_eq!(unscale_from_bytes(&s), vec![-1.0, 1.0]);
    }

    #[test]
    fn pcm_rounding_and_clamp() {
        assert_eq!(pcm_from_f64(1.6), 2);
        assert_eq!(pcm_from_f64(-1e9), i16::MIN);
        assert_eq!(pcm_from_f64(1e9), i16::MAX);
        assert_eq!(pcm_from_f64(f64::NAN), 0);
    }

    mod props {
        use super::super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn wav_round_trip(samples in proptest::collection::vec(any::<i16>(), 0..512), rate in 1u32..200_000) {
                let clip = AudioClip::new(samples, rate).unwrap();
                let bytes = encode_wav(&clip);
                let back = decode_wav(&bytes, None).unwrap();
                prop_assert_eq!(&back, &clip);
                prop_assert_eq!(encode_wav(&back), bytes);
            }

            #[test]
            fn scale_inverse_and_monotone(xs in proptest::collection::vec(-1e6f64..1e6, 1..256)) {
                let s = scale_to_bytes(&xs).unwrap();
                let back = unscale_from_bytes(&s);
                let range = s.scale.max_val - s.scale.min_val;
                for (a, b) in xs.iter().zip(&back) {
                    prop_assert!((a - b).abs() <= 1e-9 * range.max(f64::MIN_POSITIVE));
                }
                for i in 0..xs.len() {
                    prop_assert!((0.0..=255.0).contains(&s.values[i]));
                    for j in 0..xs.len() {
                        if xs[i] <= xs[j] {
                            prop_assert!(s.values[i] <= s.values[j]);
                        }
                    }
                }
            }
        }
    }
}
