//! Deterministic test signals: pure tones, synthetic multi-voice music, and
//! autoregressive processes.

use std::f64::consts::PI;

use crate::audio_io::AudioClip;
use crate::rng::SplitMix64;

/// Sine at `freq` Hz with peak `amplitude` in PCM units.
pub fn tone(rate: u32, secs: f64, freq: f64, amplitude: f64) -> AudioClip {
    let n = (secs * f64::from(rate)).round() as usize;
    let w = 2.0 * PI * freq / f64::from(rate);
    let samples: Vec<f64> = (0..n).map(|t| amplitude * (w * t as f64).sin()).collect();
    AudioClip::from_f64(&samples, rate).expect("positive rate")
}

fn midi_hz(note: f64) -> f64 {
    440.0 * 2f64.powf((note - 69.0) / 12.0)
}

struct Timbre {
    partials: usize,
    rolloff: f64,
    /// Exponential decay time in seconds; `None` for sustained notes.
    decay: Option<f64>,
    vibrato: f64,
    inharmonic: f64,
}

fn timbre(rng: &mut SplitMix64) -> Timbre {
    let plucked = rng.next_f64() < 0.5;
    Timbre {
        partials: 4 + rng.below(7),
        rolloff: 0.8 + rng.next_f64() * 1.2,
        decay: plucked.then(|| 0.15 + rng.next_f64() * 0.5),
        vibrato: if plucked { 0.0 } else { 0.002 + rng.next_f64() * 0.004 },
        inharmonic: if rng.next_f64() < 0.25 { rng.next_f64() * 0.002 } else { 0.0 },
    }
}

const SCALE: [f64; 7] = [0.0, 2.0, 4.0, 5.0, 7.0, 9.0, 11.0];

fn render_voice(out: &mut [f64], rate: f64, rng: &mut SplitMix64, low_note: f64, span: usize, gain: f64) {
    let voice = timbre(rng);
    let root = low_note + rng.below(5) as f64;
    let mut t0 = 0usize;
    while t0 < out.len() {
        let beats = [0.25, 0.375, 0.5, 0.75, 1.0][rng.below(5)];
        let len = ((beats * rate) as usize).min(out.len() - t0);
        let degree = rng.below(span);
        let note = root + 12.0 * (degree / 7) as f64 + SCALE[degree % 7];
        let f0 = midi_hz(note);
        let velocity = 0.6 + 0.4 * rng.next_f64();
        let rest = rng.next_f64() < 0.08;
        if !rest {
            let attack = 0.01 * rate;
            let release = (0.03 * rate).min(len as f64 / 2.0);
            for k in 1..=voice.partials {
                let kf = k as f64;
                let fk = f0 * kf * (1.0 + voice.inharmonic * kf * kf).sqrt();
                if fk >= rate / 2.0 * 0.9 {
                    break;
                }
                let amp = velocity * gain / kf.powf(voice.rolloff);
                let mut phase = 0.0f64;
                for i in 0..len {
                    let t = i as f64 / rate;
                    let vib = 1.0 + voice.vibrato * (2.0 * PI * 5.0 * t).sin();
                    phase += 2.0 * PI * fk * vib / rate;
                    let mut env = (i as f64 / attack).min(1.0) * ((len - i) as f64 / release).min(1.0);
                    if let Some(tau) = voice.decay {
                        env *= (-t / (tau / kf.sqrt())).exp();
                    }
                    out[t0 + i] += amp * env * phase.sin();
                }
            }
        }
        t0 += len;
    }
}

/// Synthetic music: a bass line, a melody and an optional inner voice, each
/// with its own harmonic timbre, mixed and peak-normalized to -6 dBFS.
pub fn music(rate: u32, secs: f64, seed: u64) -> AudioClip {
    let n = (secs * f64::from(rate)).round() as usize;
    let mut rng = SplitMix64::new(seed ^ 0x6D75_7369_6300_0000);
    let r = f64::from(rate);
    let mut mix = vec![0.0f64; n];
    render_voice(&mut mix, r, &mut rng, 36.0, 10, 1.0);
    render_voice(&mut mix, r, &mut rng, 60.0, 12, 0.7);
    if rng.next_f64() < 0.6 {
        render_voice(&mut mix, r, &mut rng, 52.0, 8, 0.4);
    }
    let peak = mix.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1e-12);
    let gain = 16384.0 / peak;
    let samples: Vec<f64> = mix.iter().map(|v| v * gain + (rng.next_f64() - 0.5) * 2.0).collect();
    AudioClip::from_f64(&samples, rate).expect("positive rate")
}

/// Standard normal deviate by Box-Muller.
pub fn gaussian(rng: &mut SplitMix64) -> f64 {
    let u1 = 1.0 - rng.next_f64();
    let u2 = rng.next_f64();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Coefficients `a[1..]` of `x[t] = sum_k a[k] x[t-k] + e[t]` whose
/// characteristic polynomial has the given complex-conjugate pole pairs
/// `(radius, angle)`.
pub fn ar_coefficients(pole_pairs: &[(f64, f64)]) -> Vec<f64> {
    // polynomial 1 + c1 z^-1 + ... built by multiplying 1 - 2 r cos(w) z^-1 + r^2 z^-2
    let mut poly = vec![1.0];
    for &(r, w) in pole_pairs {
        let quad = [1.0, -2.0 * r * w.cos(), r * r];
        let mut next = vec![0.0; poly.len() + 2];
        for (i, &p) in poly.iter().enumerate() {
            for (j, &q) in quad.iter().enumerate() {
                next[i + j] += p * q;
            }
        }
        poly = next;
    }
    poly[1..].iter().map(|c| -c).collect()
}

/// Realization of an AR process driven by unit-variance Gaussian noise, after
/// discarding a burn-in of `burn_in` samples.
pub fn ar_process(coeffs: &[f64], len: usize, burn_in: usize, seed: u64) -> Vec<f64> {
    let mut rng = SplitMix64::new(seed);
    let p = coeffs.len();
    let mut x = vec![0.0; len + burn_in];
    for t in 0..x.len() {
        let mut v = gaussian(&mut rng);
        for k in 1..=p.min(t) {
            v += coeffs[k - 1] * x[t - k];
        }
        x[t] = v;
    }
    x.split_off(burn_in)
}
