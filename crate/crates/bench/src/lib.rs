//! Fixture builders shared by the benchmarks.

use armas_core::hcr::{self, BitPlane, SignalMatrix};
use armas_core::rng::SplitMix64;
use armas_core::{synth, AudioClip, FeatureTable};

pub fn music_clip(rate: u32, secs: f64) -> AudioClip {
    synth::music(rate, secs, 1)
}

pub fn byte_matrix(side: usize) -> SignalMatrix {
    let clip = music_clip(16000, (side * side) as f64 / 16000.0);
    let scaled = armas_core::audio_io::scale_to_bytes(&clip.to_f64()).expect("non-empty clip");
    hcr::reshape_to_matrix(&scaled.values, Some(side)).expect("valid shape")
}

pub fn bit_plane(side: usize) -> BitPlane {
    hcr::dither(&byte_matrix(side)).expect("non-empty matrix")
}

/// `rows` x `dim` uniform features with a smooth nonlinear target.
pub fn regression_set(rows: usize, dim: usize, seed: u64) -> (FeatureTable, Vec<f64>) {
    let mut rng = SplitMix64::new(seed);
    let columns: Vec<Vec<f64>> = (0..dim).map(|_| (0..rows).map(|_| rng.next_f64()).collect()).collect();
    let y = (0..rows)
        .map(|i| (6.0 * columns[0][i]).sin() + columns[1 % dim][i] * columns[2 % dim][i])
        .collect();
    (FeatureTable::from_columns(columns).expect("equal columns"), y)
}
