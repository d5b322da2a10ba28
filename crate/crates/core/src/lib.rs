//! Self-embedded audio gap reconstruction.
//!
//! A clip carries a halftoned, permuted copy of itself in its sample LSBs.
//! When a stretch of samples is lost, the receiver recovers a blurred version
//! of the clip from the surviving LSBs, turns it into wavelet features and
//! regresses the missing samples with a random forest. Classical inpainting
//! baselines and evaluation metrics live alongside.

pub mod audio_io;
pub mod baselines;
pub mod error;
pub mod eval;
pub mod features;
pub mod hcr;
pub mod regress;
pub mod rng;
pub mod stego;
pub mod synth;

pub use audio_io::{read_wav, write_wav, AudioClip, ByteSignal, ScaleParams};
pub use baselines::JanssenConfig;
pub use error::{Error, Result};
pub use eval::{evaluate, simulate_gaps, BenchmarkPlan, MetricsReport};
pub use features::{FeatureTable, Scalogram, ScalogramConfig};
pub use hcr::{BitPlane, CorrelationReport, GaussianConfig, SignalMatrix};
pub use regress::{reconstruct_gap, ForestConfig, ForestModel, GapSpec, Method, ReconstructConfig};
pub use rng::SplitMix64;
pub use stego::{self_embed, EmbedOptions, Manifest, Permutation, StegoKey};
