//! Single-channel source separation by spectrogram morphological filtering
//! and unsupervised singing-voice detection.
//!
//! Four separators share one pipeline (STFT, mask estimation, parameterized
//! Wiener filtering, inverse STFT): oracle masks, total-variation masks,
//! robust PCA and kernel additive modeling. The voice detector thresholds
//! the energy ratio between a voice estimate and the mixture.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// `!(x > 0.0)` is how NaN gets rejected alongside non-positive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod error;
mod fft;
pub mod filter;
pub mod kam;
pub mod masking;
pub mod metrics;
pub mod pipeline;
pub mod pitch;
pub mod resample;
pub mod rpca;
pub mod signal;
pub mod stft;
pub mod tv;
pub mod vad;

pub use error::{Error, Result};
pub use kam::{KamConfig, KamSchedule, Kernel};
pub use masking::{MaskSet, SourceRole};
pub use metrics::{DetectionScore, SeparationScore};
pub use pipeline::{detect_pipeline, separate, EstimatedSource, Method, SeparateConfig, Separation};
pub use pitch::YinConfig;
pub use rpca::RpcaConfig;
pub use signal::AudioSignal;
pub use stft::{Stft, StftConfig, Window, C64};
pub use tv::{TvConfig, TvUpdate};
pub use vad::{DetectionLattice, FrameRecord, VadConfig};
