//! Unsupervised singing-voice detection from a separated voice estimate.
//!
//! Each analysis frame gets a voice-to-music ratio: the energy of the voice
//! estimate over the energy of the mixture. Frames whose mixture energy is
//! below the silence threshold score zero; a frame is declared voiced when
//! the ratio strictly exceeds the voice threshold.

use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::signal::AudioSignal;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VadConfig {
    /// Frame length in samples.
    pub frame_length: usize,
    /// Frame step in samples.
    pub step: usize,
    pub silence_thr: f64,
    pub voice_thr: f64,
    pub band: (f64, f64),
}

impl VadConfig {
    pub const DEFAULT_FRAME_MS: f64 = 371.5;
    pub const DEFAULT_STEP_MS: f64 = 30.0;

    pub fn from_ms(frame_ms: f64, step_ms: f64, sample_rate: u32) -> Self {
        let fs = f64::from(sample_rate);
        Self {
            frame_length: (frame_ms * 1e-3 * fs).round() as usize,
            step: ((step_ms * 1e-3 * fs).round() as usize).max(1),
            silence_thr: 1e-4,
            voice_thr: 0.5,
            band: (120.0, 3000.0),
        }
    }

    /// 371.5 ms frames (8192 samples at 22.05 kHz) every 30 ms.
    pub fn for_rate(sample_rate: u32) -> Self {
        Self::from_ms(Self::DEFAULT_FRAME_MS, Self::DEFAULT_STEP_MS, sample_rate)
    }

    pub fn validate(&self) -> Result<()> {
        if self.frame_length == 0 || self.step == 0 {
            return Err(invalid("frame", "frame length and step must be positive"));
        }
        if !(0.0..=1.0).contains(&self.voice_thr) {
            return Err(invalid("voice_thr", "must lie in [0, 1]"));
        }
        if !(self.silence_thr > 0.0) {
            return Err(invalid("silence_thr", "must be positive"));
        }
        if !(self.band.0 < self.band.1) {
            return Err(invalid("band", "low edge must be below high edge"));
        }
        Ok(())
    }

    pub fn frame_count(&self, len: usize) -> usize {
        if len < self.frame_length {
            0
        } else {
            (len - self.frame_length) / self.step + 1
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameRecord {
    pub center_time_s: f64,
    pub energy: f64,
    pub vtmr: f64,
    pub decision: bool,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DetectionLattice {
    pub frames: Vec<FrameRecord>,
    /// Reference labels aligned with `frames`, when evaluating.
    pub truth: Option<Vec<bool>>,
}

impl DetectionLattice {
    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn decisions(&self) -> Vec<bool> {
        self.frames.iter().map(|f| f.decision).collect()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.frames.iter().map(|f| f.center_time_s).collect()
    }

    /// Labels frames whose center falls inside any `[start, end)` segment.
    pub fn with_truth_segments(mut self, segments: &[(f64, f64)]) -> Self {
        self.truth = Some(frame_truth(&self.centers(), segments));
        self
    }
}

pub fn frame_truth(centers: &[f64], segments: &[(f64, f64)]) -> Vec<bool> {
    centers
        .iter()
        .map(|t| segments.iter().any(|(s, e)| *t >= *s && *t < *e))
        .collect()
}

/// Frame energies of the mixture and voice-to-music ratios; decisions are
/// left unset.
pub fn vtmr(x: &AudioSignal, voice: &AudioSignal, cfg: &VadConfig) -> Result<DetectionLattice> {
    cfg.validate()?;
    if x.len() != voice.len() {
        return Err(Error::LengthMismatch(x.len(), voice.len()));
    }
    if x.sample_rate != voice.sample_rate {
        return Err(Error::RateMismatch(x.sample_rate, voice.sample_rate));
    }
    let fs = f64::from(x.sample_rate);
    let count = cfg.frame_count(x.len());
    let frames = (0..count)
        .map(|k| {
            let start = k * cfg.step;
            let range = start..start + cfg.frame_length;
            let energy: f64 = x.samples[range.clone()].iter().map(|v| v * v).sum();
            let voiced: f64 = voice.samples[range].iter().map(|v| v * v).sum();
            let ratio = if energy > cfg.silence_thr {
                (voiced / energy).clamp(0.0, 1.0)
            } else {
                0.0
            };
            FrameRecord {
                center_time_s: (start as f64 + cfg.frame_length as f64 / 2.0) / fs,
                energy,
                vtmr: ratio,
                decision: false,
            }
        })
        .collect();
    Ok(DetectionLattice { frames, truth: None })
}

/// Marks frames with `vtmr > voice_thr` (strict).
pub fn detect_voice(mut lattice: DetectionLattice, voice_thr: f64) -> DetectionLattice {
    for f in &mut lattice.frames {
        f.decision = f.vtmr > voice_thr;
    }
    lattice
}
