//! Total-variation three-way separation (voice / harmonic / percussive).
//!
//! The compressed spectrogram `W = |X|^(2 gamma)` is split into a harmonic
//! mask that is smooth across time, a percussive mask that is smooth across
//! frequency and a sparse voice remainder, by clamped Gauss-Seidel sweeps.

use alloc::vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::filter;
use crate::masking::{wiener_apply, MaskSet, SourceRole};
use crate::pipeline::Separation;
use crate::resample::resample;
use crate::signal::AudioSignal;
use crate::stft::{spectrogram, stft, Stft, StftConfig};

/// Additive terms used by the two clamped averaging updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TvUpdate {
    /// Stationarity of the objective: harmonic `+ lambda2 / 2`,
    /// percussive `+ lambda2 / (2 lambda1)`.
    #[default]
    Gradient,
    /// Harmonic `+ lambda1 / 2`, percussive `+ lambda1 / (2 lambda2)`.
    Literal,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TvConfig {
    pub lambda1: f64,
    pub lambda2: f64,
    pub gamma: f64,
    pub n_iter: usize,
    pub highpass_hz: f64,
    pub target_rate: u32,
    pub frame_ms: f64,
    pub overlap: f64,
    pub update: TvUpdate,
}

impl Default for TvConfig {
    fn default() -> Self {
        Self {
            lambda1: 0.25,
            lambda2: 0.025,
            gamma: 0.25,
            n_iter: 200,
            highpass_hz: 120.0,
            target_rate: 16_000,
            frame_ms: 64.0,
            overlap: 0.75,
            update: TvUpdate::Gradient,
        }
    }
}

impl TvConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda1 > 0.0) {
            return Err(invalid("lambda1", "must be positive"));
        }
        if !(self.lambda2 > 0.0) {
            return Err(invalid("lambda2", "must be positive"));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(invalid("gamma", "must lie in (0, 1]"));
        }
        if self.n_iter == 0 {
            return Err(invalid("n_iter", "must be at least 1"));
        }
        Ok(())
    }

    /// `(harmonic, percussive)` additive terms for the configured update.
    pub fn increments(&self) -> (f64, f64) {
        match self.update {
            TvUpdate::Gradient => (self.lambda2 / 2.0, self.lambda2 / (2.0 * self.lambda1)),
            TvUpdate::Literal => (self.lambda1 / 2.0, self.lambda1 / (2.0 * self.lambda2)),
        }
    }

    pub fn wiener_exponent(&self) -> f64 {
        1.0 / (2.0 * self.gamma)
    }

    pub fn stft_config(&self) -> StftConfig {
        StftConfig::from_duration(self.frame_ms, self.overlap, self.target_rate)
    }
}

/// Iteration state; `W` is stored `bins x frames`.
#[derive(Debug, Clone)]
pub struct TvSolver {
    w: DMatrix<f64>,
    harmonic: DMatrix<f64>,
    percussive: DMatrix<f64>,
    harmonic_step: f64,
    percussive_step: f64,
}

impl TvSolver {
    pub fn new(w: DMatrix<f64>, cfg: &TvConfig) -> Result<Self> {
        cfg.validate()?;
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        if w.iter().any(|v| *v < 0.0) {
            return Err(Error::NegativeEntry);
        }
        let (h, p) = cfg.increments();
        let (rows, cols) = w.shape();
        Ok(Self {
            w,
            harmonic: DMatrix::zeros(rows, cols),
            percussive: DMatrix::zeros(rows, cols),
            harmonic_step: h,
            percussive_step: p,
        })
    }

    /// One full harmonic sweep followed by one full percussive sweep,
    /// frames in the outer loop and bins in the inner loop.
    pub fn sweep(&mut self) {
        let (bins, frames) = self.w.shape();
        for n in 0..frames {
            for m in 0..bins {
                let prev = if n > 0 { self.harmonic[(m, n - 1)] } else { 0.0 };
                let next = if n + 1 < frames { self.harmonic[(m, n + 1)] } else { 0.0 };
                let cap = self.w[(m, n)] - self.percussive[(m, n)];
                let v = ((prev + next) / 2.0 + self.harmonic_step).min(cap);
                self.harmonic[(m, n)] = v.max(0.0);
            }
        }
        for n in 0..frames {
            for m in 0..bins {
                let below = if m > 0 { self.percussive[(m - 1, n)] } else { 0.0 };
                let above = if m + 1 < bins { self.percussive[(m + 1, n)] } else { 0.0 };
                let cap = self.w[(m, n)] - self.harmonic[(m, n)];
                let v = ((below + above) / 2.0 + self.percussive_step).min(cap);
                self.percussive[(m, n)] = v.max(0.0);
            }
        }
    }

    pub fn harmonic(&self) -> &DMatrix<f64> {
        &self.harmonic
    }

    pub fn percussive(&self) -> &DMatrix<f64> {
        &self.percussive
    }

    pub fn voice(&self) -> DMatrix<f64> {
        let mut v = &self.w - &self.harmonic;
        v -= &self.percussive;
        v.apply(|x| *x = x.max(0.0));
        v
    }

    pub fn w(&self) -> &DMatrix<f64> {
        &self.w
    }

    /// Masks ordered voice, harmonic, percussive.
    pub fn into_masks(self, alpha: f64) -> Result<MaskSet> {
        let voice = self.voice();
        MaskSet::new(
            vec![voice, self.harmonic, self.percussive],
            vec![SourceRole::Voice, SourceRole::Harmonic, SourceRole::Percussive],
            alpha,
        )
    }
}

pub fn tv_masks(w: &DMatrix<f64>, cfg: &TvConfig) -> Result<MaskSet> {
    let mut solver = TvSolver::new(w.clone(), cfg)?;
    for _ in 0..cfg.n_iter {
        solver.sweep();
    }
    solver.into_masks(cfg.wiener_exponent())
}

/// `(|X| / ||window||_2)^(2 gamma)`.
///
/// The update constants are absolute, so the solution depends on the scale
/// of `W`. Dividing by the window's L2 norm makes that scale independent of
/// the frame length (a unit-variance white noise has unit expected power
/// per bin).
pub fn tv_input(spec: &Stft, gamma: f64) -> DMatrix<f64> {
    let window = spec.config.window.coefficients(spec.config.window_length);
    let norm = window.iter().map(|v| v * v).sum::<f64>().sqrt();
    let scale = if norm > 0.0 { norm.powf(-2.0 * gamma) } else { 1.0 };
    spectrogram(spec, gamma) * scale
}

/// Resample, high-pass, separate, and bring the three estimates back to the
/// input sample rate.
pub fn tv_separate(x: &AudioSignal, cfg: &TvConfig) -> Result<Separation> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(Error::EmptySignal);
    }
    let work = resample(x, cfg.target_rate)?;
    let work = filter::highpass(&work, cfg.highpass_hz, 4)?;
    let spec = stft(&work, &cfg.stft_config())?;
    let w = tv_input(&spec, cfg.gamma);
    let masks = tv_masks(&w, cfg)?;
    let estimates = wiener_apply(&spec, &masks)?;
    Separation::from_stfts(estimates, masks.roles(), x.sample_rate, x.len())
}
