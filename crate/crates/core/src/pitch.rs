//! YIN fundamental-frequency estimation and harmonic (F0) filtering of a
//! voice STFT.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::signal::AudioSignal;
use crate::stft::{Stft, StftConfig, C64};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct YinConfig {
    /// Absolute threshold on the cumulative-mean-normalized difference.
    pub threshold: f64,
    pub f0_min: f64,
    pub f0_max: f64,
    pub frame_ms: f64,
}

impl Default for YinConfig {
    fn default() -> Self {
        Self {
            threshold: 0.1,
            f0_min: 80.0,
            f0_max: 1000.0,
            frame_ms: 46.0,
        }
    }
}

impl YinConfig {
    fn lag_range(&self, sample_rate: u32) -> Result<(usize, usize)> {
        if !(self.f0_min > 0.0 && self.f0_min < self.f0_max) {
            return Err(invalid("f0_range", "need 0 < f0_min < f0_max"));
        }
        let fs = f64::from(sample_rate);
        let lo = ((fs / self.f0_max).floor() as usize).max(2);
        let hi = (fs / self.f0_min).ceil() as usize;
        Ok((lo, hi.max(lo + 1)))
    }

    pub fn frame_len(&self, sample_rate: u32) -> usize {
        (self.frame_ms * 1e-3 * f64::from(sample_rate)).round() as usize
    }
}

/// F0 of one frame in Hz, or `None` when no dip of the normalized
/// difference function falls below the threshold.
pub fn yin_f0(frame: &[f64], sample_rate: u32, cfg: &YinConfig) -> Result<Option<f64>> {
    let (tau_min, tau_max) = cfg.lag_range(sample_rate)?;
    if frame.len() < 2 * tau_max {
        return Err(Error::FrameTooShort {
            len: frame.len(),
            needed: 2 * tau_max,
        });
    }
    if frame.iter().all(|v| *v == 0.0) {
        return Ok(None);
    }
    let span = frame.len() - tau_max;
    let mut diff = vec![0.0; tau_max + 2];
    for (tau, d) in diff.iter_mut().enumerate().skip(1) {
        if tau + span > frame.len() {
            break;
        }
        *d = frame[..span]
            .iter()
            .zip(&frame[tau..tau + span])
            .map(|(a, b)| (a - b) * (a - b))
            .sum();
    }
    let top = (tau_max + 1).min(frame.len() - span);
    let mut cmnd = vec![1.0; top + 1];
    let mut running = 0.0;
    for tau in 1..=top {
        running += diff[tau];
        cmnd[tau] = if running > 0.0 {
            diff[tau] * tau as f64 / running
        } else {
            1.0
        };
    }

    let mut tau = tau_min;
    let found = loop {
        if tau > tau_max.min(top) {
            break None;
        }
        if cmnd[tau] < cfg.threshold {
            while tau < top && cmnd[tau + 1] < cmnd[tau] {
                tau += 1;
            }
            break Some(tau);
        }
        tau += 1;
    };
    let Some(tau) = found else {
        return Ok(None);
    };

    let refined = if tau > 0 && tau < top {
        let (a, b, c) = (cmnd[tau - 1], cmnd[tau], cmnd[tau + 1]);
        let denom = a - 2.0 * b + c;
        if denom.abs() > 1e-15 {
            tau as f64 + 0.5 * (a - c) / denom
        } else {
            tau as f64
        }
    } else {
        tau as f64
    };
    Ok(Some(f64::from(sample_rate) / refined))
}

/// YIN estimates centered on each STFT frame center.
pub fn f0_track(x: &AudioSignal, stft_cfg: &StftConfig, cfg: &YinConfig) -> Result<Vec<Option<f64>>> {
    let len = cfg.frame_len(x.sample_rate);
    let frames = stft_cfg.frames_for(x.len());
    let half = len / 2;
    let mut buf = vec![0.0; len];
    let mut track = Vec::with_capacity(frames);
    for n in 0..frames {
        let start = (n * stft_cfg.hop) as isize - half as isize;
        for (k, slot) in buf.iter_mut().enumerate() {
            let idx = start + k as isize;
            *slot = if idx >= 0 && (idx as usize) < x.len() {
                x.samples[idx as usize]
            } else {
                0.0
            };
        }
        track.push(yin_f0(&buf, x.sample_rate, cfg)?);
    }
    Ok(track)
}

/// Half-width in bins of the Hann main lobe kept around each partial peak.
const LOBE: usize = 2;

/// Binary harmonic mask for one frame of magnitudes.
fn harmonic_mask(mags: &[f64], f0: f64, bin_hz: f64, mask: &mut [bool]) {
    mask.iter_mut().for_each(|m| *m = false);
    let bins = mags.len();
    if !(f0 > 0.0) {
        return;
    }
    let nyquist_bin = (bins - 1) as f64;
    let mut k = 1usize;
    loop {
        let center = k as f64 * f0 / bin_hz;
        if center > nyquist_bin {
            break;
        }
        let lo = (((k as f64 - 0.5) * f0 / bin_hz).ceil().max(0.0)) as usize;
        let hi = ((((k as f64 + 0.5) * f0 / bin_hz).floor()) as usize).min(bins - 1);
        let mut best: Option<usize> = None;
        for b in lo..=hi {
            let v = mags[b];
            let left = if b > 0 { mags[b - 1] } else { 0.0 };
            let right = if b + 1 < bins { mags[b + 1] } else { 0.0 };
            if v > 0.0 && v >= left && v >= right {
                let closer = match best {
                    None => true,
                    Some(cur) => {
                        let (dc, db) = ((cur as f64 - center).abs(), (b as f64 - center).abs());
                        db < dc || (db == dc && v > mags[cur])
                    }
                };
                if closer {
                    best = Some(b);
                }
            }
        }
        if let Some(peak) = best {
            mask[peak] = true;
            let mut b = peak;
            while b > 0 && peak - (b - 1) <= LOBE && mags[b - 1] < mags[b] {
                b -= 1;
                mask[b] = true;
            }
            let mut b = peak;
            while b + 1 < bins && (b + 1) - peak <= LOBE && mags[b + 1] < mags[b] {
                b += 1;
                mask[b] = true;
            }
        }
        k += 1;
    }
}

/// Splits a voice STFT into the partials of its F0 track and the residual.
///
/// Unvoiced frames (and frames beyond the end of `track`) go entirely to
/// the residual. The two outputs add back to the input exactly.
pub fn f0_filter(voice: &Stft, track: &[Option<f64>]) -> (Stft, Stft) {
    let (bins, frames) = voice.shape();
    let bin_hz = f64::from(voice.config.sample_rate) / voice.config.window_length as f64;
    let zero = C64::new(0.0, 0.0);
    let mut kept = DMatrix::from_element(bins, frames, zero);
    let mut rest = DMatrix::from_element(bins, frames, zero);
    let mut mags = vec![0.0; bins];
    let mut mask = vec![false; bins];
    for n in 0..frames {
        let col = voice.data.column(n);
        match track.get(n).copied().flatten() {
            Some(f0) => {
                for (m, c) in mags.iter_mut().zip(col.iter()) {
                    *m = c.re.hypot(c.im);
                }
                harmonic_mask(&mags, f0, bin_hz, &mut mask);
            }
            None => mask.iter_mut().for_each(|m| *m = false),
        }
        for m in 0..bins {
            if mask[m] {
                kept[(m, n)] = col[m];
            } else {
                rest[(m, n)] = col[m];
            }
        }
    }
    (voice.with_data(kept), voice.with_data(rest))
}
