//! Short-time Fourier analysis and weighted overlap-add synthesis.
//!
//! Frame `n` is centered on sample `n * hop`; the signal is zero-padded by
//! half a window on both sides. Only the `window_length / 2 + 1`
//! non-negative frequency bins are stored. Synthesis divides the
//! overlap-added windowed frames by the summed squared window, which makes
//! `istft(stft(x)) == x` for every sample up to rounding.

use alloc::vec;
use alloc::vec::Vec;
use core::f64::consts::PI;

use nalgebra::{Complex, DMatrix};
#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::fft::Fft;
use crate::signal::AudioSignal;

pub type C64 = Complex<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Window {
    /// Periodic Hann window.
    Hann,
}

impl Window {
    pub fn coefficients(self, len: usize) -> Vec<f64> {
        match self {
            Window::Hann => (0..len)
                .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / len as f64).cos())
                .collect(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StftConfig {
    pub window_length: usize,
    pub hop: usize,
    pub window: Window,
    pub sample_rate: u32,
}

impl StftConfig {
    pub fn new(window_length: usize, hop: usize, sample_rate: u32) -> Self {
        Self {
            window_length,
            hop,
            window: Window::Hann,
            sample_rate,
        }
    }

    /// Window of `frame_ms` milliseconds with the given overlap fraction,
    /// rounded to whole samples.
    pub fn from_duration(frame_ms: f64, overlap: f64, sample_rate: u32) -> Self {
        let window_length = (frame_ms * 1e-3 * f64::from(sample_rate)).round() as usize;
        let hop = ((1.0 - overlap) * window_length as f64).round().max(1.0) as usize;
        Self::new(window_length, hop, sample_rate)
    }

    pub fn validate(&self) -> Result<()> {
        if self.window_length == 0 {
            return Err(Error::InvalidConfig("window length must be positive"));
        }
        if self.hop == 0 {
            return Err(Error::InvalidConfig("hop must be positive"));
        }
        if self.hop > self.window_length {
            return Err(Error::InvalidConfig("hop exceeds window length"));
        }
        if self.sample_rate == 0 {
            return Err(Error::InvalidConfig("sample rate must be positive"));
        }
        Ok(())
    }

    pub fn bins(&self) -> usize {
        self.window_length / 2 + 1
    }

    pub fn frames_for(&self, len: usize) -> usize {
        len / self.hop + 1
    }

    /// Center frequency of bin `m` in Hz.
    pub fn bin_frequency(&self, m: usize) -> f64 {
        m as f64 * f64::from(self.sample_rate) / self.window_length as f64
    }

    /// Center time of frame `n` in seconds.
    pub fn frame_time(&self, n: usize) -> f64 {
        (n * self.hop) as f64 / f64::from(self.sample_rate)
    }
}

/// One-sided STFT: `bins x frames` complex matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Stft {
    pub data: DMatrix<C64>,
    pub config: StftConfig,
    pub original_length: usize,
}

impl Stft {
    pub fn bins(&self) -> usize {
        self.data.nrows()
    }

    pub fn frames(&self) -> usize {
        self.data.ncols()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.shape()
    }

    /// Same configuration and length, different coefficients.
    pub fn with_data(&self, data: DMatrix<C64>) -> Stft {
        Stft {
            data,
            config: self.config,
            original_length: self.original_length,
        }
    }

    pub fn magnitude(&self) -> DMatrix<f64> {
        self.data.map(|c| c.re.hypot(c.im))
    }

    pub fn check_consistent(&self) -> Result<()> {
        self.config.validate()?;
        if self.bins() != self.config.bins() {
            return Err(Error::DimensionMismatch {
                expected: (self.config.bins(), self.frames()),
                found: self.shape(),
            });
        }
        Ok(())
    }
}

pub fn stft(x: &AudioSignal, cfg: &StftConfig) -> Result<Stft> {
    cfg.validate()?;
    if x.is_empty() {
        return Err(Error::EmptySignal);
    }
    let n_win = cfg.window_length;
    let half = n_win / 2;
    let bins = cfg.bins();
    let frames = cfg.frames_for(x.len());
    let window = cfg.window.coefficients(n_win);
    let fft = Fft::new(n_win);

    let mut data = DMatrix::from_element(bins, frames, C64::new(0.0, 0.0));
    let mut buf = vec![C64::new(0.0, 0.0); n_win];
    for n in 0..frames {
        let start = (n * cfg.hop) as isize - half as isize;
        for (k, slot) in buf.iter_mut().enumerate() {
            let idx = start + k as isize;
            let sample = if idx >= 0 && (idx as usize) < x.len() {
                x.samples[idx as usize]
            } else {
                0.0
            };
            *slot = C64::new(sample * window[k], 0.0);
        }
        fft.forward(&mut buf);
        data.column_mut(n).copy_from_slice(&buf[..bins]);
    }
    Ok(Stft {
        data,
        config: *cfg,
        original_length: x.len(),
    })
}

pub fn istft(s: &Stft) -> Result<AudioSignal> {
    s.check_consistent()?;
    let cfg = &s.config;
    let n_win = cfg.window_length;
    let half = n_win / 2;
    let bins = cfg.bins();
    let window = cfg.window.coefficients(n_win);
    let fft = Fft::new(n_win);
    let len = s.original_length;

    let mut out = vec![0.0; len];
    let mut norm = vec![0.0; len];
    let mut buf = vec![C64::new(0.0, 0.0); n_win];
    for n in 0..s.frames() {
        let col = s.data.column(n);
        for k in 0..n_win {
            buf[k] = if k < bins { col[k] } else { col[n_win - k].conj() };
        }
        fft.inverse(&mut buf);
        let start = (n * cfg.hop) as isize - half as isize;
        for k in 0..n_win {
            let idx = start + k as isize;
            if idx < 0 || idx as usize >= len {
                continue;
            }
            let idx = idx as usize;
            out[idx] += buf[k].re * window[k];
            norm[idx] += window[k] * window[k];
        }
    }
    for (o, w) in out.iter_mut().zip(&norm) {
        *o = if *w > 1e-12 { *o / w } else { 0.0 };
    }
    Ok(AudioSignal::new(out, cfg.sample_rate))
}

/// Element-wise `|X|^(2 gamma)`; `gamma = 1` is the power spectrogram.
pub fn spectrogram(s: &Stft, gamma: f64) -> DMatrix<f64> {
    s.data.map(|c| {
        let p = c.norm_sqr();
        if gamma == 1.0 {
            p
        } else if p == 0.0 {
            0.0
        } else {
            p.powf(gamma)
        }
    })
}
