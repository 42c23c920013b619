//! Butterworth high-pass, low-pass and band-pass filters built from
//! cascaded second-order sections.

use alloc::vec::Vec;
use core::f64::consts::PI;

#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;

use crate::error::{invalid, Result};
use crate::signal::AudioSignal;

/// Order used for the voice band-pass; 8 poles per edge give about 48 dB
/// of rejection one octave outside the band.
pub const BANDPASS_ORDER: usize = 8;

#[derive(Debug, Clone, Copy)]
struct Biquad {
    b0: f64,
    b1: f64,
    b2: f64,
    a1: f64,
    a2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Response {
    LowPass,
    HighPass,
}

impl Biquad {
    fn design(response: Response, cutoff: f64, q: f64, sample_rate: f64) -> Self {
        let w0 = 2.0 * PI * cutoff / sample_rate;
        let (sin, cos) = (w0.sin(), w0.cos());
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        let (b0, b1, b2) = match response {
            Response::LowPass => ((1.0 - cos) / 2.0, 1.0 - cos, (1.0 - cos) / 2.0),
            Response::HighPass => ((1.0 + cos) / 2.0, -(1.0 + cos), (1.0 + cos) / 2.0),
        };
        Self {
            b0: b0 / a0,
            b1: b1 / a0,
            b2: b2 / a0,
            a1: -2.0 * cos / a0,
            a2: (1.0 - alpha) / a0,
        }
    }

    fn run(&self, samples: &mut [f64]) {
        let (mut z1, mut z2) = (0.0, 0.0);
        for s in samples.iter_mut() {
            let x = *s;
            let y = self.b0 * x + z1;
            z1 = self.b1 * x - self.a1 * y + z2;
            z2 = self.b2 * x - self.a2 * y;
            *s = y;
        }
    }
}

/// A chain of second-order sections forming an even-order Butterworth filter.
#[derive(Debug, Clone)]
pub struct SosFilter {
    sections: Vec<Biquad>,
}

impl SosFilter {
    fn butterworth(response: Response, order: usize, cutoff: f64, sample_rate: f64) -> Self {
        let pairs = order.max(2) / 2;
        let n = (2 * pairs) as f64;
        let sections = (1..=pairs)
            .map(|k| {
                let theta = (2 * k - 1) as f64 * PI / (2.0 * n);
                let q = 1.0 / (2.0 * theta.cos());
                Biquad::design(response, cutoff, q, sample_rate)
            })
            .collect();
        Self { sections }
    }

    pub fn lowpass(order: usize, cutoff: f64, sample_rate: f64) -> Self {
        Self::butterworth(Response::LowPass, order, cutoff, sample_rate)
    }

    pub fn highpass(order: usize, cutoff: f64, sample_rate: f64) -> Self {
        Self::butterworth(Response::HighPass, order, cutoff, sample_rate)
    }

    pub fn then(mut self, other: SosFilter) -> Self {
        self.sections.extend(other.sections);
        self
    }

    pub fn apply(&self, samples: &[f64]) -> Vec<f64> {
        let mut out = samples.to_vec();
        for s in &self.sections {
            s.run(&mut out);
        }
        out
    }
}

pub fn highpass(x: &AudioSignal, cutoff: f64, order: usize) -> Result<AudioSignal> {
    let nyquist = f64::from(x.sample_rate) / 2.0;
    if !(cutoff > 0.0 && cutoff < nyquist) {
        return Err(invalid("cutoff", "must lie strictly between 0 and Nyquist"));
    }
    let f = SosFilter::highpass(order, cutoff, f64::from(x.sample_rate));
    Ok(AudioSignal::new(f.apply(&x.samples), x.sample_rate))
}

pub fn bandpass(x: &AudioSignal, low: f64, high: f64) -> Result<AudioSignal> {
    let nyquist = f64::from(x.sample_rate) / 2.0;
    if !(low > 0.0 && low < high && high < nyquist) {
        return Err(invalid("band", "need 0 < low < high < Nyquist"));
    }
    let rate = f64::from(x.sample_rate);
    let f = SosFilter::highpass(BANDPASS_ORDER, low, rate).then(SosFilter::lowpass(BANDPASS_ORDER, high, rate));
    Ok(AudioSignal::new(f.apply(&x.samples), x.sample_rate))
}
