use alloc::vec::Vec;

use crate::error::{Error, Result};

/// Mono sample sequence tagged with its sample rate.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioSignal {
    pub samples: Vec<f64>,
    pub sample_rate: u32,
}

impl AudioSignal {
    pub fn new(samples: Vec<f64>, sample_rate: u32) -> Self {
        Self { samples, sample_rate }
    }

    pub fn silence(len: usize, sample_rate: u32) -> Self {
        Self::new(alloc::vec![0.0; len], sample_rate)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_secs(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s * s).sum()
    }

    /// Sample-wise sum of several signals sharing length and rate.
    pub fn sum<'a, I>(signals: I) -> Result<AudioSignal>
    where
        I: IntoIterator<Item = &'a AudioSignal>,
    {
        let mut iter = signals.into_iter();
        let first = iter.next().ok_or(Error::EmptySignal)?;
        let mut out = first.clone();
        for s in iter {
            out.check_compatible(s)?;
            for (o, v) in out.samples.iter_mut().zip(&s.samples) {
                *o += v;
            }
        }
        Ok(out)
    }

    pub(crate) fn check_compatible(&self, other: &AudioSignal) -> Result<()> {
        if self.len() != other.len() {
            return Err(Error::LengthMismatch(self.len(), other.len()));
        }
        if self.sample_rate != other.sample_rate {
            return Err(Error::RateMismatch(self.sample_rate, other.sample_rate));
        }
        Ok(())
    }
}
