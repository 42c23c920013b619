//! Kernel additive modeling.
//!
//! Each source is described by a binary stencil over its magnitude
//! spectrogram: the source value at a time-frequency point is predicted by
//! the median of the current estimate over the stencil. Separation
//! alternates median filtering and Wiener re-estimation. Kernels can be the
//! classic horizontal/vertical/periodic shapes or learned from an isolated
//! source as a power-weighted average of normalized neighborhoods, then
//! thresholded.
//!
//! Kernels are stored `h x w` with rows along frequency and columns along
//! time, centered on the middle element.

use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;

use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};
use crate::fft::Fft;
use crate::masking::{wiener_fractions, MaskSet, SourceRole};
use crate::pipeline::Separation;
use crate::signal::AudioSignal;
use crate::stft::{stft, Stft, StftConfig, C64};

#[derive(Debug, Clone, PartialEq)]
pub struct Kernel {
    values: DMatrix<f64>,
    pub label: SourceRole,
    /// Threshold used when this kernel was binarized, if it was.
    pub threshold: Option<f64>,
}

impl Kernel {
    pub fn new(values: DMatrix<f64>, label: SourceRole) -> Result<Self> {
        let (h, w) = values.shape();
        if h % 2 == 0 || w % 2 == 0 {
            return Err(Error::EvenKernel(h, w));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite);
        }
        Ok(Self {
            values,
            label,
            threshold: None,
        })
    }

    fn ones(h: usize, w: usize, label: SourceRole, taps: impl Fn(usize, usize) -> bool) -> Result<Self> {
        if h.is_multiple_of(2) || w.is_multiple_of(2) {
            return Err(Error::EvenKernel(h, w));
        }
        let values = DMatrix::from_fn(h, w, |r, c| if taps(r, c) { 1.0 } else { 0.0 });
        Self::new(values, label)
    }

    /// `1 x w` row of ones: stable partials.
    pub fn harmonic(w: usize) -> Result<Self> {
        Self::ones(1, w, SourceRole::Harmonic, |_, _| true)
    }

    /// `h x 1` column of ones: broadband onsets.
    pub fn percussive(h: usize) -> Result<Self> {
        Self::ones(h, 1, SourceRole::Percussive, |_, _| true)
    }

    /// Row with taps every `period` frames, `count` taps in total.
    pub fn repet(period: usize, count: usize) -> Result<Self> {
        if period == 0 {
            return Err(invalid("period", "must be at least 1 frame"));
        }
        if count < 2 {
            return Err(invalid("count", "must be at least 2"));
        }
        let w = period * (count - 1) + 1;
        let center = (w - 1) / 2;
        if w.is_multiple_of(2) {
            return Err(Error::EvenKernel(1, w));
        }
        Self::ones(1, w, SourceRole::Accompaniment, |_, c| c.abs_diff(center) % period == 0)
    }

    /// Center row plus center column of an `h x w` box.
    pub fn cross(h: usize, w: usize) -> Result<Self> {
        Self::ones(h, w, SourceRole::Voice, |r, c| r == (h - 1) / 2 || c == (w - 1) / 2)
    }

    pub fn with_label(mut self, label: SourceRole) -> Self {
        self.label = label;
        self
    }

    pub fn height(&self) -> usize {
        self.values.nrows()
    }

    pub fn width(&self) -> usize {
        self.values.ncols()
    }

    pub fn values(&self) -> &DMatrix<f64> {
        &self.values
    }

    pub fn is_binary(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0 || *v == 1.0)
    }

    /// `(bin offset, frame offset)` of every tap equal to one.
    pub fn taps(&self) -> Vec<(isize, isize)> {
        let hc = (self.height() as isize - 1) / 2;
        let wc = (self.width() as isize - 1) / 2;
        let mut taps = Vec::new();
        for c in 0..self.width() {
            for r in 0..self.height() {
                if self.values[(r, c)] == 1.0 {
                    taps.push((r as isize - hc, c as isize - wc));
                }
            }
        }
        taps
    }

    pub fn tap_count(&self) -> usize {
        self.values.iter().filter(|v| **v == 1.0).count()
    }
}

fn median_of(values: &mut [f64]) -> f64 {
    let n = values.len();
    if n == 0 {
        return 0.0;
    }
    let cmp = |a: &f64, b: &f64| a.partial_cmp(b).unwrap_or(Ordering::Equal);
    let mid = n / 2;
    let (lower, upper, _) = values.select_nth_unstable_by(mid, cmp);
    let upper = *upper;
    if n % 2 == 1 {
        upper
    } else {
        let below = lower.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        (below + upper) / 2.0
    }
}

fn gather(mags: &DMatrix<f64>, taps: &[(isize, isize)], frame: usize, bin: usize, buf: &mut Vec<f64>) {
    let (bins, frames) = mags.shape();
    buf.clear();
    for &(dm, dn) in taps {
        let m = bin as isize + dm;
        let n = frame as isize + dn;
        if m >= 0 && n >= 0 && (m as usize) < bins && (n as usize) < frames {
            buf.push(mags[(m as usize, n as usize)].abs());
        }
    }
}

/// Median of `|M|` over the kernel taps centered on (`frame`, `bin`).
///
/// Taps falling outside the matrix are dropped; an empty population gives 0.
/// Even populations average the two middle values.
pub fn median_neighborhood(mags: &DMatrix<f64>, kernel: &Kernel, frame: usize, bin: usize) -> f64 {
    let taps = kernel.taps();
    let mut buf = Vec::with_capacity(taps.len());
    gather(mags, &taps, frame, bin, &mut buf);
    median_of(&mut buf)
}

/// Whole-matrix median filter with one kernel.
pub fn median_filter(mags: &DMatrix<f64>, kernel: &Kernel) -> DMatrix<f64> {
    let taps = kernel.taps();
    let mut buf = Vec::with_capacity(taps.len());
    let (bins, frames) = mags.shape();
    let mut out = DMatrix::zeros(bins, frames);
    for n in 0..frames {
        for m in 0..bins {
            gather(mags, &taps, n, m, &mut buf);
            out[(m, n)] = median_of(&mut buf);
        }
    }
    out
}

/// Visiting order of the per-point updates within one iteration.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum KamSchedule {
    /// Each point is re-estimated in place, frames outer and bins inner, so
    /// later medians see already-updated neighbors.
    #[default]
    InPlace,
    /// Every median of an iteration reads the previous iteration's estimates.
    Jacobi,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KamConfig {
    pub kernels: Vec<Kernel>,
    pub alpha: f64,
    pub n_iter: usize,
    pub schedule: KamSchedule,
}

impl KamConfig {
    pub const DEFAULT_ITERATIONS: usize = 4;

    pub fn new(kernels: Vec<Kernel>) -> Self {
        Self {
            kernels,
            alpha: MaskSet::DEFAULT_ALPHA,
            n_iter: Self::DEFAULT_ITERATIONS,
            schedule: KamSchedule::InPlace,
        }
    }

    /// Harmonic `1 x w` and percussive `h x 1` kernels.
    pub fn hpss(h: usize, w: usize) -> Result<Self> {
        Ok(Self::new(vec![Kernel::harmonic(w)?, Kernel::percussive(h)?]))
    }

    /// Voice cross kernel plus a periodic accompaniment kernel.
    pub fn repet(period: usize, count: usize, voice_h: usize, voice_w: usize) -> Result<Self> {
        Ok(Self::new(vec![
            Kernel::cross(voice_h, voice_w)?,
            Kernel::repet(period, count)?,
        ]))
    }

    pub fn validate(&self) -> Result<()> {
        if self.kernels.len() < 2 {
            return Err(Error::TooFewSources(2));
        }
        for k in &self.kernels {
            if !k.is_binary() {
                return Err(invalid("kernels", "KAM separation needs binarized kernels"));
            }
            if k.tap_count() == 0 {
                return Err(Error::EmptyKernel(k.threshold.unwrap_or(0.0)));
            }
        }
        if !(self.alpha > 0.0) || !self.alpha.is_finite() {
            return Err(invalid("alpha", "must be positive"));
        }
        Ok(())
    }

    pub fn roles(&self) -> Vec<SourceRole> {
        self.kernels.iter().map(|k| k.label).collect()
    }
}

/// Iterative KAM separation of a mixture STFT; returns one STFT per kernel.
///
/// Every estimate is a real fraction of the mixture at each bin and the
/// fractions sum to one, so the estimates always add back to `X`.
pub fn kam_separate(x: &Stft, cfg: &KamConfig) -> Result<Vec<Stft>> {
    cfg.validate()?;
    let fractions = kam_fractions(&x.magnitude(), cfg);
    Ok(fractions
        .into_iter()
        .map(|f| x.with_data(x.data.zip_map(&f, |c, r| c * r)))
        .collect())
}

/// Per-source Wiener fractions after `cfg.n_iter` iterations.
pub(crate) fn kam_fractions(mix_mag: &DMatrix<f64>, cfg: &KamConfig) -> Vec<DMatrix<f64>> {
    let count = cfg.kernels.len();
    let (bins, frames) = mix_mag.shape();
    let share = 1.0 / count as f64;
    let mut fractions: Vec<DMatrix<f64>> = (0..count).map(|_| DMatrix::from_element(bins, frames, share)).collect();
    let mut mags: Vec<DMatrix<f64>> = (0..count).map(|_| mix_mag * share).collect();
    let taps: Vec<Vec<(isize, isize)>> = cfg.kernels.iter().map(Kernel::taps).collect();
    let max_taps = taps.iter().map(Vec::len).max().unwrap_or(0);
    let mut buf = Vec::with_capacity(max_taps);
    let mut medians = vec![0.0; count];
    let mut frac = vec![0.0; count];

    for _ in 0..cfg.n_iter {
        match cfg.schedule {
            KamSchedule::InPlace => {
                for n in 0..frames {
                    for m in 0..bins {
                        for i in 0..count {
                            gather(&mags[i], &taps[i], n, m, &mut buf);
                            medians[i] = median_of(&mut buf);
                        }
                        wiener_fractions(&medians, cfg.alpha, &mut frac);
                        let xm = mix_mag[(m, n)];
                        for i in 0..count {
                            fractions[i][(m, n)] = frac[i];
                            mags[i][(m, n)] = frac[i] * xm;
                        }
                    }
                }
            }
            KamSchedule::Jacobi => {
                let filtered: Vec<DMatrix<f64>> = mags
                    .iter()
                    .zip(&cfg.kernels)
                    .map(|(mg, k)| median_filter(mg, k))
                    .collect();
                for n in 0..frames {
                    for m in 0..bins {
                        for i in 0..count {
                            medians[i] = filtered[i][(m, n)];
                        }
                        wiener_fractions(&medians, cfg.alpha, &mut frac);
                        let xm = mix_mag[(m, n)];
                        for i in 0..count {
                            fractions[i][(m, n)] = frac[i];
                            mags[i][(m, n)] = frac[i] * xm;
                        }
                    }
                }
            }
        }
    }
    fractions
}

/// STFT, KAM separation and resynthesis of a time-domain mixture.
pub fn kam_separate_signal(x: &AudioSignal, stft_cfg: &StftConfig, cfg: &KamConfig) -> Result<Separation> {
    let spec = stft(x, stft_cfg)?;
    let estimates = kam_separate(&spec, cfg)?;
    Separation::from_stfts(estimates, &cfg.roles(), x.sample_rate, x.len())
}

#[derive(Debug, Clone, Copy, Default)]
struct Neumaier {
    sum: f64,
    carry: f64,
}

impl Neumaier {
    fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.carry += (self.sum - t) + v;
        } else {
            self.carry += (v - t) + self.sum;
        }
        self.sum = t;
    }

    fn value(self) -> f64 {
        self.sum + self.carry
    }
}

/// Learns a real-valued `h x w` kernel from an isolated source STFT.
///
/// Every point whose full neighborhood fits inside the spectrogram
/// contributes its magnitude patch, scaled to unit Frobenius norm and
/// weighted by the point's power.
pub fn train_kernel(source: &Stft, h: usize, w: usize, label: SourceRole) -> Result<Kernel> {
    if h.is_multiple_of(2) || w.is_multiple_of(2) {
        return Err(Error::EvenKernel(h, w));
    }
    let mags = source.magnitude();
    let (bins, frames) = mags.shape();
    if bins < h || frames < w {
        return Err(invalid("source", "spectrogram is smaller than the kernel"));
    }
    let (hh, hw) = ((h - 1) / 2, (w - 1) / 2);
    // Weighted mean of deviations from the first normalized patch, with
    // compensated sums: identical patches reproduce that patch bit for bit.
    let mut reference: Option<Vec<f64>> = None;
    let mut patch = vec![0.0; h * w];
    let mut acc = vec![Neumaier::default(); h * w];
    let mut total = Neumaier::default();
    for n in hw..frames - hw {
        for m in hh..bins - hh {
            let center = mags[(m, n)];
            let power = center * center;
            if power == 0.0 {
                continue;
            }
            let view = mags.view((m - hh, n - hw), (h, w));
            let peak = view.max();
            for (dst, v) in patch.iter_mut().zip(view.iter()) {
                *dst = v / peak;
            }
            let norm = patch.iter().map(|v| v * v).sum::<f64>().sqrt();
            patch.iter_mut().for_each(|v| *v /= norm);
            let base = reference.get_or_insert_with(|| patch.clone());
            for ((a, v), b) in acc.iter_mut().zip(&patch).zip(base.iter()) {
                a.add(power * (v - b));
            }
            total.add(power);
        }
    }
    let total = total.value();
    let Some(base) = reference.filter(|_| total > 0.0) else {
        return Err(Error::ZeroEnergy);
    };
    Kernel::new(
        DMatrix::from_fn(h, w, |r, c| base[c * h + r] + acc[c * h + r].value() / total),
        label,
    )
}

/// Ones where the kernel strictly exceeds `threshold`.
pub fn binarize_kernel(kernel: &Kernel, threshold: f64) -> Result<Kernel> {
    let values = kernel.values.map(|v| if v > threshold { 1.0 } else { 0.0 });
    if values.iter().all(|v| *v == 0.0) {
        return Err(Error::EmptyKernel(threshold));
    }
    Ok(Kernel {
        values,
        label: kernel.label,
        threshold: Some(threshold),
    })
}

/// Repetition period in frames from the beat spectrum (row-wise
/// autocorrelation of the power spectrogram averaged over bins), searched in
/// `min_lag..=max_lag`.
pub fn repetition_period(power: &DMatrix<f64>, min_lag: usize, max_lag: usize) -> Option<usize> {
    let (bins, frames) = power.shape();
    let max_lag = max_lag.min(frames.saturating_sub(1));
    if frames < 2 || min_lag == 0 || min_lag > max_lag {
        return None;
    }
    let fft = Fft::new((2 * frames).next_power_of_two());
    let mut beat = vec![0.0; frames];
    let mut buf = vec![C64::new(0.0, 0.0); fft.len()];
    for m in 0..bins {
        buf.iter_mut().for_each(|b| *b = C64::new(0.0, 0.0));
        for n in 0..frames {
            buf[n] = C64::new(power[(m, n)], 0.0);
        }
        fft.forward(&mut buf);
        for b in buf.iter_mut() {
            *b = C64::new(b.norm_sqr(), 0.0);
        }
        fft.inverse(&mut buf);
        for (lag, acc) in beat.iter_mut().enumerate() {
            *acc += buf[lag].re / (frames - lag) as f64;
        }
    }
    if !(beat[0] > 0.0) {
        return None;
    }
    let best = (min_lag..=max_lag).map(|l| beat[l]).fold(f64::NEG_INFINITY, f64::max);
    // Multiples of the true period score about as high; take the shortest
    // local peak that comes close to the best one.
    let is_peak = |l: usize| beat[l] >= beat[l - 1] && (l + 1 >= frames || beat[l] >= beat[l + 1]);
    (min_lag..=max_lag)
        .find(|&l| is_peak(l) && beat[l] >= 0.95 * best)
        .or(Some(min_lag))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kernel_shapes() {
        let h = Kernel::harmonic(5).unwrap();
        assert_eq!((h.height(), h.width()), (1, 5));
        assert!(h.values().iter().all(|v| *v == 1.0));
        let p = Kernel::percussive(3).unwrap();
        assert_eq!((p.height(), p.width()), (3, 1));
        assert_eq!(p.tap_count(), 3);
        let r = Kernel::repet(4, 3).unwrap();
        assert_eq!(r.width(), 9);
        assert_eq!(r.taps(), vec![(0, -4), (0, 0), (0, 4)]);
        let c = Kernel::cross(3, 5).unwrap();
        assert_eq!(c.tap_count(), 7);
    }

    #[test]
    fn even_dimensions_rejected() {
        assert_eq!(Kernel::harmonic(4).unwrap_err(), Error::EvenKernel(1, 4));
        assert_eq!(Kernel::percussive(2).unwrap_err(), Error::EvenKernel(2, 1));
        assert!(Kernel::repet(3, 2).is_err());
        assert!(Kernel::repet(0, 3).is_err());
        assert!(Kernel::repet(2, 1).is_err());
    }

    #[test]
    fn median_basics() {
        let m = DMatrix::from_element(5, 5, 7.0);
        assert_eq!(median_neighborhood(&m, &Kernel::cross(5, 5).unwrap(), 2, 2), 7.0);
        let row = DMatrix::from_row_slice(1, 3, &[1.0, 9.0, 2.0]);
        assert_eq!(median_neighborhood(&row, &Kernel::harmonic(3).unwrap(), 1, 0), 2.0);
        // Edge: only {1, 9} remain, even population.
        assert_eq!(median_neighborhood(&row, &Kernel::harmonic(3).unwrap(), 0, 0), 5.0);
    }

    #[test]
    fn binarize_thresholds() {
        let k = Kernel::new(DMatrix::from_element(3, 3, 1.0 / 3.0), SourceRole::Voice).unwrap();
        let b = binarize_kernel(&k, 0.0).unwrap();
        assert_eq!(b.tap_count(), 9);
        assert_eq!(b.threshold, Some(0.0));
        assert_eq!(binarize_kernel(&k, 1.0).unwrap_err(), Error::EmptyKernel(1.0));
        // Strict inequality.
        assert!(binarize_kernel(&k, 1.0 / 3.0).is_err());
    }

    #[test]
    fn config_requires_binary_kernels() {
        let real = Kernel::new(DMatrix::from_element(1, 3, 0.4), SourceRole::Other).unwrap();
        let cfg = KamConfig::new(vec![real, Kernel::harmonic(3).unwrap()]);
        assert!(cfg.validate().is_err());
        let cfg = KamConfig::new(vec![Kernel::harmonic(3).unwrap()]);
        assert_eq!(cfg.validate().unwrap_err(), Error::TooFewSources(2));
    }

    #[test]
    fn repetition_period_finds_loop() {
        let frames = 120;
        let power = DMatrix::from_fn(16, frames, |m, n| {
            if n % 12 == 0 || (n % 12 == 5 && m % 3 == 0) {
                1.0 + m as f64 * 0.1
            } else {
                0.01
            }
        });
        assert_eq!(repetition_period(&power, 4, 40), Some(12));
    }
}
