//! Method dispatch: mask estimation, Wiener filtering and resynthesis, with
//! optional harmonic/percussive preprocessing and F0 refinement of the
//! voice estimate, and the full voice-detection chain built on top.

use alloc::vec;
use alloc::vec::Vec;

#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::filter;
use crate::kam::{kam_separate, repetition_period, KamConfig, Kernel};
use crate::masking::{oracle_masks, wiener_apply, MaskSet, SourceRole};
use crate::pitch::{f0_filter, f0_track, YinConfig};
use crate::resample::resample;
use crate::rpca::{rpca_masks, RpcaConfig};
use crate::signal::AudioSignal;
use crate::stft::{istft, spectrogram, stft, Stft, StftConfig};
use crate::tv::{tv_separate, TvConfig};
use crate::vad::{detect_voice, vtmr, DetectionLattice, VadConfig};

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatedSource {
    pub role: SourceRole,
    pub signal: AudioSignal,
    pub stft: Stft,
}

/// Time-domain estimates with the STFTs they were synthesized from.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Separation {
    pub sources: Vec<EstimatedSource>,
}

fn fit_length(mut samples: Vec<f64>, len: usize) -> Vec<f64> {
    samples.resize(len, 0.0);
    samples
}

impl Separation {
    /// Inverts each STFT, brings it to `target_rate` and trims or pads to
    /// `target_len` samples.
    pub fn from_stfts(estimates: Vec<Stft>, roles: &[SourceRole], target_rate: u32, target_len: usize) -> Result<Self> {
        if estimates.len() != roles.len() {
            return Err(Error::LengthMismatch(estimates.len(), roles.len()));
        }
        let mut sources = Vec::with_capacity(estimates.len());
        for (spec, role) in estimates.into_iter().zip(roles) {
            let mut signal = istft(&spec)?;
            if signal.sample_rate != target_rate {
                signal = resample(&signal, target_rate)?;
            }
            signal.samples = fit_length(signal.samples, target_len);
            sources.push(EstimatedSource {
                role: *role,
                signal,
                stft: spec,
            });
        }
        Ok(Self { sources })
    }

    pub fn len(&self) -> usize {
        self.sources.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sources.is_empty()
    }

    pub fn roles(&self) -> Vec<SourceRole> {
        self.sources.iter().map(|s| s.role).collect()
    }

    pub fn position(&self, role: SourceRole) -> Option<usize> {
        self.sources.iter().position(|s| s.role == role)
    }

    pub fn get(&self, role: SourceRole) -> Option<&EstimatedSource> {
        self.sources.iter().find(|s| s.role == role)
    }

    pub fn voice(&self) -> Result<&EstimatedSource> {
        self.get(SourceRole::Voice)
            .ok_or(Error::MissingPrerequisite("a voice estimate"))
    }

    pub fn signals(&self) -> Vec<AudioSignal> {
        self.sources.iter().map(|s| s.signal.clone()).collect()
    }

    /// Sample-wise sum of all estimates.
    pub fn mixture(&self) -> Result<AudioSignal> {
        AudioSignal::sum(self.sources.iter().map(|s| &s.signal))
    }
}

/// Separation method and its method-specific settings.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    /// Masks from the true sources.
    Oracle {
        references: Vec<AudioSignal>,
        roles: Vec<SourceRole>,
    },
    Tv(TvConfig),
    Rpca(RpcaConfig),
    /// Cross-shaped voice kernel against a periodic accompaniment kernel.
    /// The period (in frames) is estimated from the mixture when `None`.
    KamRepet {
        period: Option<usize>,
        count: usize,
        voice_kernel: (usize, usize),
    },
    /// Binarized kernels, one per source; labels name the sources.
    KamCustom(Vec<Kernel>),
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::Oracle { .. } => "oracle",
            Method::Tv(_) => "tv",
            Method::Rpca(_) => "rpca",
            Method::KamRepet { .. } => "kam-repet",
            Method::KamCustom(_) => "kam-cust",
        }
    }

    pub fn kam_repet() -> Self {
        Method::KamRepet {
            period: None,
            count: 5,
            voice_kernel: (9, 9),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparateConfig {
    pub stft: StftConfig,
    pub alpha: f64,
    pub kam_iters: usize,
    /// `(h, w)` of the harmonic/percussive kernels run before the method.
    pub hpss: Option<(usize, usize)>,
    /// Keep only the F0 partials of the voice estimate.
    pub f0: Option<YinConfig>,
}

impl SeparateConfig {
    pub const DEFAULT_HPSS: (usize, usize) = (19, 19);

    pub fn new(stft: StftConfig) -> Self {
        Self {
            stft,
            alpha: MaskSet::DEFAULT_ALPHA,
            kam_iters: KamConfig::DEFAULT_ITERATIONS,
            hpss: None,
            f0: None,
        }
    }

    /// 2048-sample Hann frames with 75% overlap.
    pub fn for_rate(sample_rate: u32) -> Self {
        Self::new(StftConfig::new(2048, 512, sample_rate))
    }
}

fn kam_signal(x: &AudioSignal, spec: &Stft, kam: &KamConfig) -> Result<Separation> {
    let estimates = kam_separate(spec, kam)?;
    Separation::from_stfts(estimates, &kam.roles(), x.sample_rate, x.len())
}

fn run_method(x: &AudioSignal, method: &Method, cfg: &SeparateConfig) -> Result<Separation> {
    if let Method::Tv(tv) = method {
        return tv_separate(x, tv);
    }
    cfg.stft.validate()?;
    let spec = stft(x, &cfg.stft)?;
    match method {
        Method::Oracle { references, roles } => {
            if references.len() != roles.len() {
                return Err(Error::LengthMismatch(references.len(), roles.len()));
            }
            if references.len() < 2 {
                return Err(Error::MissingPrerequisite("at least two oracle references"));
            }
            let specs = references
                .iter()
                .map(|r| {
                    x.check_compatible(r)?;
                    stft(r, &cfg.stft)
                })
                .collect::<Result<Vec<_>>>()?;
            let masks = oracle_masks(&specs, cfg.alpha)?.with_roles(roles.clone())?;
            let estimates = wiener_apply(&spec, &masks)?;
            Separation::from_stfts(estimates, roles, x.sample_rate, x.len())
        }
        Method::Rpca(pcp) => {
            let w = spectrogram(&spec, 1.0);
            let (masks, _) = rpca_masks(&w, pcp, cfg.alpha)?;
            let estimates = wiener_apply(&spec, &masks)?;
            Separation::from_stfts(estimates, masks.roles(), x.sample_rate, x.len())
        }
        Method::KamRepet {
            period,
            count,
            voice_kernel,
        } => {
            let period = match period {
                Some(p) => *p,
                None => {
                    let frames = spec.frames();
                    let frame_s = cfg.stft.hop as f64 / f64::from(cfg.stft.sample_rate);
                    let min_lag = ((0.5 / frame_s).round() as usize).max(1);
                    repetition_period(&spectrogram(&spec, 1.0), min_lag, frames / 3)
                        .ok_or(Error::MissingPrerequisite("a repetition period (signal too short)"))?
                }
            };
            let mut kam = KamConfig::repet(period, *count, voice_kernel.0, voice_kernel.1)?;
            kam.alpha = cfg.alpha;
            kam.n_iter = cfg.kam_iters;
            kam_signal(x, &spec, &kam)
        }
        Method::KamCustom(kernels) => {
            if kernels.is_empty() {
                return Err(Error::MissingPrerequisite("kernels"));
            }
            let mut kam = KamConfig::new(kernels.clone());
            kam.alpha = cfg.alpha;
            kam.n_iter = cfg.kam_iters;
            kam_signal(x, &spec, &kam)
        }
        Method::Tv(_) => unreachable!("handled above"),
    }
}

/// Adds `signal` into the source with `role`, or appends it as a new one.
fn merge_into(sep: &mut Separation, role: SourceRole, signal: AudioSignal) -> Result<()> {
    match sep.position(role) {
        Some(i) => {
            let src = &mut sep.sources[i];
            let sum = AudioSignal::sum([&src.signal, &signal])?;
            let cfg = src.stft.config;
            src.stft = stft(&resample(&sum, cfg.sample_rate)?, &cfg)?;
            src.signal = sum;
        }
        None => {
            let cfg = StftConfig {
                sample_rate: signal.sample_rate,
                ..sep.sources[0].stft.config
            };
            let spec = stft(&signal, &cfg)?;
            sep.sources.push(EstimatedSource {
                role,
                signal,
                stft: spec,
            });
        }
    }
    Ok(())
}

/// Where the non-voice part of a refined voice estimate goes.
fn residual_target(sep: &Separation) -> SourceRole {
    [SourceRole::Harmonic, SourceRole::Accompaniment, SourceRole::Other]
        .into_iter()
        .find(|r| sep.position(*r).is_some())
        .unwrap_or(SourceRole::Harmonic)
}

/// Runs one separation method on `x`.
///
/// With `hpss`, the mixture is first split by harmonic/percussive kernels;
/// the method then runs on the harmonic part and the percussive part is
/// returned as its own source. With `f0`, the voice estimate keeps only its
/// F0 partials and the remainder joins the harmonic accompaniment. In every
/// case the estimates add back to `x` up to STFT round-trip error.
pub fn separate(x: &AudioSignal, method: &Method, cfg: &SeparateConfig) -> Result<Separation> {
    if x.is_empty() {
        return Err(Error::EmptySignal);
    }
    if !(cfg.alpha > 0.0) || !cfg.alpha.is_finite() {
        return Err(crate::error::invalid("alpha", "must be positive"));
    }
    let oracle = matches!(method, Method::Oracle { .. });
    let (mut sep, percussive) = match cfg.hpss {
        Some((h, w)) if !oracle => {
            let mut kam = KamConfig::hpss(h, w)?;
            kam.alpha = cfg.alpha;
            kam.n_iter = cfg.kam_iters;
            let spec = stft(x, &cfg.stft)?;
            let split = kam_signal(x, &spec, &kam)?;
            let mut parts = split.sources.into_iter();
            let harmonic = parts.next().expect("two sources").signal;
            let percussive = parts.next().expect("two sources").signal;
            (run_method(&harmonic, method, cfg)?, Some(percussive))
        }
        _ => (run_method(x, method, cfg)?, None),
    };
    if let Some(p) = percussive {
        merge_into(&mut sep, SourceRole::Percussive, p)?;
    }

    if let Some(yin) = cfg.f0 {
        let vi = sep
            .position(SourceRole::Voice)
            .ok_or(Error::MissingPrerequisite("a voice estimate for F0 filtering"))?;
        let target = residual_target(&sep);
        let voice = &sep.sources[vi];
        let analysis = resample(&voice.signal, voice.stft.config.sample_rate)?;
        let track = f0_track(&analysis, &voice.stft.config, &yin)?;
        let (kept, rest) = f0_filter(&voice.stft, &track);
        let rate = voice.signal.sample_rate;
        let len = voice.signal.len();
        let refined = Separation::from_stfts(vec![kept, rest], &[SourceRole::Voice, target], rate, len)?;
        let mut parts = refined.sources.into_iter();
        sep.sources[vi] = parts.next().expect("two sources");
        let residual = parts.next().expect("two sources").signal;
        merge_into(&mut sep, target, residual)?;
    }
    Ok(sep)
}

/// Separation followed by band-limited voice-to-music ratios and decisions.
pub fn detect_pipeline(
    x: &AudioSignal,
    method: &Method,
    cfg: &SeparateConfig,
    vad: &VadConfig,
) -> Result<DetectionLattice> {
    vad.validate()?;
    let sep = separate(x, method, cfg)?;
    let voice = &sep.voice()?.signal;
    let (low, high) = vad.band;
    let x_band = filter::bandpass(x, low, high)?;
    let v_band = filter::bandpass(voice, low, high)?;
    let lattice = vtmr(&x_band, &v_band, vad)?;
    Ok(detect_voice(lattice, vad.voice_thr))
}
