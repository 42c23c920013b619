//! Seeded synthetic mixtures with known sources and voice-activity truth.

use std::f64::consts::PI;

use morphsep_core::{AudioSignal, SourceRole};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::Error;

/// Ramp applied inside each voice segment edge, in seconds.
const SEGMENT_RAMP_S: f64 = 0.01;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Component {
    /// Sustained harmonic tone with `1/k` partial amplitudes.
    Drone { f0: f64, partials: usize, amp: f64 },
    /// Equal-amplitude sinusoids at arbitrary frequencies.
    Partials { freqs: Vec<f64>, amp: f64 },
    /// Frequency-modulated harmonic "voice", silent outside `segments`.
    /// `glide_octaves` sets the span of a slow non-repeating pitch drift.
    Vibrato {
        f0: f64,
        depth: f64,
        rate_hz: f64,
        glide_octaves: f64,
        amp: f64,
        segments: Vec<(f64, f64)>,
    },
    /// Decaying noise bursts every `period_s` seconds.
    Clicks { period_s: f64, amp: f64 },
    /// Four three-note chords of `chord_s` seconds each, looped.
    ChordLoop { chord_s: f64, amp: f64 },
}

impl Component {
    pub fn name(&self) -> &'static str {
        match self {
            Component::Drone { .. } => "drone",
            Component::Partials { .. } => "partials",
            Component::Vibrato { .. } => "voice",
            Component::Clicks { .. } => "clicks",
            Component::ChordLoop { .. } => "chords",
        }
    }

    pub fn role(&self) -> SourceRole {
        match self {
            Component::Drone { .. } | Component::Partials { .. } => SourceRole::Harmonic,
            Component::Vibrato { .. } => SourceRole::Voice,
            Component::Clicks { .. } => SourceRole::Percussive,
            Component::ChordLoop { .. } => SourceRole::Accompaniment,
        }
    }

    fn render(&self, len: usize, rate: u32, rng: &mut ChaCha8Rng) -> Vec<f64> {
        let fs = f64::from(rate);
        match self {
            Component::Drone { f0, partials, amp } => (0..len)
                .map(|n| {
                    let t = n as f64 / fs;
                    (1..=*partials)
                        .map(|k| amp / k as f64 * (2.0 * PI * k as f64 * f0 * t).sin())
                        .sum()
                })
                .collect(),
            Component::Partials { freqs, amp } => (0..len)
                .map(|n| {
                    let t = n as f64 / fs;
                    freqs.iter().map(|f| amp * (2.0 * PI * f * t).sin()).sum()
                })
                .collect(),
            Component::Vibrato {
                f0,
                depth,
                rate_hz,
                glide_octaves,
                amp,
                segments,
            } => {
                let mut phase = 0.0;
                (0..len)
                    .map(|n| {
                        let t = n as f64 / fs;
                        let drift = glide_octaves
                            * ((2.0 * PI * 0.13 * t).sin() + 0.6 * (2.0 * PI * 0.31 * t + 1.0).sin())
                            / 1.6;
                        let f = f0 * drift.exp2() * (1.0 + depth * (2.0 * PI * rate_hz * t).sin());
                        phase += 2.0 * PI * f / fs;
                        let gain = segment_gain(t, segments);
                        if gain == 0.0 {
                            return 0.0;
                        }
                        gain * amp * (1..=6).map(|k| (k as f64 * phase).sin() / k as f64).sum::<f64>()
                    })
                    .collect()
            }
            Component::Clicks { period_s, amp } => {
                let mut s = vec![0.0; len];
                let period = ((period_s * fs).round() as usize).max(1);
                let decay = (fs * 0.004).max(2.0);
                for start in (period / 2..len).step_by(period) {
                    for k in 0..(decay as usize * 6) {
                        if start + k < len {
                            s[start + k] += amp * (-(k as f64) / decay).exp() * rng.random_range(-1.0..1.0);
                        }
                    }
                }
                s
            }
            Component::ChordLoop { chord_s, amp } => {
                let chords = [
                    [130.81, 164.81, 196.00],
                    [110.00, 130.81, 164.81],
                    [87.31, 110.00, 130.81],
                    [98.00, 123.47, 146.83],
                ];
                let seg = ((chord_s * fs) as usize).max(1);
                (0..len)
                    .map(|n| {
                        let chord = &chords[(n / seg) % chords.len()];
                        let t = (n % seg) as f64 / fs;
                        let env = (-3.0 * t).exp() * (t / 0.005).min(1.0);
                        chord
                            .iter()
                            .map(|f| {
                                (1..=4)
                                    .map(|k| (2.0 * PI * f * k as f64 * t).sin() / (k * k) as f64)
                                    .sum::<f64>()
                            })
                            .sum::<f64>()
                            * amp
                            * env
                    })
                    .collect()
            }
        }
    }

    fn validate(&self) -> Result<(), Error> {
        let bad = |m: &str| Err(Error::format(format!("{} component: {m}", self.name())));
        match self {
            Component::Drone { f0, partials, .. } if !(*f0 > 0.0) || *partials == 0 => {
                bad("needs f0 > 0 and partials >= 1")
            }
            Component::Partials { freqs, .. } if freqs.is_empty() || freqs.iter().any(|f| !(*f > 0.0)) => {
                bad("needs positive frequencies")
            }
            Component::Vibrato { f0, segments, .. }
                if !(*f0 > 0.0) || segments.iter().any(|(a, b)| !(*a >= 0.0 && a < b)) =>
            {
                bad("needs f0 > 0 and segments with 0 <= start < end")
            }
            Component::Clicks { period_s, .. } if !(*period_s > 0.0) => bad("needs period_s > 0"),
            Component::ChordLoop { chord_s, .. } if !(*chord_s > 0.0) => bad("needs chord_s > 0"),
            _ => Ok(()),
        }
    }
}

fn segment_gain(t: f64, segments: &[(f64, f64)]) -> f64 {
    segments
        .iter()
        .map(|(s, e)| {
            if t < *s || t >= *e {
                0.0
            } else {
                ((t - s) / SEGMENT_RAMP_S).min((e - t) / SEGMENT_RAMP_S).min(1.0)
            }
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recipe {
    pub sample_rate: u32,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    pub components: Vec<Component>,
}

impl Recipe {
    pub const PRESETS: [&'static str; 3] = ["tone-clicks", "voice-drone-clicks", "voice-chords-clicks"];

    pub fn preset(name: &str) -> Option<Self> {
        let voice = |amp: f64, segments: Vec<(f64, f64)>| Component::Vibrato {
            f0: 330.0,
            depth: 0.03,
            rate_hz: 5.5,
            glide_octaves: 0.8,
            amp,
            segments,
        };
        Some(match name {
            "tone-clicks" => Self {
                sample_rate: 22050,
                duration_s: 3.0,
                seed: 0,
                components: vec![
                    Component::Partials {
                        freqs: vec![440.0],
                        amp: 0.3,
                    },
                    Component::Clicks {
                        period_s: 0.25,
                        amp: 0.6,
                    },
                ],
            },
            "voice-drone-clicks" => Self {
                sample_rate: 22050,
                duration_s: 30.0,
                seed: 0,
                components: vec![
                    voice(0.5, vec![(2.0, 7.0), (10.0, 14.5), (18.0, 21.0), (24.0, 28.0)]),
                    Component::Drone {
                        f0: 110.0,
                        partials: 6,
                        amp: 0.15,
                    },
                    Component::Clicks {
                        period_s: 0.25,
                        amp: 0.4,
                    },
                ],
            },
            "voice-chords-clicks" => Self {
                sample_rate: 22050,
                duration_s: 10.0,
                seed: 0,
                components: vec![
                    voice(0.4, vec![(1.0, 4.0), (6.0, 9.0)]),
                    Component::ChordLoop { chord_s: 0.5, amp: 0.1 },
                    Component::Clicks {
                        period_s: 0.25,
                        amp: 0.3,
                    },
                ],
            },
            _ => return None,
        })
    }

    pub fn len(&self) -> usize {
        (self.duration_s * f64::from(self.sample_rate)).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.components.is_empty()
    }

    pub fn validate(&self) -> Result<(), Error> {
        if self.components.is_empty() {
            return Err(Error::format("recipe has no components".into()));
        }
        if self.sample_rate == 0 || !(self.duration_s > 0.0) {
            return Err(Error::format("recipe needs a positive rate and duration".into()));
        }
        self.components.iter().try_for_each(Component::validate)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSource {
    pub name: String,
    pub role: SourceRole,
    pub signal: AudioSignal,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Synthesis {
    pub mixture: AudioSignal,
    pub sources: Vec<SynthSource>,
    /// Voice-active spans, sorted and merged.
    pub segments: Vec<(f64, f64)>,
}

impl Synthesis {
    pub fn references(&self) -> Vec<AudioSignal> {
        self.sources.iter().map(|s| s.signal.clone()).collect()
    }

    pub fn roles(&self) -> Vec<SourceRole> {
        self.sources.iter().map(|s| s.role).collect()
    }
}

/// Renders every component and their plain sum.
pub fn synth_mixture(recipe: &Recipe) -> Result<Synthesis, Error> {
    recipe.validate()?;
    let len = recipe.len();
    let rate = recipe.sample_rate;
    let mut sources: Vec<SynthSource> = Vec::with_capacity(recipe.components.len());
    for (i, c) in recipe.components.iter().enumerate() {
        let mut rng = ChaCha8Rng::seed_from_u64(recipe.seed.wrapping_add(i as u64));
        let base = c.name();
        let taken = sources.iter().filter(|s| s.name.starts_with(base)).count();
        let name = if taken == 0 {
            base.to_string()
        } else {
            format!("{base}{}", taken + 1)
        };
        sources.push(SynthSource {
            name,
            role: c.role(),
            signal: AudioSignal::new(c.render(len, rate, &mut rng), rate),
        });
    }
    let mixture = AudioSignal::sum(sources.iter().map(|s| &s.signal))?;
    let end_s = len as f64 / f64::from(rate);
    let mut segments: Vec<(f64, f64)> = recipe
        .components
        .iter()
        .filter_map(|c| match c {
            Component::Vibrato { segments, .. } => Some(segments.iter().copied()),
            _ => None,
        })
        .flatten()
        .filter(|(s, _)| *s < end_s)
        .map(|(s, e)| (s, e.min(end_s)))
        .collect();
    segments.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut merged: Vec<(f64, f64)> = Vec::new();
    for (s, e) in segments {
        match merged.last_mut() {
            Some(last) if s <= last.1 => last.1 = last.1.max(e),
            _ => merged.push((s, e)),
        }
    }
    Ok(Synthesis {
        mixture,
        sources,
        segments: merged,
    })
}
