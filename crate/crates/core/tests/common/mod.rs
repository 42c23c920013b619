#![allow(dead_code)]

use std::f64::consts::PI;

use morphsep_core::AudioSignal;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn noise(len: usize, rate: u32, seed: u64) -> AudioSignal {
    let mut r = rng(seed);
    AudioSignal::new((0..len).map(|_| r.random_range(-1.0..1.0)).collect(), rate)
}

pub fn tone(freq: f64, amp: f64, len: usize, rate: u32) -> AudioSignal {
    let fs = f64::from(rate);
    AudioSignal::new(
        (0..len)
            .map(|n| amp * (2.0 * PI * freq * n as f64 / fs).sin())
            .collect(),
        rate,
    )
}

/// Sum of harmonic partials with 1/k amplitudes.
pub fn partials(f0: f64, count: usize, amp: f64, len: usize, rate: u32) -> AudioSignal {
    let fs = f64::from(rate);
    AudioSignal::new(
        (0..len)
            .map(|n| {
                let t = n as f64 / fs;
                (1..=count)
                    .map(|k| amp / k as f64 * (2.0 * PI * k as f64 * f0 * t).sin())
                    .sum()
            })
            .collect(),
        rate,
    )
}

/// Decaying noise bursts every `period` samples.
pub fn clicks(len: usize, rate: u32, period: usize, amp: f64, seed: u64) -> AudioSignal {
    let mut r = rng(seed);
    let mut s = vec![0.0; len];
    let decay = (f64::from(rate) * 0.004).max(2.0);
    for start in (period / 2..len).step_by(period) {
        for k in 0..(decay as usize * 6) {
            if start + k < len {
                s[start + k] += amp * (-(k as f64) / decay).exp() * r.random_range(-1.0..1.0);
            }
        }
    }
    AudioSignal::new(s, rate)
}

/// Frequency-modulated harmonic tone, silent outside `segments` (seconds).
pub fn vibrato(
    f0: f64,
    depth: f64,
    rate_hz: f64,
    amp: f64,
    len: usize,
    rate: u32,
    segments: &[(f64, f64)],
) -> AudioSignal {
    let fs = f64::from(rate);
    let mut phase = 0.0;
    let ramp = 0.01 * fs;
    AudioSignal::new(
        (0..len)
            .map(|n| {
                let t = n as f64 / fs;
                let f = f0 * (1.0 + depth * (2.0 * PI * rate_hz * t).sin());
                phase += 2.0 * PI * f / fs;
                let gain = segments
                    .iter()
                    .map(|(s, e)| {
                        let (a, b) = (s * fs, e * fs);
                        let x = n as f64;
                        if x < a || x >= b {
                            0.0
                        } else {
                            ((x - a) / ramp).min((b - x) / ramp).min(1.0)
                        }
                    })
                    .fold(0.0, f64::max);
                if gain == 0.0 {
                    return 0.0;
                }
                gain * amp * (1..=6).map(|k| (k as f64 * phase).sin() / k as f64).sum::<f64>()
            })
            .collect(),
        rate,
    )
}

pub fn rel_err(a: &[f64], b: &[f64]) -> f64 {
    let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum();
    let den: f64 = b.iter().map(|y| y * y).sum();
    (num / den).sqrt()
}

pub fn energy(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum()
}

/// Power of the `freq` component via the Goertzel recurrence.
pub fn goertzel_power(x: &[f64], freq: f64, rate: u32) -> f64 {
    let w = 2.0 * PI * freq / f64::from(rate);
    let coeff = 2.0 * w.cos();
    let (mut s1, mut s2) = (0.0, 0.0);
    for v in x {
        let s = v + coeff * s1 - s2;
        s2 = s1;
        s1 = s;
    }
    (s1 * s1 + s2 * s2 - coeff * s1 * s2) / (x.len() as f64).powi(2)
}

pub fn gaussian(r: &mut ChaCha8Rng) -> f64 {
    let u1: f64 = r.random_range(f64::MIN_POSITIVE..1.0);
    let u2: f64 = r.random();
    (-2.0 * u1.ln()).sqrt() * (2.0 * PI * u2).cos()
}

/// Rank-`rank` matrix with N(0, 1/n) factors plus a sparse part with
/// `density` support of +-1 entries.
pub fn low_rank_plus_sparse(
    rows: usize,
    cols: usize,
    rank: usize,
    density: f64,
    seed: u64,
) -> (nalgebra::DMatrix<f64>, nalgebra::DMatrix<f64>) {
    let mut r = rng(seed);
    let sd = (1.0 / rows.max(cols) as f64).sqrt();
    let u = nalgebra::DMatrix::from_fn(rows, rank, |_, _| sd * gaussian(&mut r));
    let v = nalgebra::DMatrix::from_fn(rank, cols, |_, _| sd * gaussian(&mut r));
    let low = u * v;
    let sparse = nalgebra::DMatrix::from_fn(rows, cols, |_, _| {
        if r.random::<f64>() < density {
            if r.random::<bool>() {
                1.0
            } else {
                -1.0
            }
        } else {
            0.0
        }
    });
    (low, sparse)
}

/// Four three-note chords of `chord_s` seconds each, looped.
pub fn chord_loop(chord_s: f64, amp: f64, len: usize, rate: u32) -> AudioSignal {
    let fs = f64::from(rate);
    let chords = [
        [130.81, 164.81, 196.00],
        [110.00, 130.81, 164.81],
        [87.31, 110.00, 130.81],
        [98.00, 123.47, 146.83],
    ];
    let seg = (chord_s * fs) as usize;
    AudioSignal::new(
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
            .collect(),
        rate,
    )
}

/// Coefficient of `reference` in the least-squares projection of `y`.
pub fn projection_gain(y: &[f64], reference: &[f64]) -> f64 {
    y.iter().zip(reference).map(|(a, b)| a * b).sum::<f64>() / energy(reference)
}

/// Vibrato voice stepping through `notes` (Hz), `note_s` seconds each,
/// silent outside `segments`.
pub fn melody(notes: &[f64], note_s: f64, amp: f64, len: usize, rate: u32, segments: &[(f64, f64)]) -> AudioSignal {
    let fs = f64::from(rate);
    let mut phase = 0.0;
    let ramp = 0.01 * fs;
    AudioSignal::new(
        (0..len)
            .map(|n| {
                let t = n as f64 / fs;
                let f0 = notes[((t / note_s) as usize) % notes.len()];
                let f = f0 * (1.0 + 0.03 * (2.0 * PI * 5.5 * t).sin());
                phase += 2.0 * PI * f / fs;
                let x = n as f64;
                let gain = segments
                    .iter()
                    .map(|(s, e)| {
                        let (a, b) = (s * fs, e * fs);
                        if x < a || x >= b {
                            0.0
                        } else {
                            ((x - a) / ramp).min((b - x) / ramp).min(1.0)
                        }
                    })
                    .fold(0.0, f64::max);
                if gain == 0.0 {
                    return 0.0;
                }
                gain * amp * (1..=6).map(|k| (k as f64 * phase).sin() / k as f64).sum::<f64>()
            })
            .collect(),
        rate,
    )
}

/// Harmonic voice whose pitch glides without repeating: two slow
/// incommensurate sweeps plus a 5.5 Hz vibrato around `center` Hz.
pub fn wandering(center: f64, amp: f64, len: usize, rate: u32) -> AudioSignal {
    let fs = f64::from(rate);
    let mut phase = 0.0;
    AudioSignal::new(
        (0..len)
            .map(|n| {
                let t = n as f64 / fs;
                let octaves = 0.5 * (2.0 * PI * 0.13 * t).sin() + 0.3 * (2.0 * PI * 0.31 * t + 1.0).sin();
                let f = center * octaves.exp2() * (1.0 + 0.03 * (2.0 * PI * 5.5 * t).sin());
                phase += 2.0 * PI * f / fs;
                amp * (1..=6).map(|k| (k as f64 * phase).sin() / k as f64).sum::<f64>()
            })
            .collect(),
        rate,
    )
}
