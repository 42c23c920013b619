//! Objective separation quality and frame-level detection scores.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};
#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;

use crate::error::{Error, Result};
use crate::signal::AudioSignal;

/// Finite stand-in for an infinite ratio in dB.
pub const DB_SENTINEL: f64 = 200.0;

fn ratio_db(num: f64, den: f64) -> f64 {
    // An empty error term wins even when the signal term is empty too.
    if den <= 0.0 {
        return DB_SENTINEL;
    }
    if num <= 0.0 {
        return -DB_SENTINEL;
    }
    (10.0 * (num / den).log10()).clamp(-DB_SENTINEL, DB_SENTINEL)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Reconstruction quality factor `10 log10(||s||^2 / ||s - s_hat||^2)`.
pub fn rqf(reference: &AudioSignal, estimate: &AudioSignal) -> Result<f64> {
    if reference.len() != estimate.len() {
        return Err(Error::LengthMismatch(reference.len(), estimate.len()));
    }
    let energy = reference.energy();
    if !(energy > 0.0) {
        return Err(Error::ZeroEnergy);
    }
    let err: f64 = reference
        .samples
        .iter()
        .zip(&estimate.samples)
        .map(|(a, b)| (a - b) * (a - b))
        .sum();
    Ok(ratio_db(energy, err))
}

/// Orthogonal decomposition of an estimate against the reference sources.
#[derive(Debug, Clone, PartialEq)]
pub struct BssDecomposition {
    pub target: Vec<f64>,
    pub interference: Vec<f64>,
    pub artifacts: Vec<f64>,
}

impl BssDecomposition {
    pub fn sdr(&self) -> f64 {
        let dist: Vec<f64> = self
            .interference
            .iter()
            .zip(&self.artifacts)
            .map(|(a, b)| a + b)
            .collect();
        ratio_db(dot(&self.target, &self.target), dot(&dist, &dist))
    }

    pub fn sir(&self) -> f64 {
        ratio_db(
            dot(&self.target, &self.target),
            dot(&self.interference, &self.interference),
        )
    }

    pub fn sar(&self) -> f64 {
        let sig: Vec<f64> = self.target.iter().zip(&self.interference).map(|(a, b)| a + b).collect();
        ratio_db(dot(&sig, &sig), dot(&self.artifacts, &self.artifacts))
    }
}

/// Time-invariant gain decomposition: `target` is the projection on the
/// target reference, `interference` the remaining part of the projection on
/// the span of all references, `artifacts` what lies outside that span.
pub fn bss_decompose(
    estimate: &AudioSignal,
    references: &[AudioSignal],
    target_index: usize,
) -> Result<BssDecomposition> {
    if references.is_empty() || target_index >= references.len() {
        return Err(Error::DegenerateReferences);
    }
    let len = estimate.len();
    for r in references {
        if r.len() != len {
            return Err(Error::LengthMismatch(len, r.len()));
        }
        if !(r.energy() > 0.0) {
            return Err(Error::DegenerateReferences);
        }
    }
    let k = references.len();
    let gram = DMatrix::from_fn(k, k, |i, j| dot(&references[i].samples, &references[j].samples));
    let rhs = DVector::from_fn(k, |i, _| dot(&references[i].samples, &estimate.samples));
    let coeffs = gram.cholesky().ok_or(Error::DegenerateReferences)?.solve(&rhs);

    let t = &references[target_index].samples;
    let gain = dot(t, &estimate.samples) / dot(t, t);
    let target: Vec<f64> = t.iter().map(|v| gain * v).collect();
    let mut projection = alloc::vec![0.0; len];
    for (c, r) in coeffs.iter().zip(references) {
        for (p, v) in projection.iter_mut().zip(&r.samples) {
            *p += c * v;
        }
    }
    let interference = projection.iter().zip(&target).map(|(p, s)| p - s).collect();
    let artifacts = estimate.samples.iter().zip(&projection).map(|(e, p)| e - p).collect();
    Ok(BssDecomposition {
        target,
        interference,
        artifacts,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BssScore {
    pub sdr_db: f64,
    pub sir_db: f64,
    pub sar_db: f64,
}

pub fn bss_eval(estimate: &AudioSignal, references: &[AudioSignal], target_index: usize) -> Result<BssScore> {
    let d = bss_decompose(estimate, references, target_index)?;
    Ok(BssScore {
        sdr_db: d.sdr(),
        sir_db: d.sir(),
        sar_db: d.sar(),
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeparationScore {
    pub rqf_db: f64,
    pub sdr_db: f64,
    pub sir_db: f64,
    pub sar_db: f64,
}

pub fn separation_score(
    estimate: &AudioSignal,
    references: &[AudioSignal],
    target_index: usize,
) -> Result<SeparationScore> {
    let bss = bss_eval(estimate, references, target_index)?;
    let rqf_db = rqf(&references[target_index], estimate)?;
    Ok(SeparationScore {
        rqf_db,
        sdr_db: bss.sdr_db,
        sir_db: bss.sir_db,
        sar_db: bss.sar_db,
    })
}

/// Recall and precision of one class; `None` where undefined.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ClassScore {
    pub recall: Option<f64>,
    pub precision: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DetectionScore {
    pub av_rec: f64,
    pub av_prec: f64,
    pub f_meas: f64,
    pub voice: ClassScore,
    pub music: ClassScore,
}

/// Harmonic mean of averaged recall and precision.
pub fn f_measure(av_rec: f64, av_prec: f64) -> f64 {
    if av_rec + av_prec > 0.0 {
        2.0 * av_rec * av_prec / (av_rec + av_prec)
    } else {
        0.0
    }
}

fn class_score(pred: &[bool], truth: &[bool], class: bool) -> ClassScore {
    let in_truth = truth.iter().filter(|t| **t == class).count();
    let in_pred = pred.iter().filter(|p| **p == class).count();
    let hits = pred
        .iter()
        .zip(truth)
        .filter(|(p, t)| **p == class && **t == class)
        .count();
    // A class missing from both sides was handled perfectly; missing from
    // only one side leaves the corresponding ratio undefined.
    let recall = match (in_truth, in_pred) {
        (0, 0) => Some(1.0),
        (0, _) => None,
        (n, _) => Some(hits as f64 / n as f64),
    };
    let precision = match (in_pred, in_truth) {
        (0, 0) => Some(1.0),
        (0, _) => None,
        (n, _) => Some(hits as f64 / n as f64),
    };
    ClassScore { recall, precision }
}

fn mean_defined(values: [Option<f64>; 2]) -> f64 {
    let defined: Vec<f64> = values.iter().flatten().copied().collect();
    if defined.is_empty() {
        0.0
    } else {
        defined.iter().sum::<f64>() / defined.len() as f64
    }
}

/// Class-averaged recall/precision over voice (`true`) and music (`false`)
/// frames, and their F-measure.
pub fn detection_metrics(pred: &[bool], truth: &[bool]) -> Result<DetectionScore> {
    if pred.len() != truth.len() {
        return Err(Error::LengthMismatch(pred.len(), truth.len()));
    }
    if pred.is_empty() {
        return Err(Error::EmptySignal);
    }
    let voice = class_score(pred, truth, true);
    let music = class_score(pred, truth, false);
    let av_rec = mean_defined([voice.recall, music.recall]);
    let av_prec = mean_defined([voice.precision, music.precision]);
    Ok(DetectionScore {
        av_rec,
        av_prec,
        f_meas: f_measure(av_rec, av_prec),
        voice,
        music,
    })
}
