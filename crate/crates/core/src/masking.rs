//! Parameterized Wiener masking and the oracle separator.

use alloc::vec::Vec;
use core::fmt;

use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::stft::{Stft, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SourceRole {
    Voice,
    Harmonic,
    Percussive,
    /// Harmonic and percussive parts kept together.
    Accompaniment,
    Other,
}

impl SourceRole {
    pub fn as_str(self) -> &'static str {
        match self {
            SourceRole::Voice => "voice",
            SourceRole::Harmonic => "harmonic",
            SourceRole::Percussive => "percussive",
            SourceRole::Accompaniment => "accompaniment",
            SourceRole::Other => "other",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "voice" | "v" => SourceRole::Voice,
            "harmonic" | "h" => SourceRole::Harmonic,
            "percussive" | "p" => SourceRole::Percussive,
            "accompaniment" | "hp" => SourceRole::Accompaniment,
            "other" => SourceRole::Other,
            _ => return None,
        })
    }
}

impl fmt::Display for SourceRole {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Non-negative masks sharing one shape, one per estimated source.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskSet {
    masks: Vec<DMatrix<f64>>,
    roles: Vec<SourceRole>,
    pub alpha: f64,
}

impl MaskSet {
    pub const DEFAULT_ALPHA: f64 = 2.0;

    pub fn new(masks: Vec<DMatrix<f64>>, roles: Vec<SourceRole>, alpha: f64) -> Result<Self> {
        if masks.is_empty() {
            return Err(Error::TooFewSources(1));
        }
        if roles.len() != masks.len() {
            return Err(invalid("roles", "one role per mask is required"));
        }
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(invalid("alpha", "must be positive"));
        }
        let shape = masks[0].shape();
        for m in &masks {
            if m.shape() != shape {
                return Err(Error::DimensionMismatch {
                    expected: shape,
                    found: m.shape(),
                });
            }
            if m.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite);
            }
            if m.iter().any(|v| *v < 0.0) {
                return Err(Error::NegativeEntry);
            }
        }
        Ok(Self { masks, roles, alpha })
    }

    pub fn len(&self) -> usize {
        self.masks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.masks.is_empty()
    }

    pub fn shape(&self) -> (usize, usize) {
        self.masks[0].shape()
    }

    pub fn masks(&self) -> &[DMatrix<f64>] {
        &self.masks
    }

    pub fn roles(&self) -> &[SourceRole] {
        &self.roles
    }

    pub fn with_alpha(mut self, alpha: f64) -> Result<Self> {
        if !(alpha > 0.0) || !alpha.is_finite() {
            return Err(invalid("alpha", "must be positive"));
        }
        self.alpha = alpha;
        Ok(self)
    }

    pub fn with_roles(mut self, roles: Vec<SourceRole>) -> Result<Self> {
        if roles.len() != self.masks.len() {
            return Err(invalid("roles", "one role per mask is required"));
        }
        self.roles = roles;
        Ok(self)
    }
}

/// Wiener fractions `M_i^alpha / sum_j M_j^alpha` at one bin, written into `out`.
///
/// Masks are divided by their largest value first so large spectrogram
/// magnitudes cannot overflow. A bin where every mask is zero splits evenly.
pub(crate) fn wiener_fractions(values: &[f64], alpha: f64, out: &mut [f64]) {
    let peak = values.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        let share = 1.0 / values.len() as f64;
        out.iter_mut().for_each(|o| *o = share);
        return;
    }
    let mut total = 0.0;
    for (o, v) in out.iter_mut().zip(values) {
        let r = v / peak;
        *o = if alpha == 2.0 {
            r * r
        } else if alpha == 1.0 {
            r
        } else if r == 0.0 {
            0.0
        } else {
            r.powf(alpha)
        };
        total += *o;
    }
    out.iter_mut().for_each(|o| *o /= total);
}

pub fn wiener_apply(x: &Stft, masks: &MaskSet) -> Result<Vec<Stft>> {
    if masks.shape() != x.shape() {
        return Err(Error::DimensionMismatch {
            expected: x.shape(),
            found: masks.shape(),
        });
    }
    let count = masks.len();
    let (rows, cols) = x.shape();
    let mut outputs: Vec<DMatrix<C64>> = (0..count)
        .map(|_| DMatrix::from_element(rows, cols, C64::new(0.0, 0.0)))
        .collect();
    let mut values = alloc::vec![0.0; count];
    let mut fractions = alloc::vec![0.0; count];
    for c in 0..cols {
        for r in 0..rows {
            for (v, m) in values.iter_mut().zip(masks.masks()) {
                *v = m[(r, c)];
            }
            wiener_fractions(&values, masks.alpha, &mut fractions);
            let xv = x.data[(r, c)];
            for (out, f) in outputs.iter_mut().zip(&fractions) {
                out[(r, c)] = xv * *f;
            }
        }
    }
    Ok(outputs.into_iter().map(|d| x.with_data(d)).collect())
}

/// Oracle masks: the STFT modulus of each true source.
pub fn oracle_masks(sources: &[Stft], alpha: f64) -> Result<MaskSet> {
    if sources.len() < 2 {
        return Err(Error::TooFewSources(2));
    }
    let shape = sources[0].shape();
    for s in sources {
        if s.shape() != shape {
            return Err(Error::DimensionMismatch {
                expected: shape,
                found: s.shape(),
            });
        }
    }
    let masks = sources.iter().map(|s| s.magnitude()).collect();
    MaskSet::new(masks, alloc::vec![SourceRole::Other; sources.len()], alpha)
}
