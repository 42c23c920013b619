//! Robust PCA by principal component pursuit.
//!
//! The power spectrogram is split into a low-rank accompaniment part and a
//! sparse voice part with alternating singular-value thresholding,
//! element-wise shrinkage and a dual ascent step.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::DMatrix;
#[allow(unused_imports)] // inherent methods take over when std is linked
use num_traits::Float;

use crate::error::{invalid, Error, Result};
use crate::masking::{wiener_apply, MaskSet, SourceRole};
use crate::pipeline::Separation;
use crate::signal::AudioSignal;
use crate::stft::{spectrogram, stft, StftConfig};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpcaConfig {
    /// `lambda = lambda_scale / sqrt(max(rows, cols))`.
    pub lambda_scale: f64,
    /// `mu = mu_factor * lambda`.
    pub mu_factor: f64,
    pub n_iter: usize,
    /// Stop once `||W - L - S||_F / ||W||_F` drops below this; 0 disables.
    pub tol: f64,
}

impl Default for RpcaConfig {
    fn default() -> Self {
        Self {
            lambda_scale: 1.0,
            mu_factor: 10.0,
            n_iter: 1000,
            tol: 1e-7,
        }
    }
}

impl RpcaConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda_scale > 0.0) {
            return Err(invalid("lambda", "must be positive"));
        }
        if !(self.mu_factor > 0.0) {
            return Err(invalid("mu", "must be positive"));
        }
        if self.n_iter == 0 {
            return Err(invalid("n_iter", "must be at least 1"));
        }
        if !(self.tol >= 0.0) {
            return Err(invalid("tol", "must be non-negative"));
        }
        Ok(())
    }

    /// `(lambda, mu)` for a matrix of the given shape.
    pub fn resolve(&self, rows: usize, cols: usize) -> (f64, f64) {
        let lambda = self.lambda_scale / (rows.max(cols) as f64).sqrt();
        (lambda, self.mu_factor * lambda)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PcpResult {
    pub low_rank: DMatrix<f64>,
    pub sparse: DMatrix<f64>,
    pub iterations_run: usize,
    pub final_residual: f64,
    /// Relative residual after each iteration.
    pub residuals: Vec<f64>,
}

fn shrink(x: f64, tau: f64) -> f64 {
    if x > tau {
        x - tau
    } else if x < -tau {
        x + tau
    } else {
        0.0
    }
}

/// `sign(x) * max(|x| - tau, 0)`.
pub fn soft_threshold(x: f64, tau: f64) -> Result<f64> {
    if !(tau >= 0.0) {
        return Err(invalid("tau", "must be non-negative"));
    }
    Ok(shrink(x, tau))
}

pub fn soft_threshold_matrix(x: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if !(tau >= 0.0) {
        return Err(invalid("tau", "must be non-negative"));
    }
    Ok(x.map(|v| shrink(v, tau)))
}

/// Singular value thresholding `U S_tau(Sigma) V^T`.
pub fn svt(x: &DMatrix<f64>, tau: f64) -> Result<DMatrix<f64>> {
    if !(tau >= 0.0) {
        return Err(invalid("tau", "must be non-negative"));
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    Ok(svt_unchecked(x.clone(), tau).0)
}

/// Returns the thresholded matrix and its rank.
fn svt_unchecked(x: DMatrix<f64>, tau: f64) -> (DMatrix<f64>, usize) {
    let (rows, cols) = x.shape();
    if rows == 0 || cols == 0 {
        return (x, 0);
    }
    let svd = x.svd(true, true);
    let u = svd.u.expect("left singular vectors requested");
    let v_t = svd.v_t.expect("right singular vectors requested");
    let kept: Vec<(usize, f64)> = svd
        .singular_values
        .iter()
        .enumerate()
        .filter_map(|(k, s)| {
            let t = s - tau;
            (t > 0.0).then_some((k, t))
        })
        .collect();
    let mut out = DMatrix::zeros(rows, cols);
    if kept.is_empty() {
        return (out, 0);
    }
    let rank = kept.len();
    let mut us = DMatrix::zeros(rows, rank);
    let mut vt = DMatrix::zeros(rank, cols);
    for (j, (k, s)) in kept.iter().enumerate() {
        us.set_column(j, &(u.column(*k) * *s));
        vt.set_row(j, &v_t.row(*k));
    }
    us.mul_to(&vt, &mut out);
    (out, rank)
}

pub fn pcp(w: &DMatrix<f64>, cfg: &RpcaConfig) -> Result<PcpResult> {
    cfg.validate()?;
    if w.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let (rows, cols) = w.shape();
    let norm_w = w.norm();
    let mut low_rank = DMatrix::zeros(rows, cols);
    let mut sparse = DMatrix::zeros(rows, cols);
    if norm_w == 0.0 {
        return Ok(PcpResult {
            low_rank,
            sparse,
            iterations_run: 0,
            final_residual: 0.0,
            residuals: Vec::new(),
        });
    }
    let (lambda, mu) = cfg.resolve(rows, cols);
    let inv_mu = 1.0 / mu;
    let mut dual = DMatrix::<f64>::zeros(rows, cols);
    let mut residuals = Vec::with_capacity(cfg.n_iter.min(4096));
    let mut iterations = 0;
    let mut residual = 1.0;

    while iterations < cfg.n_iter {
        // L <- D_{1/mu}(W - S + Y/mu)
        let mut arg = w - &sparse;
        arg.zip_apply(&dual, |a, y: f64| *a += inv_mu * y);
        low_rank = svt_unchecked(arg, inv_mu).0;

        // S <- S_{lambda/mu}(W - L + Y/mu)
        let tau = lambda * inv_mu;
        for ((s, (wv, l)), y) in sparse.iter_mut().zip(w.iter().zip(low_rank.iter())).zip(dual.iter()) {
            *s = shrink(wv - l + inv_mu * y, tau);
        }

        // Y <- Y + mu (W - L - S)
        let mut gap = w - &low_rank;
        gap -= &sparse;
        dual.zip_apply(&gap, |y, g: f64| *y += mu * g);

        iterations += 1;
        residual = gap.norm() / norm_w;
        residuals.push(residual);
        if residual < cfg.tol {
            break;
        }
    }

    Ok(PcpResult {
        low_rank,
        sparse,
        iterations_run: iterations,
        final_residual: residual,
        residuals,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RpcaSeparateConfig {
    pub stft: StftConfig,
    pub pcp: RpcaConfig,
    pub alpha: f64,
}

impl RpcaSeparateConfig {
    pub fn new(stft: StftConfig) -> Self {
        Self {
            stft,
            pcp: RpcaConfig::default(),
            alpha: MaskSet::DEFAULT_ALPHA,
        }
    }
}

/// Masks `|S|` (voice) and `|L|` (accompaniment) from the PCP of `|X|^2`.
///
/// The spectrogram is divided by its mean entry before the pursuit; the
/// convex problem is scale-equivariant, so this only conditions the fixed
/// `mu` and leaves the Wiener masks unchanged.
pub fn rpca_masks(w: &DMatrix<f64>, cfg: &RpcaConfig, alpha: f64) -> Result<(MaskSet, PcpResult)> {
    let mean = w.iter().map(|v| v.abs()).sum::<f64>() / (w.len().max(1)) as f64;
    let scaled = if mean > 0.0 { w / mean } else { w.clone() };
    let result = pcp(&scaled, cfg)?;
    let masks = MaskSet::new(
        vec![result.sparse.abs(), result.low_rank.abs()],
        vec![SourceRole::Voice, SourceRole::Accompaniment],
        alpha,
    )?;
    Ok((masks, result))
}

pub fn rpca_separate(x: &AudioSignal, cfg: &RpcaSeparateConfig) -> Result<Separation> {
    let spec = stft(x, &cfg.stft)?;
    let w = spectrogram(&spec, 1.0);
    let (masks, _) = rpca_masks(&w, &cfg.pcp, cfg.alpha)?;
    let estimates = wiener_apply(&spec, &masks)?;
    Separation::from_stfts(estimates, masks.roles(), x.sample_rate, x.len())
}
