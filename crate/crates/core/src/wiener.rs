//! Adaptive Wiener shrinkage in the Ψ domain.
//!
//! Every coefficient is pulled toward its group mean by the gain
//! `max(0, ν² - σ²) / ν²`, where `μ` and `ν²` are the empirical mean and
//! population variance of its (spectral band, wavelet subband) group.
//! A group with zero variance gets gain 0.

use crate::error::{ensure_len, CassiError, Result};
use crate::transform::{SparsifyingTransform, SubbandMap};

#[derive(Debug, Clone, PartialEq)]
pub struct SubbandStats {
    pub mean: Vec<f64>,
    pub variance: Vec<f64>,
    pub count: Vec<usize>,
}

impl SubbandStats {
    pub fn group_count(&self) -> usize {
        self.mean.len()
    }

    /// Per-group gains for noise variance `sigma2`.
    pub fn gains(&self, sigma2: f64) -> Result<Vec<f64>> {
        check_sigma(sigma2)?;
        Ok(self
            .variance
            .iter()
            .map(|&v| wiener_gain(v, sigma2))
            .collect())
    }
}

/// `max(0, ν² - σ²) / ν²`, defined as 0 at `ν² = 0`.
#[inline]
pub fn wiener_gain(variance: f64, sigma2: f64) -> f64 {
    if variance > 0.0 {
        (variance - sigma2).max(0.0) / variance
    } else {
        0.0
    }
}

fn check_sigma(sigma2: f64) -> Result<()> {
    if !(sigma2 >= 0.0) || !sigma2.is_finite() {
        return Err(CassiError::config(format!(
            "noise variance must be finite and nonnegative, got {sigma2}"
        )));
    }
    Ok(())
}

/// Two-pass group means and population variances.
pub fn estimate_stats(theta: &[f64], map: &SubbandMap) -> Result<SubbandStats> {
    ensure_len("coefficients", theta.len(), map.len())?;
    let groups = map.group_count();
    let mut sum = vec![0.0; groups];
    for (&g, &v) in map.groups().iter().zip(theta) {
        sum[g as usize] += v;
    }
    let count = map.sizes().to_vec();
    let mean: Vec<f64> = sum.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
    let mut sq = vec![0.0; groups];
    for (&g, &v) in map.groups().iter().zip(theta) {
        let d = v - mean[g as usize];
        sq[g as usize] += d * d;
    }
    let variance = sq.iter().zip(&count).map(|(s, &c)| s / c as f64).collect();
    Ok(SubbandStats {
        mean,
        variance,
        count,
    })
}

/// Written as `gain·θ + (1-gain)·μ` so both limits (gain 1 and 0) are exact.
pub fn wiener_shrink(
    theta: &[f64],
    stats: &SubbandStats,
    sigma2: f64,
    map: &SubbandMap,
) -> Result<Vec<f64>> {
    ensure_len("coefficients", theta.len(), map.len())?;
    let gains = stats.gains(sigma2)?;
    Ok(map
        .groups()
        .iter()
        .zip(theta)
        .map(|(&g, &v)| {
            let g = g as usize;
            gains[g] * v + (1.0 - gains[g]) * stats.mean[g]
        })
        .collect())
}

/// Average shrinkage gain over all `n` coefficients, the Onsager multiplier.
pub fn shrink_derivative_mean(stats: &SubbandStats, sigma2: f64, map: &SubbandMap) -> Result<f64> {
    let gains = stats.gains(sigma2)?;
    let total: f64 = map.groups().iter().map(|&g| gains[g as usize]).sum();
    Ok(total / map.len() as f64)
}

#[derive(Debug, Clone)]
pub struct Denoised {
    pub estimate: Vec<f64>,
    pub derivative_mean: f64,
    pub stats: SubbandStats,
}

/// `Ψᵀ shrink(Ψ q)` with the matching derivative mean.
pub fn denoise_cube(
    q: &[f64],
    sigma2: f64,
    transform: &SparsifyingTransform,
    map: &SubbandMap,
) -> Result<Denoised> {
    check_sigma(sigma2)?;
    let theta = transform.forward(q)?;
    let stats = estimate_stats(&theta, map)?;
    let shrunk = wiener_shrink(&theta, &stats, sigma2, map)?;
    let derivative_mean = shrink_derivative_mean(&stats, sigma2, map)?;
    Ok(Denoised {
        estimate: transform.inverse(&shrunk)?,
        derivative_mean,
        stats,
    })
}
