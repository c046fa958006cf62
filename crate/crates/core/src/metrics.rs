//! Noise injection, PSNR / SNR evaluation and synthetic phantoms.
//!
//! SNR here is the CASSI convention `10 log10(mean(g) / σ)`, a ratio of the
//! mean measurement to the noise standard deviation, not a power ratio.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cube::{normalize_cube, CubeDims, HyperCube};
use crate::error::{ensure_len, CassiError, Result};
use crate::transform::DctBasis;

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Noise standard deviation giving `snr_db` for measurements with mean `mu`.
pub fn noise_sigma(mu: f64, snr_db: f64) -> f64 {
    mu / 10f64.powf(snr_db / 10.0)
}

/// Adds seeded zero-mean Gaussian noise at the requested cassi-snr.
pub fn add_noise(clean: &[f64], snr_db: f64, seed: u64) -> Result<(Vec<f64>, f64)> {
    if clean.is_empty() {
        return Err(CassiError::Degenerate(
            "no measurements to add noise to".into(),
        ));
    }
    if !snr_db.is_finite() {
        return Err(CassiError::config(format!(
            "SNR must be finite, got {snr_db}"
        )));
    }
    let mu = mean(clean);
    if !(mu > 0.0) {
        return Err(CassiError::Degenerate(format!(
            "SNR is undefined for measurements with mean {mu}"
        )));
    }
    let sigma = noise_sigma(mu, snr_db);
    let normal = Normal::new(0.0, sigma).map_err(|e| CassiError::config(e.to_string()))?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noisy = clean.iter().map(|g| g + normal.sample(&mut rng)).collect();
    Ok((noisy, sigma))
}

/// cassi-snr of `noisy` relative to `clean`; `+inf` when they coincide.
pub fn measure_snr(clean: &[f64], noisy: &[f64]) -> Result<f64> {
    ensure_len("noisy measurements", noisy.len(), clean.len())?;
    let mu = mean(clean);
    if !(mu > 0.0) {
        return Err(CassiError::Degenerate(format!(
            "SNR is undefined for measurements with mean {mu}"
        )));
    }
    let diff: Vec<f64> = noisy.iter().zip(clean).map(|(a, b)| a - b).collect();
    let dm = mean(&diff);
    let var = diff.iter().map(|d| (d - dm) * (d - dm)).sum::<f64>() / diff.len() as f64;
    if var == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (mu / var.sqrt()).log10())
}

pub fn mse(reference: &[f64], estimate: &[f64]) -> f64 {
    reference
        .iter()
        .zip(estimate)
        .map(|(a, b)| (a - b) * (a - b))
        .sum::<f64>()
        / reference.len() as f64
}

/// `10 log10(peak² / MSE)`; `+inf` for a perfect match.
pub fn psnr_slice(reference: &[f64], estimate: &[f64], peak: f64) -> Result<f64> {
    ensure_len("estimate slice", estimate.len(), reference.len())?;
    if !(peak > 0.0) {
        return Err(CassiError::config(format!(
            "peak must be positive, got {peak}"
        )));
    }
    let e = mse(reference, estimate);
    if e == 0.0 {
        return Ok(f64::INFINITY);
    }
    Ok(10.0 * (peak * peak / e).log10())
}

#[derive(Debug, Clone, PartialEq)]
pub struct AvgPsnr {
    /// Mean over finite bands; `+inf` if every band matched exactly.
    pub value: f64,
    pub per_band: Vec<f64>,
    /// Bands left out of the mean because their PSNR is infinite.
    pub excluded: usize,
}

impl AvgPsnr {
    pub fn flagged(&self) -> bool {
        self.excluded > 0
    }
}

pub fn avg_psnr(reference: &HyperCube, estimate: &HyperCube, peak: f64) -> Result<AvgPsnr> {
    if reference.dims() != estimate.dims() {
        return Err(CassiError::dim(format!(
            "cubes differ in shape: {:?} vs {:?}",
            reference.dims(),
            estimate.dims()
        )));
    }
    avg_psnr_values(
        reference.values(),
        estimate.values(),
        reference.dims(),
        peak,
    )
}

pub fn avg_psnr_values(
    reference: &[f64],
    estimate: &[f64],
    dims: CubeDims,
    peak: f64,
) -> Result<AvgPsnr> {
    ensure_len("reference cube", reference.len(), dims.voxels())?;
    ensure_len("estimate cube", estimate.len(), dims.voxels())?;
    let s = dims.slice_len();
    let per_band = (0..dims.bands)
        .map(|l| {
            psnr_slice(
                &reference[l * s..(l + 1) * s],
                &estimate[l * s..(l + 1) * s],
                peak,
            )
        })
        .collect::<Result<Vec<f64>>>()?;
    let finite: Vec<f64> = per_band.iter().copied().filter(|p| p.is_finite()).collect();
    let value = if finite.is_empty() {
        f64::INFINITY
    } else {
        mean(&finite)
    };
    Ok(AvgPsnr {
        value,
        excluded: per_band.len() - finite.len(),
        per_band,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PhantomKind {
    GaussianBlobs,
    PiecewiseConstant,
    SpectralCosine,
}

impl FromStr for PhantomKind {
    type Err = CassiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "gaussian-blobs" => Ok(PhantomKind::GaussianBlobs),
            "piecewise-constant" => Ok(PhantomKind::PiecewiseConstant),
            "spectral-cosine" => Ok(PhantomKind::SpectralCosine),
            other => Err(CassiError::config(format!(
                "unknown phantom kind {other:?}"
            ))),
        }
    }
}

impl fmt::Display for PhantomKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PhantomKind::GaussianBlobs => "gaussian-blobs",
            PhantomKind::PiecewiseConstant => "piecewise-constant",
            PhantomKind::SpectralCosine => "spectral-cosine",
        })
    }
}

/// Smooth positive spectrum built from the first three DCT atoms.
fn smooth_spectrum(dct: &DctBasis, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let bands = dct.len();
    let orders = bands.min(3);
    let mut c = [0.0; 3];
    c[0] = 1.0;
    for coef in c.iter_mut().take(orders).skip(1) {
        *coef = rng.random_range(-0.35..0.35);
    }
    let scale = (bands as f64).sqrt();
    let profile: Vec<f64> = (0..bands)
        .map(|l| (0..orders).map(|p| c[p] * dct.row(p)[l] * scale).sum())
        .collect();
    let lo = profile.iter().copied().fold(f64::INFINITY, f64::min);
    // Keep the profile strictly positive without changing its shape much.
    let shift = if lo < 0.1 { 0.1 - lo } else { 0.0 };
    profile.into_iter().map(|v| v + shift).collect()
}

/// Seeded synthetic cube, normalized to `[0, 1]`.
pub fn phantom_cube(
    rows: usize,
    cols: usize,
    bands: usize,
    kind: PhantomKind,
    seed: u64,
) -> Result<HyperCube> {
    let dims = CubeDims::new(rows, cols, bands)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let dct = DctBasis::new(bands);
    let (mf, nf) = (rows as f64, cols as f64);
    let raw = match kind {
        PhantomKind::GaussianBlobs => {
            let count = rng.random_range(3..=8);
            let blobs: Vec<(f64, f64, f64, f64, Vec<f64>)> = (0..count)
                .map(|_| {
                    let ci = rng.random_range(0.0..mf);
                    let cj = rng.random_range(0.0..nf);
                    let width = rng
                        .random_range(mf.min(nf) / 16.0..mf.min(nf) / 4.0)
                        .max(0.5);
                    let amp = rng.random_range(0.3..1.0);
                    (ci, cj, width, amp, smooth_spectrum(&dct, &mut rng))
                })
                .collect();
            HyperCube::from_fn(dims, |i, j, l| {
                blobs
                    .iter()
                    .map(|(ci, cj, w, a, spec)| {
                        let d2 = (i as f64 - ci).powi(2) + (j as f64 - cj).powi(2);
                        a * (-d2 / (2.0 * w * w)).exp() * spec[l]
                    })
                    .sum()
            })?
        }
        PhantomKind::PiecewiseConstant => {
            let count = rng.random_range(3..=8);
            let rects: Vec<(usize, usize, usize, usize, Vec<f64>)> = (0..count)
                .map(|_| {
                    let i0 = rng.random_range(0..rows);
                    let j0 = rng.random_range(0..cols);
                    let i1 = rng.random_range(i0 + 1..=rows);
                    let j1 = rng.random_range(j0 + 1..=cols);
                    let base = rng.random_range(0.2..1.0);
                    let offsets = (0..bands)
                        .map(|_| base + rng.random_range(0.0..0.3))
                        .collect();
                    (i0, i1, j0, j1, offsets)
                })
                .collect();
            HyperCube::from_fn(dims, |i, j, l| {
                rects
                    .iter()
                    .filter(|(i0, i1, j0, j1, _)| {
                        (*i0..*i1).contains(&i) && (*j0..*j1).contains(&j)
                    })
                    .map(|r| r.4[l])
                    .sum::<f64>()
                    + 0.05
            })?
        }
        PhantomKind::SpectralCosine => {
            // A nonnegative cube can only be rank-1 in a single DCT atom when
            // that atom is the DC one, so the spectrum is the p = 0 cosine.
            let spatial: Vec<f64> = (0..dims.slice_len())
                .map(|_| rng.random_range(0.05..1.0))
                .collect();
            let atom = dct.row(0).to_vec();
            HyperCube::from_fn(dims, |i, j, l| spatial[i + rows * j] * atom[l])?
        }
    };
    Ok(normalize_cube(&raw)?.0)
}
