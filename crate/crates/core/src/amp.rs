//! Damped approximate message passing with the adaptive Wiener denoiser.
//!
//! One iteration, starting from `f^t`, `r^{t-1}` and the previous average
//! shrinkage gain `d_{t-1}`:
//!
//! 1. `r^t = g - H f^t + (1/R) d_{t-1} r^{t-1}`
//! 2. `r^t = α r^t + (1-α) r^{t-1}`
//! 3. `q^t = Hᵀ r^t + f^t`
//! 4. `σ²_t = |r^t|² / m`
//! 5. `θ = Ψ q^t`, group statistics, Wiener shrinkage
//! 6. `f^{t+1} = α Ψᵀ θ̂ + (1-α) f^t`
//!
//! The run starts from `f¹ = 0`, `r⁰ = 0`, `d₀ = 0`.

use std::time::Instant;

use crate::cube::HyperCube;
use crate::error::{ensure_len, CassiError, Result};
use crate::metrics::avg_psnr_values;
use crate::operator::CassiModel;
use crate::transform::{SparsifyingTransform, SubbandMap, Wavelet};
use crate::wiener::denoise_cube;

pub const DEFAULT_ALPHA: f64 = 0.2;
pub const DEFAULT_MAX_ITER: usize = 400;

#[derive(Debug, Clone, PartialEq)]
pub struct AmpConfig {
    pub alpha: f64,
    pub max_iter: usize,
    pub wavelet: Wavelet,
    /// Wavelet levels; `None` picks the default depth for the cube size.
    pub levels: Option<usize>,
    /// Peak used for PSNR bookkeeping when ground truth is supplied.
    pub peak: f64,
}

impl Default for AmpConfig {
    fn default() -> Self {
        AmpConfig {
            alpha: DEFAULT_ALPHA,
            max_iter: DEFAULT_MAX_ITER,
            wavelet: Wavelet::Haar,
            levels: None,
            peak: 1.0,
        }
    }
}

impl AmpConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(CassiError::config(format!(
                "damping must lie in (0, 1], got {}",
                self.alpha
            )));
        }
        if self.max_iter == 0 {
            return Err(CassiError::config("max_iter must be at least 1"));
        }
        if !(self.peak > 0.0) {
            return Err(CassiError::config("PSNR peak must be positive"));
        }
        Ok(())
    }

    pub fn transform(&self, model: &CassiModel) -> Result<SparsifyingTransform> {
        let dims = model.dims();
        match self.levels {
            Some(j) => SparsifyingTransform::new(dims, self.wavelet, j),
            None => SparsifyingTransform::with_default_levels(dims, self.wavelet),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpState {
    /// Current iterate `f^t`.
    pub f: Vec<f64>,
    /// Damped residual of the previous iteration, `r^{t-1}`.
    pub residual: Vec<f64>,
    pub sigma2: f64,
    /// Average Wiener gain from the previous iteration.
    pub derivative_mean: f64,
    /// 1-based index of the next iteration to run.
    pub t: usize,
}

impl AmpState {
    pub fn initial(model: &CassiModel) -> Self {
        AmpState {
            f: vec![0.0; model.n()],
            residual: vec![0.0; model.m()],
            sigma2: 0.0,
            derivative_mean: 0.0,
            t: 1,
        }
    }

    fn check(&self, model: &CassiModel) -> Result<()> {
        ensure_len("iterate", self.f.len(), model.n())?;
        ensure_len("residual", self.residual.len(), model.m())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AmpRecord {
    pub iter: usize,
    pub sigma2: f64,
    pub residual_norm: f64,
    pub derivative_mean: f64,
    pub psnr: Option<f64>,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AmpTrace {
    pub records: Vec<AmpRecord>,
}

impl AmpTrace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    pub fn last(&self) -> Option<&AmpRecord> {
        self.records.last()
    }
}

fn all_finite(v: &[f64]) -> bool {
    v.iter().all(|x| x.is_finite())
}

/// Onsager-corrected residual, before damping.
pub fn residual_step(state: &AmpState, g: &[f64], model: &CassiModel) -> Result<Vec<f64>> {
    state.check(model)?;
    ensure_len("measurements", g.len(), model.m())?;
    let hf = model.forward(&state.f)?;
    let memory = state.derivative_mean / model.rate();
    let r: Vec<f64> = g
        .iter()
        .zip(&hf)
        .zip(&state.residual)
        .map(|((gi, hi), ri)| gi - hi + memory * ri)
        .collect();
    if !all_finite(&r) {
        return Err(CassiError::AmpDiverged {
            iteration: state.t,
            trace: Box::default(),
        });
    }
    Ok(r)
}

/// `α new + (1-α) old`.
pub fn damp(new: &[f64], old: &[f64], alpha: f64) -> Result<Vec<f64>> {
    ensure_len("damping operand", new.len(), old.len())?;
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(CassiError::config(format!(
            "damping must lie in (0, 1], got {alpha}"
        )));
    }
    if alpha == 1.0 {
        return Ok(new.to_vec());
    }
    Ok(new
        .iter()
        .zip(old)
        .map(|(n, o)| alpha * n + (1.0 - alpha) * o)
        .collect())
}

/// `q^t = Hᵀ r^t + f^t` using the state's stored residual.
pub fn pseudo_data(state: &AmpState, model: &CassiModel) -> Result<Vec<f64>> {
    state.check(model)?;
    let mut q = model.adjoint(&state.residual)?;
    for (qi, fi) in q.iter_mut().zip(&state.f) {
        *qi += fi;
    }
    Ok(q)
}

/// Mean squared residual.
pub fn noise_estimate(r: &[f64]) -> f64 {
    if r.is_empty() {
        return 0.0;
    }
    r.iter().map(|x| x * x).sum::<f64>() / r.len() as f64
}

/// Internal per-iteration output: the record plus the next state.
struct Step {
    state: AmpState,
    sigma2: f64,
    residual_norm: f64,
    derivative_mean: f64,
}

fn step(
    state: &AmpState,
    g: &[f64],
    model: &CassiModel,
    transform: &SparsifyingTransform,
    map: &SubbandMap,
    alpha: f64,
) -> Result<Step> {
    let raw = residual_step(state, g, model)?;
    let residual = damp(&raw, &state.residual, alpha)?;
    let sigma2 = noise_estimate(&residual);
    let residual_norm = (sigma2 * residual.len() as f64).sqrt();
    let with_residual = AmpState {
        residual,
        ..state.clone()
    };
    let q = pseudo_data(&with_residual, model)?;
    if !all_finite(&q) || !sigma2.is_finite() {
        return Err(CassiError::AmpDiverged {
            iteration: state.t,
            trace: Box::default(),
        });
    }
    let den = denoise_cube(&q, sigma2, transform, map)?;
    let f = damp(&den.estimate, &state.f, alpha)?;
    if !all_finite(&f) {
        return Err(CassiError::AmpDiverged {
            iteration: state.t,
            trace: Box::default(),
        });
    }
    Ok(Step {
        state: AmpState {
            f,
            residual: with_residual.residual,
            sigma2,
            derivative_mean: den.derivative_mean,
            t: state.t + 1,
        },
        sigma2,
        residual_norm,
        derivative_mean: den.derivative_mean,
    })
}

/// One full iteration. Appends a record (without PSNR or timing) to `trace`.
pub fn amp_iteration(
    state: &AmpState,
    g: &[f64],
    model: &CassiModel,
    transform: &SparsifyingTransform,
    map: &SubbandMap,
    alpha: f64,
    trace: &mut AmpTrace,
) -> Result<AmpState> {
    match step(state, g, model, transform, map, alpha) {
        Ok(s) => {
            trace.records.push(AmpRecord {
                iter: state.t,
                sigma2: s.sigma2,
                residual_norm: s.residual_norm,
                derivative_mean: s.derivative_mean,
                psnr: None,
                wall_ms: 0.0,
            });
            Ok(s.state)
        }
        Err(CassiError::AmpDiverged { iteration, .. }) => Err(CassiError::AmpDiverged {
            iteration,
            trace: Box::new(trace.clone()),
        }),
        Err(e) => Err(e),
    }
}

#[derive(Debug, Clone)]
pub struct AmpOutput {
    pub estimate: Vec<f64>,
    pub trace: AmpTrace,
}

/// Runs `max_iter` iterations from the zero state.
pub fn run(
    g: &[f64],
    model: &CassiModel,
    config: &AmpConfig,
    ground_truth: Option<&HyperCube>,
) -> Result<AmpOutput> {
    config.validate()?;
    ensure_len("measurements", g.len(), model.m())?;
    if let Some(truth) = ground_truth {
        if truth.dims() != model.dims() {
            return Err(CassiError::dim(
                "ground-truth cube does not match model dims",
            ));
        }
    }
    let transform = config.transform(model)?;
    let map = transform.subband_map();
    let start = Instant::now();
    let mut state = AmpState::initial(model);
    let mut trace = AmpTrace::default();
    for _ in 0..config.max_iter {
        state = amp_iteration(&state, g, model, &transform, &map, config.alpha, &mut trace)?;
        let rec = trace
            .records
            .last_mut()
            .expect("iteration appends a record");
        rec.wall_ms = start.elapsed().as_secs_f64() * 1e3;
        if let Some(truth) = ground_truth {
            rec.psnr =
                Some(avg_psnr_values(truth.values(), &state.f, model.dims(), config.peak)?.value);
        }
    }
    Ok(AmpOutput {
        estimate: state.f,
        trace,
    })
}
