//! Proximal-gradient baseline for `½|g - Hf|² + λ|Ψf|₁`.
//!
//! Because Ψ is orthonormal the prox of the penalty is
//! `Ψᵀ soft(Ψ v, λ/L)`. Acceleration uses the monotone FISTA variant: the
//! iterate only moves to the prox point when that lowers the objective,
//! otherwise momentum restarts from the current iterate.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::cube::HyperCube;
use crate::error::{ensure_len, CassiError, Result};
use crate::metrics::avg_psnr_values;
use crate::operator::CassiModel;
use crate::transform::SparsifyingTransform;

#[derive(Debug, Clone, PartialEq)]
pub struct L1Config {
    pub lambda: f64,
    pub iterations: usize,
    /// Fixed step; `None` uses `1/L` with `L` from the power method.
    pub step: Option<f64>,
    pub accelerate: bool,
    pub power_iters: usize,
    pub seed: u64,
    pub peak: f64,
}

impl L1Config {
    pub fn new(lambda: f64, iterations: usize) -> Self {
        L1Config {
            lambda,
            iterations,
            step: None,
            accelerate: true,
            power_iters: 100,
            seed: 0,
            peak: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda > 0.0) || !self.lambda.is_finite() {
            return Err(CassiError::config(format!(
                "lambda must be finite and positive, got {}",
                self.lambda
            )));
        }
        if self.iterations == 0 {
            return Err(CassiError::config("iterations must be at least 1"));
        }
        if let Some(s) = self.step {
            if !(s > 0.0) || !s.is_finite() {
                return Err(CassiError::config(format!(
                    "step must be positive, got {s}"
                )));
            }
        }
        Ok(())
    }
}

/// Rayleigh-quotient estimates of `|H|²` after each power iteration.
pub fn power_method_history(model: &CassiModel, iters: usize, seed: u64) -> Result<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut x: Vec<f64> = (0..model.n())
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let mut history = Vec::with_capacity(iters);
    for _ in 0..iters.max(1) {
        let nrm = norm(&x);
        if nrm == 0.0 {
            history.push(0.0);
            break;
        }
        x.iter_mut().for_each(|v| *v /= nrm);
        let y = model.adjoint(&model.forward(&x)?)?;
        history.push(dot(&x, &y));
        x = y;
    }
    Ok(history)
}

/// Largest eigenvalue of `HᵀH` by power iteration.
pub fn power_method(model: &CassiModel, iters: usize, seed: u64) -> Result<f64> {
    Ok(*power_method_history(model, iters, seed)?
        .last()
        .expect("at least one iteration"))
}

pub fn soft_threshold(theta: &[f64], tau: f64) -> Result<Vec<f64>> {
    if !(tau >= 0.0) {
        return Err(CassiError::config(format!(
            "threshold must be nonnegative, got {tau}"
        )));
    }
    Ok(theta
        .iter()
        .map(|&v| v.signum() * (v.abs() - tau).max(0.0))
        .map(|v| if v == 0.0 { 0.0 } else { v })
        .collect())
}

/// `argmin_x ½|x - v|² + τ|Ψx|₁`.
pub fn prox_l1(v: &[f64], tau: f64, transform: &SparsifyingTransform) -> Result<Vec<f64>> {
    transform.inverse(&soft_threshold(&transform.forward(v)?, tau)?)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

#[derive(Debug, Clone, PartialEq)]
pub struct L1Record {
    pub iter: usize,
    pub objective: f64,
    pub residual_norm: f64,
    pub psnr: Option<f64>,
    pub restarted: bool,
    pub wall_ms: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct L1Trace {
    pub lipschitz: f64,
    pub records: Vec<L1Record>,
}

impl L1Trace {
    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }
}

/// Objective value and residual norm at `f`.
pub fn objective(
    g: &[f64],
    f: &[f64],
    lambda: f64,
    model: &CassiModel,
    transform: &SparsifyingTransform,
) -> Result<(f64, f64)> {
    let hf = model.forward(f)?;
    let rn2: f64 = g.iter().zip(&hf).map(|(a, b)| (a - b) * (a - b)).sum();
    let l1: f64 = transform.forward(f)?.iter().map(|v| v.abs()).sum();
    Ok((0.5 * rn2 + lambda * l1, rn2.sqrt()))
}

#[derive(Debug, Clone)]
pub struct L1Output {
    pub estimate: Vec<f64>,
    pub trace: L1Trace,
}

pub fn fista_run(
    g: &[f64],
    model: &CassiModel,
    transform: &SparsifyingTransform,
    config: &L1Config,
    ground_truth: Option<&HyperCube>,
) -> Result<L1Output> {
    config.validate()?;
    ensure_len("measurements", g.len(), model.m())?;
    if transform.dims() != model.dims() {
        return Err(CassiError::dim("transform and model dims differ"));
    }
    let lipschitz = match config.step {
        Some(s) => 1.0 / s,
        None => power_method(model, config.power_iters, config.seed)?,
    };
    if !(lipschitz > 0.0) {
        return Err(CassiError::Degenerate("operator has zero norm".into()));
    }
    let step = 1.0 / lipschitz;
    let tau = config.lambda * step;
    let start = Instant::now();
    let n = model.n();
    let mut trace = L1Trace {
        lipschitz,
        records: Vec::with_capacity(config.iterations),
    };
    let mut x = vec![0.0; n];
    let mut y = x.clone();
    let mut momentum = 1.0f64;
    let (mut fx, _) = objective(g, &x, config.lambda, model, transform)?;

    for iter in 1..=config.iterations {
        let hy = model.forward(&y)?;
        let resid: Vec<f64> = hy.iter().zip(g).map(|(a, b)| a - b).collect();
        let grad = model.adjoint(&resid)?;
        let v: Vec<f64> = y.iter().zip(&grad).map(|(a, b)| a - step * b).collect();
        let z = prox_l1(&v, tau, transform)?;
        let (fz, rz) = objective(g, &z, config.lambda, model, transform)?;
        if !fz.is_finite() || z.iter().any(|v| !v.is_finite()) {
            return Err(CassiError::L1Diverged {
                iteration: iter,
                trace: Box::new(trace),
            });
        }

        let mut restarted = false;
        let (x_new, f_new, r_new) = if fz <= fx {
            (z.clone(), fz, rz)
        } else {
            restarted = true;
            let (_, rx) = objective(g, &x, config.lambda, model, transform)?;
            (x.clone(), fx, rx)
        };

        if config.accelerate {
            let next = 0.5 * (1.0 + (1.0 + 4.0 * momentum * momentum).sqrt());
            if restarted {
                momentum = 1.0;
                y = x_new.clone();
            } else {
                let beta = (momentum - 1.0) / next;
                y = x_new
                    .iter()
                    .zip(&x)
                    .map(|(xn, xo)| xn + beta * (xn - xo))
                    .collect();
                momentum = next;
            }
        } else {
            y = x_new.clone();
        }
        x = x_new;
        fx = f_new;

        let psnr = match ground_truth {
            Some(t) => Some(avg_psnr_values(t.values(), &x, model.dims(), config.peak)?.value),
            None => None,
        };
        trace.records.push(L1Record {
            iter,
            objective: fx,
            residual_norm: r_new,
            psnr,
            restarted,
            wall_ms: start.elapsed().as_secs_f64() * 1e3,
        });
    }
    Ok(L1Output { estimate: x, trace })
}

/// One baseline run per `λ`, in order.
pub fn lambda_sweep(
    g: &[f64],
    model: &CassiModel,
    transform: &SparsifyingTransform,
    base: &L1Config,
    lambdas: &[f64],
    ground_truth: Option<&HyperCube>,
) -> Result<Vec<(f64, L1Output)>> {
    // The step does not depend on λ, so estimate it once.
    let mut cfg = base.clone();
    if cfg.step.is_none() {
        cfg.step = Some(1.0 / power_method(model, cfg.power_iters, cfg.seed)?);
    }
    lambdas
        .iter()
        .map(|&lambda| {
            let c = L1Config {
                lambda,
                ..cfg.clone()
            };
            fista_run(g, model, transform, &c, ground_truth).map(|out| (lambda, out))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cube::CubeDims;
    use crate::operator::{
        generate_apertures, ApertureScheme, CodedApertureSet, DispersionWeights,
    };
    use crate::transform::Wavelet;
    use proptest::prelude::*;
    use rand::Rng;

    #[test]
    fn permutation_embedding_has_unit_norm() {
        let ap = CodedApertureSet::filled(1, 4, 4, 1).unwrap();
        let model = CassiModel::new(ap, DispersionWeights::FIRST_ORDER, 1).unwrap();
        assert!((power_method(&model, 10, 0).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn power_method_is_monotone_and_homogeneous() {
        let ap = generate_apertures(8, 8, 2, ApertureScheme::Complementary, 3).unwrap();
        let model = CassiModel::new(ap.clone(), DispersionWeights::default(), 4).unwrap();
        let hist = power_method_history(&model, 50, 1).unwrap();
        assert!(hist.windows(2).all(|w| w[1] >= w[0] - 1e-12));
        // Scaling H by c scales |H|² by c²: cH = H with weights scaled by c.
        let c = 2.0;
        let scaled =
            CassiModel::new(ap, DispersionWeights::new_unchecked([0.5, 1.0, 0.5]), 4).unwrap();
        let a = power_method(&model, 50, 1).unwrap();
        let b = power_method(&scaled, 50, 1).unwrap();
        assert!((b - c * c * a).abs() < 1e-9 * b);
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(
            soft_threshold(&[1.0, -2.0, 0.0], 0.0).unwrap(),
            vec![1.0, -2.0, 0.0]
        );
        assert_eq!(soft_threshold(&[2.0, -0.3], 0.5).unwrap(), vec![1.5, 0.0]);
        assert!(soft_threshold(&[1.0], -0.1).is_err());
    }

    #[test]
    fn prox_matches_grid_search() {
        // n = 4: 2x2 slice, one band, one Haar level.
        let dims = CubeDims::new(2, 2, 1).unwrap();
        let psi = SparsifyingTransform::new(dims, Wavelet::Haar, 1).unwrap();
        let v = [0.9, -0.2, 0.4, 0.1];
        let tau = 0.3;
        let p = prox_l1(&v, tau, &psi).unwrap();
        let cost = |x: &[f64]| -> f64 {
            let d: f64 = x.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum();
            0.5 * d + tau * psi.forward(x).unwrap().iter().map(|c| c.abs()).sum::<f64>()
        };
        let best = cost(&p);
        let h = 0.02;
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..20_000 {
            let x: Vec<f64> = p
                .iter()
                .map(|c| c + h * rng.random_range(-10.0..10.0))
                .collect();
            assert!(cost(&x) >= best - 1e-12);
        }
    }

    fn small_problem() -> (CassiModel, SparsifyingTransform, Vec<f64>) {
        let ap = generate_apertures(8, 8, 2, ApertureScheme::Complementary, 4).unwrap();
        let model = CassiModel::new(ap, DispersionWeights::default(), 4).unwrap();
        let psi = SparsifyingTransform::with_default_levels(model.dims(), Wavelet::Haar).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let f: Vec<f64> = (0..model.n()).map(|_| rng.random()).collect();
        let g = model.forward(&f).unwrap();
        (model, psi, g)
    }

    #[test]
    fn huge_lambda_gives_zero() {
        let (model, psi, g) = small_problem();
        let out = fista_run(&g, &model, &psi, &L1Config::new(1e6, 20), None).unwrap();
        assert!(out.estimate.iter().all(|v| v.abs() < 1e-12));
    }

    #[test]
    fn objective_never_increases() {
        let (model, psi, g) = small_problem();
        for accelerate in [true, false] {
            let cfg = L1Config {
                accelerate,
                ..L1Config::new(0.01, 60)
            };
            let out = fista_run(&g, &model, &psi, &cfg, None).unwrap();
            assert!(out
                .trace
                .records
                .windows(2)
                .all(|w| w[1].objective <= w[0].objective + 1e-9));
        }
    }

    #[test]
    fn least_squares_residual_decreases() {
        let (model, psi, g) = small_problem();
        let cfg = L1Config {
            accelerate: false,
            ..L1Config::new(1e-9, 50)
        };
        let out = fista_run(&g, &model, &psi, &cfg, None).unwrap();
        let r: Vec<f64> = out.trace.records.iter().map(|r| r.residual_norm).collect();
        assert!(r.windows(2).all(|w| w[1] <= w[0] + 1e-12));
        assert!(r.last().unwrap() < &(0.5 * r[0]));
    }

    #[test]
    fn invalid_configs() {
        let (model, psi, g) = small_problem();
        assert!(fista_run(&g, &model, &psi, &L1Config::new(-1.0, 5), None).is_err());
        assert!(fista_run(&g, &model, &psi, &L1Config::new(0.0, 5), None).is_err());
        assert!(fista_run(&g, &model, &psi, &L1Config::new(1.0, 0), None).is_err());
        assert!(fista_run(&g[..3], &model, &psi, &L1Config::new(1.0, 5), None).is_err());
    }

    proptest! {
        #[test]
        fn shrinkage_never_creates_nonzeros(v in proptest::collection::vec(-5.0f64..5.0, 1..40), tau in 0.0f64..3.0) {
            let out = soft_threshold(&v, tau).unwrap();
            let nnz = |x: &[f64]| x.iter().filter(|c| **c != 0.0).count();
            prop_assert!(nnz(&out) <= nnz(&v));
        }
    }
}
