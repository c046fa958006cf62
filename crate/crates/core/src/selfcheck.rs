//! Built-in invariant suite behind `cassi selfcheck`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::operator::{
    generate_apertures, materialize, measurement_count, ApertureScheme, CassiModel,
    DispersionWeights,
};
use crate::transform::{SparsifyingTransform, Wavelet};
use crate::wiener::{estimate_stats, shrink_derivative_mean, wiener_gain, wiener_shrink};

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            passed,
            detail: detail.into(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SelfcheckDims {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
    pub shots: usize,
}

impl Default for SelfcheckDims {
    fn default() -> Self {
        SelfcheckDims {
            rows: 8,
            cols: 8,
            bands: 4,
            shots: 2,
        }
    }
}

fn randn(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs())
        .fold(0.0, f64::max)
}

pub fn run(dims: SelfcheckDims, weights: DispersionWeights) -> Result<Vec<Check>> {
    let SelfcheckDims {
        rows,
        cols,
        bands,
        shots,
    } = dims;
    let mut checks = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5e1f);

    let w = weights.as_array();
    let sum = weights.sum();
    checks.push(Check::new(
        "dispersion weights sum to 1",
        (sum - 1.0).abs() <= 1e-12 && w.iter().all(|x| *x >= 0.0),
        format!("w = {w:?}, sum = {sum}"),
    ));

    let scheme = if shots % 2 == 0 {
        ApertureScheme::Complementary
    } else {
        ApertureScheme::Random
    };
    let model = CassiModel::new(
        generate_apertures(rows, cols, shots, scheme, 1)?,
        weights,
        bands,
    )?;
    let m = measurement_count(rows, cols, bands, shots);
    checks.push(Check::new(
        "measurement count",
        model.m() == m,
        format!("m = K*M*(N+L+1) = {m}, per shot {}", m / shots),
    ));

    let mut worst = 0.0f64;
    for _ in 0..100 {
        let f = randn(model.n(), &mut rng);
        let g = randn(model.m(), &mut rng);
        let lhs = dot(&model.forward(&f)?, &g);
        let rhs = dot(&f, &model.adjoint(&g)?);
        worst = worst.max((lhs - rhs).abs() / (dot(&f, &f) * dot(&g, &g)).sqrt());
    }
    checks.push(Check::new(
        "adjoint identity (100 pairs)",
        worst <= 1e-10,
        format!("max relative gap {worst:.3e}"),
    ));

    match materialize(&model) {
        Ok(dense) => {
            let f = randn(model.n(), &mut rng);
            let diff = max_abs_diff(&dense.mul_vec(&f), &model.forward(&f)?);
            checks.push(Check::new(
                format!("materialized H is {}x{}", dense.rows, dense.cols),
                dense.rows == m && dense.cols == model.n() && diff <= 1e-12,
                format!("max |Hf - H_dense f| = {diff:.3e}"),
            ));
            let col_bound = (0..dense.cols)
                .all(|c| dense.column(c).iter().sum::<f64>() <= sum.max(1.0) + 1e-12);
            let energy = model.column_energy();
            let energy_diff = (0..dense.cols)
                .map(|c| (dense.column(c).iter().map(|v| v * v).sum::<f64>() - energy[c]).abs())
                .fold(0.0, f64::max);
            checks.push(Check::new(
                "column sums and energies",
                col_bound && energy_diff <= 1e-12,
                format!("max column-energy gap {energy_diff:.3e}"),
            ));
        }
        Err(e) => checks.push(Check::new("materialized H", false, e.to_string())),
    }

    for wavelet in [Wavelet::Haar, Wavelet::Db4] {
        let psi = SparsifyingTransform::with_default_levels(model.dims(), wavelet)?;
        let x = randn(model.n(), &mut rng);
        let theta = psi.forward(&x)?;
        let back = psi.inverse(&theta)?;
        let parseval = (dot(&theta, &theta).sqrt() - dot(&x, &x).sqrt()).abs() / dot(&x, &x).sqrt();
        let rt = max_abs_diff(&back, &x);
        checks.push(Check::new(
            format!("{wavelet} transform round trip and Parseval"),
            rt <= 1e-12 && parseval <= 1e-10,
            format!("round trip {rt:.3e}, energy gap {parseval:.3e}"),
        ));
    }

    let psi = SparsifyingTransform::with_default_levels(model.dims(), Wavelet::Haar)?;
    let map = psi.subband_map();
    let mut exact = true;
    for trial in 0..20 {
        let theta = randn(model.n(), &mut rng);
        let sigma2 = 0.1 * trial as f64;
        let stats = estimate_stats(&theta, &map)?;
        let out = wiener_shrink(&theta, &stats, sigma2, &map)?;
        let mut total = 0.0;
        for (p, &t) in theta.iter().enumerate() {
            let g = map.group(p);
            let gain = wiener_gain(stats.variance[g], sigma2);
            total += gain;
            exact &= out[p] == gain * t + (1.0 - gain) * stats.mean[g];
        }
        exact &= shrink_derivative_mean(&stats, sigma2, &map)? == total / theta.len() as f64;
    }
    checks.push(Check::new(
        "Wiener shrinkage matches scalar reference",
        exact,
        "20 random vectors, bitwise comparison",
    ));

    Ok(checks)
}

pub fn render(checks: &[Check]) -> String {
    let width = checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    let mut out = String::new();
    for c in checks {
        let status = if c.passed { "PASS" } else { "FAIL" };
        out.push_str(&format!("{status}  {:width$}  {}\n", c.name, c.detail));
    }
    out
}
