//! Matrix-free CASSI sensing operator with three-pixel dispersion.
//!
//! Each voxel `(i, j, l)` is gated by the shot's coded aperture at `(i, j)`
//! and its energy lands on detector columns `j + l + d` for `d = 0, 1, 2`
//! with weights `w_d`. The detector of every shot is `M x (N+L+1)`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::cube::CubeDims;
use crate::error::{ensure_len, CassiError, Result};

/// Default cap on `m * n` for [`materialize`].
pub const DEFAULT_MATERIALIZE_CAP: usize = 40_000_000;

/// Number of FPA measurements for `shots` exposures of an `M x N x L` cube.
pub fn measurement_count(rows: usize, cols: usize, bands: usize, shots: usize) -> usize {
    shots * rows * (cols + bands + 1)
}

/// `R = m / n`.
pub fn measurement_rate(rows: usize, cols: usize, bands: usize, shots: usize) -> f64 {
    measurement_count(rows, cols, bands, shots) as f64 / (rows * cols * bands) as f64
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ApertureScheme {
    Random,
    /// Odd shots are the bitwise complement of the preceding even shot.
    Complementary,
}

impl FromStr for ApertureScheme {
    type Err = CassiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "random" => Ok(ApertureScheme::Random),
            "complementary" | "pairwise-complementary" => Ok(ApertureScheme::Complementary),
            other => Err(CassiError::config(format!(
                "unknown aperture scheme {other:?}"
            ))),
        }
    }
}

impl fmt::Display for ApertureScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ApertureScheme::Random => "random",
            ApertureScheme::Complementary => "complementary",
        })
    }
}

/// Binary masks, one `M x N` column-major plane per shot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CodedApertureSet {
    shots: usize,
    rows: usize,
    cols: usize,
    masks: Vec<u8>,
}

impl CodedApertureSet {
    pub fn from_masks(shots: usize, rows: usize, cols: usize, masks: Vec<u8>) -> Result<Self> {
        if shots == 0 || rows == 0 || cols == 0 {
            return Err(CassiError::dim("aperture dims must be positive"));
        }
        ensure_len("aperture masks", masks.len(), shots * rows * cols)?;
        if let Some(pos) = masks.iter().position(|&b| b > 1) {
            return Err(CassiError::Format(format!(
                "aperture entry {pos} is {}, expected 0 or 1",
                masks[pos]
            )));
        }
        Ok(CodedApertureSet {
            shots,
            rows,
            cols,
            masks,
        })
    }

    pub fn filled(shots: usize, rows: usize, cols: usize, value: u8) -> Result<Self> {
        Self::from_masks(shots, rows, cols, vec![value; shots * rows * cols])
    }

    pub fn shots(&self) -> usize {
        self.shots
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.masks
    }

    pub fn mask(&self, k: usize) -> &[u8] {
        let s = self.rows * self.cols;
        &self.masks[k * s..(k + 1) * s]
    }

    pub fn get(&self, i: usize, j: usize, k: usize) -> u8 {
        self.mask(k)[i + self.rows * j]
    }

    pub fn is_pairwise_complementary(&self) -> bool {
        self.shots.is_multiple_of(2)
            && (0..self.shots).step_by(2).all(|k| {
                self.mask(k)
                    .iter()
                    .zip(self.mask(k + 1))
                    .all(|(a, b)| a + b == 1)
            })
    }
}

/// Aperture patterns drawn from a ChaCha8 stream seeded with `seed`.
pub fn generate_apertures(
    rows: usize,
    cols: usize,
    shots: usize,
    scheme: ApertureScheme,
    seed: u64,
) -> Result<CodedApertureSet> {
    if shots == 0 {
        return Err(CassiError::config("shot count must be at least 1"));
    }
    if scheme == ApertureScheme::Complementary && !shots.is_multiple_of(2) {
        return Err(CassiError::config(format!(
            "complementary apertures need an even shot count, got {shots}"
        )));
    }
    let plane = rows * cols;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut masks = Vec::with_capacity(shots * plane);
    for k in 0..shots {
        if scheme == ApertureScheme::Complementary && k % 2 == 1 {
            let prev = (k - 1) * plane;
            for p in 0..plane {
                masks.push(1 - masks[prev + p]);
            }
        } else {
            masks.extend((0..plane).map(|_| rng.random_bool(0.5) as u8));
        }
    }
    CodedApertureSet::from_masks(shots, rows, cols, masks)
}

/// Fractions of voxel energy landing on the three neighbouring detector columns.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DispersionWeights([f64; 3]);

impl DispersionWeights {
    pub const FIRST_ORDER: DispersionWeights = DispersionWeights([0.0, 1.0, 0.0]);

    pub fn new(w: [f64; 3]) -> Result<Self> {
        if w.iter().any(|x| !x.is_finite() || *x < 0.0) {
            return Err(CassiError::config(format!(
                "dispersion weights must be finite and nonnegative, got {w:?}"
            )));
        }
        let sum: f64 = w.iter().sum();
        if (sum - 1.0).abs() > 1e-12 {
            return Err(CassiError::config(format!(
                "dispersion weights must sum to 1, got {sum}"
            )));
        }
        Ok(DispersionWeights(w))
    }

    /// Skips validation. Only for probing invariant checks.
    #[doc(hidden)]
    pub fn new_unchecked(w: [f64; 3]) -> Self {
        DispersionWeights(w)
    }

    pub fn as_array(&self) -> [f64; 3] {
        self.0
    }

    pub fn sum(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn energy(&self) -> f64 {
        self.0.iter().map(|w| w * w).sum()
    }
}

impl Default for DispersionWeights {
    fn default() -> Self {
        DispersionWeights([0.25, 0.5, 0.25])
    }
}

impl FromStr for DispersionWeights {
    type Err = CassiError;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        if parts.len() != 3 {
            return Err(CassiError::config(format!(
                "expected three comma-separated weights, got {s:?}"
            )));
        }
        let mut w = [0.0; 3];
        for (slot, p) in w.iter_mut().zip(&parts) {
            *slot = p
                .parse()
                .map_err(|_| CassiError::config(format!("bad weight {p:?}")))?;
        }
        DispersionWeights::new(w)
    }
}

/// The implicit sensing matrix `H`.
#[derive(Debug, Clone, PartialEq)]
pub struct CassiModel {
    apertures: CodedApertureSet,
    weights: DispersionWeights,
    dims: CubeDims,
}

impl CassiModel {
    pub fn new(
        apertures: CodedApertureSet,
        weights: DispersionWeights,
        bands: usize,
    ) -> Result<Self> {
        let dims = CubeDims::new(apertures.rows, apertures.cols, bands)?;
        Ok(CassiModel {
            apertures,
            weights,
            dims,
        })
    }

    pub fn dims(&self) -> CubeDims {
        self.dims
    }

    pub fn shots(&self) -> usize {
        self.apertures.shots
    }

    pub fn apertures(&self) -> &CodedApertureSet {
        &self.apertures
    }

    pub fn weights(&self) -> DispersionWeights {
        self.weights
    }

    /// Signal length `n`.
    pub fn n(&self) -> usize {
        self.dims.voxels()
    }

    /// Measurement length `m`.
    pub fn m(&self) -> usize {
        measurement_count(
            self.dims.rows,
            self.dims.cols,
            self.dims.bands,
            self.shots(),
        )
    }

    pub fn rate(&self) -> f64 {
        self.m() as f64 / self.n() as f64
    }

    /// `g = H f`.
    pub fn forward(&self, f: &[f64]) -> Result<Vec<f64>> {
        ensure_len("forward input", f.len(), self.n())?;
        let CubeDims { rows, cols, bands } = self.dims;
        let shot_len = rows * self.dims.fpa_cols();
        let slice = rows * cols;
        let w = self.weights.0;
        let mut g = vec![0.0; self.m()];
        g.par_chunks_mut(shot_len).enumerate().for_each(|(k, out)| {
            let mask = self.apertures.mask(k);
            let mut coded = vec![0.0; rows];
            for l in 0..bands {
                let band = &f[l * slice..(l + 1) * slice];
                for j in 0..cols {
                    let col_mask = &mask[j * rows..(j + 1) * rows];
                    let col = &band[j * rows..(j + 1) * rows];
                    for ((c, &t), &v) in coded.iter_mut().zip(col_mask).zip(col) {
                        *c = if t == 1 { v } else { 0.0 };
                    }
                    for (d, &wd) in w.iter().enumerate() {
                        if wd == 0.0 {
                            continue;
                        }
                        let jp = j + l + d;
                        let dst = &mut out[jp * rows..(jp + 1) * rows];
                        for (o, &c) in dst.iter_mut().zip(&coded) {
                            *o += wd * c;
                        }
                    }
                }
            }
        });
        Ok(g)
    }

    /// `f = Hᵀ g`.
    pub fn adjoint(&self, g: &[f64]) -> Result<Vec<f64>> {
        ensure_len("adjoint input", g.len(), self.m())?;
        let CubeDims { rows, cols, .. } = self.dims;
        let shot_len = rows * self.dims.fpa_cols();
        let slice = rows * cols;
        let w = self.weights.0;
        let mut f = vec![0.0; self.n()];
        f.par_chunks_mut(slice).enumerate().for_each(|(l, band)| {
            for k in 0..self.shots() {
                let mask = self.apertures.mask(k);
                let shot = &g[k * shot_len..(k + 1) * shot_len];
                for j in 0..cols {
                    let dst = &mut band[j * rows..(j + 1) * rows];
                    let col_mask = &mask[j * rows..(j + 1) * rows];
                    for i in 0..rows {
                        if col_mask[i] == 0 {
                            continue;
                        }
                        let mut acc = 0.0;
                        for (d, &wd) in w.iter().enumerate() {
                            acc += wd * shot[i + rows * (j + l + d)];
                        }
                        dst[i] += acc;
                    }
                }
            }
        });
        Ok(f)
    }

    /// Squared column norms `diag(HᵀH)`, computed in closed form.
    pub fn column_energy(&self) -> Vec<f64> {
        let CubeDims { rows, cols, bands } = self.dims;
        let slice = rows * cols;
        let e = self.weights.energy();
        let mut hits = vec![0.0; slice];
        for k in 0..self.shots() {
            for (h, &t) in hits.iter_mut().zip(self.apertures.mask(k)) {
                *h += t as f64;
            }
        }
        let per_band: Vec<f64> = hits.iter().map(|h| h * e).collect();
        per_band
            .iter()
            .cycle()
            .take(slice * bands)
            .copied()
            .collect()
    }
}

/// Row-major dense matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<f64>,
}

impl DenseMatrix {
    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn column(&self, c: usize) -> Vec<f64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        self.data
            .chunks(self.cols)
            .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
            .collect()
    }

    pub fn transpose_mul_vec(&self, y: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        for (row, &yr) in self.data.chunks(self.cols).zip(y) {
            for (o, a) in out.iter_mut().zip(row) {
                *o += a * yr;
            }
        }
        out
    }
}

/// Dense `m x n` copy of `H`, built column by column from basis vectors.
pub fn materialize(model: &CassiModel) -> Result<DenseMatrix> {
    materialize_with_cap(model, DEFAULT_MATERIALIZE_CAP)
}

pub fn materialize_with_cap(model: &CassiModel, cap: usize) -> Result<DenseMatrix> {
    let (m, n) = (model.m(), model.n());
    let entries = m.saturating_mul(n);
    if entries > cap {
        return Err(CassiError::SizeCap { entries, cap });
    }
    let mut data = vec![0.0; entries];
    let mut basis = vec![0.0; n];
    for c in 0..n {
        basis[c] = 1.0;
        let col = model.forward(&basis)?;
        basis[c] = 0.0;
        for (r, v) in col.into_iter().enumerate() {
            data[r * n + c] = v;
        }
    }
    Ok(DenseMatrix {
        rows: m,
        cols: n,
        data,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_distr::StandardNormal;

    fn model(m: usize, n: usize, l: usize, k: usize, seed: u64) -> CassiModel {
        let scheme = if k.is_multiple_of(2) {
            ApertureScheme::Complementary
        } else {
            ApertureScheme::Random
        };
        let ap = generate_apertures(m, n, k, scheme, seed).unwrap();
        CassiModel::new(ap, DispersionWeights::default(), l).unwrap()
    }

    fn randn(len: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
        (0..len).map(|_| rng.sample(StandardNormal)).collect()
    }

    fn dot(a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| x * y).sum()
    }

    fn norm(a: &[f64]) -> f64 {
        dot(a, a).sqrt()
    }

    #[test]
    fn measurement_counts_match_published_sizes() {
        assert_eq!(measurement_count(8, 8, 4, 1), 104);
        assert_eq!(measurement_count(256, 256, 24, 2), 143_872);
        assert_eq!(measurement_count(512, 512, 33, 2), 559_104);
    }

    #[test]
    fn single_voxel_spreads_over_three_pixels() {
        let ap = CodedApertureSet::filled(1, 8, 8, 1).unwrap();
        let w = DispersionWeights::new([0.2, 0.5, 0.3]).unwrap();
        let model = CassiModel::new(ap, w, 4).unwrap();
        let dims = model.dims();
        let (i0, j0, l0) = (3, 5, 2);
        let mut f = vec![0.0; model.n()];
        f[dims.voxel_index(i0, j0, l0)] = 1.0;
        let g = model.forward(&f).unwrap();
        let nonzero: Vec<(usize, f64)> = g
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(p, v)| (p, *v))
            .collect();
        assert_eq!(nonzero.len(), 3);
        for (d, (pos, v)) in nonzero.into_iter().enumerate() {
            assert_eq!(pos, dims.measurement_index(i0, j0 + l0 + d, 0));
            assert_eq!(v, w.as_array()[d]);
        }
    }

    #[test]
    fn adjoint_of_unit_measurement() {
        let ap = CodedApertureSet::filled(1, 4, 6, 1).unwrap();
        let w = DispersionWeights::new([0.2, 0.5, 0.3]).unwrap();
        let model = CassiModel::new(ap, w, 3).unwrap();
        let dims = model.dims();
        let (i0, jp0) = (1, 4);
        let mut g = vec![0.0; model.m()];
        g[dims.measurement_index(i0, jp0, 0)] = 1.0;
        let f = model.adjoint(&g).unwrap();
        let mut expected = vec![0.0; model.n()];
        for l in 0..3 {
            for d in 0..3 {
                if let Some(j) = jp0.checked_sub(l + d).filter(|j| *j < 6) {
                    expected[dims.voxel_index(i0, j, l)] += w.as_array()[d];
                }
            }
        }
        assert_eq!(f, expected);
    }

    #[test]
    fn zero_aperture_annihilates() {
        let ap = CodedApertureSet::filled(2, 4, 4, 0).unwrap();
        let model = CassiModel::new(ap, DispersionWeights::default(), 2).unwrap();
        let g = model.forward(&vec![1.5; model.n()]).unwrap();
        assert!(g.iter().all(|&v| v == 0.0));
        assert!(model
            .adjoint(&vec![0.0; model.m()])
            .unwrap()
            .iter()
            .all(|&v| v == 0.0));
    }

    #[test]
    fn forward_rejects_bad_length() {
        let m = model(4, 4, 2, 2, 0);
        assert!(matches!(m.forward(&[1.0]), Err(CassiError::Dimension(_))));
        assert!(matches!(m.adjoint(&[1.0]), Err(CassiError::Dimension(_))));
    }

    #[test]
    fn adjoint_identity_on_random_pairs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for &(m, n, l, k) in &[(8, 8, 4, 2), (5, 7, 3, 3), (16, 4, 6, 1)] {
            let h = model(m, n, l, k, 5);
            for _ in 0..20 {
                let f = randn(h.n(), &mut rng);
                let g = randn(h.m(), &mut rng);
                let lhs = dot(&h.forward(&f).unwrap(), &g);
                let rhs = dot(&f, &h.adjoint(&g).unwrap());
                assert!((lhs - rhs).abs() <= 1e-10 * norm(&f) * norm(&g));
            }
        }
    }

    #[test]
    fn forward_is_linear() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let h = model(8, 8, 4, 2, 1);
        let f1 = randn(h.n(), &mut rng);
        let f2 = randn(h.n(), &mut rng);
        let (a, b) = (1.7, -0.3);
        let mix: Vec<f64> = f1.iter().zip(&f2).map(|(x, y)| a * x + b * y).collect();
        let lhs = h.forward(&mix).unwrap();
        let g1 = h.forward(&f1).unwrap();
        let g2 = h.forward(&f2).unwrap();
        let rhs: Vec<f64> = g1.iter().zip(&g2).map(|(x, y)| a * x + b * y).collect();
        let diff: Vec<f64> = lhs.iter().zip(&rhs).map(|(x, y)| x - y).collect();
        assert!(norm(&diff) <= 1e-12 * norm(&rhs));
    }

    #[test]
    fn materialized_matrix_shape_and_columns() {
        let h = model(8, 8, 4, 2, 9);
        let dense = materialize(&h).unwrap();
        assert_eq!((dense.rows, dense.cols), (208, 256));
        let w = h.weights().as_array();
        for c in 0..dense.cols {
            let col = dense.column(c);
            assert!(col.iter().all(|v| *v == 0.0 || w.contains(v)));
            assert!(col.iter().sum::<f64>() <= 1.0 + 1e-15);
        }
    }

    #[test]
    fn complementary_first_order_columns_sum_to_one() {
        let ap = generate_apertures(8, 8, 2, ApertureScheme::Complementary, 4).unwrap();
        let h = CassiModel::new(ap, DispersionWeights::FIRST_ORDER, 4).unwrap();
        let dense = materialize(&h).unwrap();
        for c in 0..dense.cols {
            let col = dense.column(c);
            assert_eq!(col.iter().filter(|v| **v != 0.0).count(), 1);
            assert_eq!(col.iter().sum::<f64>(), 1.0);
        }
    }

    #[test]
    fn column_norms_take_few_values_and_match_closed_form() {
        let h = model(8, 8, 4, 2, 13);
        let dense = materialize(&h).unwrap();
        let energy = h.column_energy();
        let mut distinct: Vec<f64> = Vec::new();
        for (c, &want) in energy.iter().enumerate() {
            let e: f64 = dense.column(c).iter().map(|v| v * v).sum();
            assert!((e - want).abs() < 1e-15);
            if !distinct.iter().any(|d| (d - e).abs() < 1e-12) {
                distinct.push(e);
            }
        }
        assert!(distinct.len() <= 3, "{distinct:?}");
    }

    #[test]
    fn materialize_refuses_large_instances() {
        let h = model(8, 8, 4, 2, 0);
        assert!(matches!(
            materialize_with_cap(&h, 1000),
            Err(CassiError::SizeCap { .. })
        ));
    }

    #[test]
    fn apertures_are_seeded_and_complementary() {
        let a = generate_apertures(16, 12, 4, ApertureScheme::Complementary, 77).unwrap();
        let b = generate_apertures(16, 12, 4, ApertureScheme::Complementary, 77).unwrap();
        assert_eq!(a, b);
        assert!(a.is_pairwise_complementary());
        for p in 0..16 * 12 {
            assert_eq!(a.mask(0)[p] + a.mask(1)[p], 1);
        }
        let r = generate_apertures(16, 12, 3, ApertureScheme::Random, 77).unwrap();
        let ones = r.as_bytes().iter().filter(|b| **b == 1).count();
        assert!(ones > 200 && ones < 376);
        assert!(generate_apertures(4, 4, 3, ApertureScheme::Complementary, 0).is_err());
    }

    #[test]
    fn weights_validation() {
        assert!(DispersionWeights::new([0.5, 0.5, 0.1]).is_err());
        assert!(DispersionWeights::new([-0.1, 1.0, 0.1]).is_err());
        assert_eq!(
            "0.25, 0.5,0.25".parse::<DispersionWeights>().unwrap(),
            DispersionWeights::default()
        );
        assert!("1,0".parse::<DispersionWeights>().is_err());
    }
}
