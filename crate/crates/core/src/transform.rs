//! Orthonormal sparsifying transform: a periodized 2D wavelet on every band
//! followed by an orthonormal DCT-II across bands.
//!
//! Wavelet coefficients use the usual Mallat layout inside each `M x N`
//! slice. After `J` levels the top-left `M/2^J x N/2^J` block holds the
//! approximation; detail blocks of level `s` sit in the three other
//! quadrants of the `M/2^(s-1) x N/2^(s-1)` region.

use std::f64::consts::{FRAC_1_SQRT_2, PI};
use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;

use crate::cube::CubeDims;
use crate::error::{ensure_len, CassiError, Result};

const DB4_LOWPASS: [f64; 8] = [
    0.230_377_813_308_896_5,
    0.714_846_570_552_915_7,
    0.630_880_767_929_858_9,
    -0.027_983_769_416_859_854,
    -0.187_034_811_719_093_09,
    0.030_841_381_835_560_764,
    0.032_883_011_666_885_2,
    -0.010_597_401_785_069_032,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Wavelet {
    #[default]
    Haar,
    /// Daubechies with four vanishing moments (8 taps).
    Db4,
}

impl Wavelet {
    fn lowpass(&self) -> &'static [f64] {
        match self {
            Wavelet::Haar => &[FRAC_1_SQRT_2, FRAC_1_SQRT_2],
            Wavelet::Db4 => &DB4_LOWPASS,
        }
    }
}

impl FromStr for Wavelet {
    type Err = CassiError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "haar" => Ok(Wavelet::Haar),
            "db4" => Ok(Wavelet::Db4),
            other => Err(CassiError::config(format!("unknown wavelet {other:?}"))),
        }
    }
}

impl fmt::Display for Wavelet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Wavelet::Haar => "haar",
            Wavelet::Db4 => "db4",
        })
    }
}

/// Default decomposition depth: `max(1, log2(min(M, N)) - 2)`.
pub fn default_levels(rows: usize, cols: usize) -> usize {
    let min = rows.min(cols).max(1);
    let log2 = usize::BITS - 1 - min.leading_zeros();
    (log2 as usize).saturating_sub(2).max(1)
}

fn check_dyadic(rows: usize, cols: usize, levels: usize) -> Result<()> {
    let block = 1usize
        .checked_shl(levels as u32)
        .ok_or_else(|| CassiError::config(format!("{levels} wavelet levels is too many")))?;
    if !rows.is_multiple_of(block) || !cols.is_multiple_of(block) || rows == 0 || cols == 0 {
        return Err(CassiError::dim(format!(
            "{rows}x{cols} slice is not divisible by 2^{levels}"
        )));
    }
    Ok(())
}

/// One periodized analysis step over `n` samples read with `stride`.
fn analyze_1d(h: &[f64], src: &[f64], dst: &mut [f64]) {
    let n = src.len();
    let half = n / 2;
    let taps = h.len();
    for k in 0..half {
        let (mut a, mut d) = (0.0, 0.0);
        for t in 0..taps {
            let x = src[(2 * k + t) % n];
            a += h[t] * x;
            // g[t] = (-1)^t h[taps-1-t]
            let g = if t % 2 == 0 {
                h[taps - 1 - t]
            } else {
                -h[taps - 1 - t]
            };
            d += g * x;
        }
        dst[k] = a;
        dst[half + k] = d;
    }
}

fn synthesize_1d(h: &[f64], src: &[f64], dst: &mut [f64]) {
    let n = src.len();
    let half = n / 2;
    let taps = h.len();
    dst.iter_mut().for_each(|v| *v = 0.0);
    for k in 0..half {
        let (a, d) = (src[k], src[half + k]);
        for t in 0..taps {
            let g = if t % 2 == 0 {
                h[taps - 1 - t]
            } else {
                -h[taps - 1 - t]
            };
            dst[(2 * k + t) % n] += h[t] * a + g * d;
        }
    }
}

/// Transforms the top-left `r x c` block of a column-major slice of height `rows`.
fn level_forward(h: &[f64], data: &mut [f64], rows: usize, r: usize, c: usize) {
    let mut src = vec![0.0; r.max(c)];
    let mut dst = vec![0.0; r.max(c)];
    for j in 0..c {
        let col = &mut data[j * rows..j * rows + r];
        src[..r].copy_from_slice(col);
        analyze_1d(h, &src[..r], &mut dst[..r]);
        col.copy_from_slice(&dst[..r]);
    }
    for i in 0..r {
        for j in 0..c {
            src[j] = data[i + rows * j];
        }
        analyze_1d(h, &src[..c], &mut dst[..c]);
        for j in 0..c {
            data[i + rows * j] = dst[j];
        }
    }
}

fn level_inverse(h: &[f64], data: &mut [f64], rows: usize, r: usize, c: usize) {
    let mut src = vec![0.0; r.max(c)];
    let mut dst = vec![0.0; r.max(c)];
    for i in 0..r {
        for j in 0..c {
            src[j] = data[i + rows * j];
        }
        synthesize_1d(h, &src[..c], &mut dst[..c]);
        for j in 0..c {
            data[i + rows * j] = dst[j];
        }
    }
    for j in 0..c {
        let col = &mut data[j * rows..j * rows + r];
        src[..r].copy_from_slice(col);
        synthesize_1d(h, &src[..r], &mut dst[..r]);
        col.copy_from_slice(&dst[..r]);
    }
}

fn dwt2_in_place(data: &mut [f64], rows: usize, cols: usize, levels: usize, wavelet: Wavelet) {
    let h = wavelet.lowpass();
    for s in 0..levels {
        level_forward(h, data, rows, rows >> s, cols >> s);
    }
}

fn idwt2_in_place(data: &mut [f64], rows: usize, cols: usize, levels: usize, wavelet: Wavelet) {
    let h = wavelet.lowpass();
    for s in (0..levels).rev() {
        level_inverse(h, data, rows, rows >> s, cols >> s);
    }
}

/// Multi-level orthonormal 2D DWT of a column-major `rows x cols` slice.
pub fn dwt2_forward(
    slice: &[f64],
    rows: usize,
    cols: usize,
    levels: usize,
    wavelet: Wavelet,
) -> Result<Vec<f64>> {
    ensure_len("wavelet input", slice.len(), rows * cols)?;
    check_dyadic(rows, cols, levels)?;
    let mut out = slice.to_vec();
    dwt2_in_place(&mut out, rows, cols, levels, wavelet);
    Ok(out)
}

pub fn dwt2_inverse(
    coeffs: &[f64],
    rows: usize,
    cols: usize,
    levels: usize,
    wavelet: Wavelet,
) -> Result<Vec<f64>> {
    ensure_len("wavelet coefficients", coeffs.len(), rows * cols)?;
    check_dyadic(rows, cols, levels)?;
    let mut out = coeffs.to_vec();
    idwt2_in_place(&mut out, rows, cols, levels, wavelet);
    Ok(out)
}

/// Orthonormal DCT-II basis, `basis[p * L + l] = c_p cos(pi (2l+1) p / 2L)`.
#[derive(Debug, Clone, PartialEq)]
pub struct DctBasis {
    len: usize,
    basis: Vec<f64>,
}

impl DctBasis {
    pub fn new(len: usize) -> Self {
        let mut basis = Vec::with_capacity(len * len);
        for p in 0..len {
            let c = if p == 0 {
                (1.0 / len as f64).sqrt()
            } else {
                (2.0 / len as f64).sqrt()
            };
            for l in 0..len {
                basis.push(c * (PI * (2 * l + 1) as f64 * p as f64 / (2 * len) as f64).cos());
            }
        }
        DctBasis { len, basis }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn row(&self, p: usize) -> &[f64] {
        &self.basis[p * self.len..(p + 1) * self.len]
    }

    fn apply(&self, cube: &mut [f64], slice: usize, inverse: bool) {
        let l_len = self.len;
        if l_len == 1 {
            return;
        }
        let mut spectrum = vec![0.0; l_len];
        let mut out = vec![0.0; l_len];
        for pix in 0..slice {
            for (l, s) in spectrum.iter_mut().enumerate() {
                *s = cube[pix + slice * l];
            }
            for (p, o) in out.iter_mut().enumerate() {
                *o = if inverse {
                    (0..l_len)
                        .map(|q| self.basis[q * l_len + p] * spectrum[q])
                        .sum()
                } else {
                    self.row(p).iter().zip(&spectrum).map(|(b, s)| b * s).sum()
                };
            }
            for (l, o) in out.iter().enumerate() {
                cube[pix + slice * l] = *o;
            }
        }
    }
}

/// DCT-II along the band axis for every pixel of a flat cube.
pub fn dct_spectral_forward(values: &[f64], dims: CubeDims) -> Result<Vec<f64>> {
    ensure_len("cube", values.len(), dims.voxels())?;
    let mut out = values.to_vec();
    DctBasis::new(dims.bands).apply(&mut out, dims.slice_len(), false);
    Ok(out)
}

pub fn dct_spectral_inverse(values: &[f64], dims: CubeDims) -> Result<Vec<f64>> {
    ensure_len("cube", values.len(), dims.voxels())?;
    let mut out = values.to_vec();
    DctBasis::new(dims.bands).apply(&mut out, dims.slice_len(), true);
    Ok(out)
}

/// `Ψ = Φ ⊗ W` for a fixed cube shape.
#[derive(Debug, Clone, PartialEq)]
pub struct SparsifyingTransform {
    dims: CubeDims,
    wavelet: Wavelet,
    levels: usize,
    dct: DctBasis,
}

impl SparsifyingTransform {
    pub fn new(dims: CubeDims, wavelet: Wavelet, levels: usize) -> Result<Self> {
        check_dyadic(dims.rows, dims.cols, levels)?;
        Ok(SparsifyingTransform {
            dims,
            wavelet,
            levels,
            dct: DctBasis::new(dims.bands),
        })
    }

    pub fn with_default_levels(dims: CubeDims, wavelet: Wavelet) -> Result<Self> {
        Self::new(dims, wavelet, default_levels(dims.rows, dims.cols))
    }

    pub fn dims(&self) -> CubeDims {
        self.dims
    }

    pub fn levels(&self) -> usize {
        self.levels
    }

    pub fn wavelet(&self) -> Wavelet {
        self.wavelet
    }

    /// `θ = Ψ x`.
    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>> {
        ensure_len("transform input", x.len(), self.dims.voxels())?;
        let CubeDims { rows, cols, .. } = self.dims;
        let mut out = x.to_vec();
        out.par_chunks_mut(rows * cols)
            .for_each(|band| dwt2_in_place(band, rows, cols, self.levels, self.wavelet));
        self.dct.apply(&mut out, rows * cols, false);
        Ok(out)
    }

    /// `x = Ψᵀ θ`.
    pub fn inverse(&self, theta: &[f64]) -> Result<Vec<f64>> {
        ensure_len("transform coefficients", theta.len(), self.dims.voxels())?;
        let CubeDims { rows, cols, .. } = self.dims;
        let mut out = theta.to_vec();
        self.dct.apply(&mut out, rows * cols, true);
        out.par_chunks_mut(rows * cols)
            .for_each(|band| idwt2_in_place(band, rows, cols, self.levels, self.wavelet));
        Ok(out)
    }

    pub fn subband_map(&self) -> SubbandMap {
        build_subband_map(self.dims, self.levels)
    }
}

/// Which wavelet subband a coefficient belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Subband {
    /// Coarsest approximation `LL_J`.
    Approx,
    /// Low along rows, high along columns.
    Lh(usize),
    /// High along rows, low along columns.
    Hl(usize),
    Hh(usize),
}

impl Subband {
    fn index(&self) -> usize {
        match *self {
            Subband::Approx => 0,
            Subband::Lh(s) => 1 + 3 * (s - 1),
            Subband::Hl(s) => 2 + 3 * (s - 1),
            Subband::Hh(s) => 3 + 3 * (s - 1),
        }
    }
}

/// Subband of position `(i, j)` in a `J`-level Mallat layout.
pub fn classify(i: usize, j: usize, rows: usize, cols: usize, levels: usize) -> Subband {
    for s in 1..=levels {
        let (r, c) = (rows >> s, cols >> s);
        let (low_i, low_j) = (i < r, j < c);
        if !(low_i && low_j) {
            return match (low_i, low_j) {
                (true, false) => Subband::Lh(s),
                (false, true) => Subband::Hl(s),
                _ => Subband::Hh(s),
            };
        }
    }
    Subband::Approx
}

/// Partition of Ψ coefficients into (spectral band, wavelet subband) groups.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubbandMap {
    group_of: Vec<u32>,
    sizes: Vec<usize>,
    per_band: usize,
}

impl SubbandMap {
    pub fn len(&self) -> usize {
        self.group_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.group_of.is_empty()
    }

    pub fn group_count(&self) -> usize {
        self.sizes.len()
    }

    pub fn group(&self, flat: usize) -> usize {
        self.group_of[flat] as usize
    }

    pub fn groups(&self) -> &[u32] {
        &self.group_of
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    /// Group id for spectral coefficient `p` and wavelet subband `s`.
    pub fn group_id(&self, p: usize, s: Subband) -> usize {
        p * self.per_band + s.index()
    }

    /// Spectral DCT index owning a group.
    pub fn spectral_index(&self, group: usize) -> usize {
        group / self.per_band
    }
}

pub fn subband_map(rows: usize, cols: usize, bands: usize, levels: usize) -> Result<SubbandMap> {
    check_dyadic(rows, cols, levels)?;
    Ok(build_subband_map(CubeDims::new(rows, cols, bands)?, levels))
}

fn build_subband_map(dims: CubeDims, levels: usize) -> SubbandMap {
    let CubeDims { rows, cols, bands } = dims;
    let per_band = 3 * levels + 1;
    let mut plane = Vec::with_capacity(rows * cols);
    for j in 0..cols {
        for i in 0..rows {
            plane.push(classify(i, j, rows, cols, levels).index() as u32);
        }
    }
    let mut group_of = Vec::with_capacity(dims.voxels());
    let mut sizes = vec![0usize; bands * per_band];
    for p in 0..bands {
        let offset = (p * per_band) as u32;
        for &s in &plane {
            let g = offset + s;
            sizes[g as usize] += 1;
            group_of.push(g);
        }
    }
    SubbandMap {
        group_of,
        sizes,
        per_band,
    }
}
