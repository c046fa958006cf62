//! Hyperspectral cubes, measurement sets and the flat index conventions
//! shared by every operator and file format.
//!
//! Voxel `(i, j, l)` lives at `i + M*j + M*N*l`: rows move fastest, then
//! columns, then bands. Each band slice is therefore a contiguous
//! column-major `M x N` image. Measurements follow the same rule on the
//! `M x (N+L+1)` detector, stacked by shot.

use crate::error::{ensure_len, CassiError, Result};
use crate::operator::DispersionWeights;

/// Spatial and spectral extent of a cube.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct CubeDims {
    pub rows: usize,
    pub cols: usize,
    pub bands: usize,
}

impl CubeDims {
    pub fn new(rows: usize, cols: usize, bands: usize) -> Result<Self> {
        if rows == 0 || cols == 0 || bands == 0 {
            return Err(CassiError::dim(format!(
                "cube dims must be positive, got {rows}x{cols}x{bands}"
            )));
        }
        Ok(CubeDims { rows, cols, bands })
    }

    /// Number of voxels `n = M*N*L`.
    pub fn voxels(&self) -> usize {
        self.rows * self.cols * self.bands
    }

    pub fn slice_len(&self) -> usize {
        self.rows * self.cols
    }

    /// Detector width under the three-pixel dispersion model.
    pub fn fpa_cols(&self) -> usize {
        self.cols + self.bands + 1
    }

    pub fn voxel_index(&self, i: usize, j: usize, l: usize) -> usize {
        debug_assert!(i < self.rows && j < self.cols && l < self.bands);
        i + self.rows * (j + self.cols * l)
    }

    pub fn voxel_coords(&self, flat: usize) -> (usize, usize, usize) {
        debug_assert!(flat < self.voxels());
        let i = flat % self.rows;
        let rest = flat / self.rows;
        (i, rest % self.cols, rest / self.cols)
    }

    pub fn measurement_index(&self, i: usize, jp: usize, k: usize) -> usize {
        debug_assert!(i < self.rows && jp < self.fpa_cols());
        i + self.rows * (jp + self.fpa_cols() * k)
    }

    pub fn measurement_coords(&self, flat: usize) -> (usize, usize, usize) {
        let i = flat % self.rows;
        let rest = flat / self.rows;
        (i, rest % self.fpa_cols(), rest / self.fpa_cols())
    }
}

/// A spatio-spectral image cube stored in flat voxel order.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    dims: CubeDims,
    values: Vec<f64>,
    normalized: bool,
}

impl HyperCube {
    pub fn zeros(dims: CubeDims) -> Self {
        HyperCube {
            dims,
            values: vec![0.0; dims.voxels()],
            normalized: false,
        }
    }

    /// Builds a cube from flat voxel-order values. This is the devectorize
    /// direction of the index convention.
    pub fn from_vec(dims: CubeDims, values: Vec<f64>) -> Result<Self> {
        ensure_len("cube values", values.len(), dims.voxels())?;
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(CassiError::Degenerate(format!(
                "non-finite cube value at flat index {pos}"
            )));
        }
        Ok(HyperCube {
            dims,
            values,
            normalized: false,
        })
    }

    pub fn from_fn(dims: CubeDims, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut values = Vec::with_capacity(dims.voxels());
        for l in 0..dims.bands {
            for j in 0..dims.cols {
                for i in 0..dims.rows {
                    values.push(f(i, j, l));
                }
            }
        }
        Self::from_vec(dims, values)
    }

    pub fn dims(&self) -> CubeDims {
        self.dims
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, i: usize, j: usize, l: usize) -> f64 {
        self.values[self.dims.voxel_index(i, j, l)]
    }

    /// Band `l` as a column-major `M x N` slice.
    pub fn band(&self, l: usize) -> &[f64] {
        let s = self.dims.slice_len();
        &self.values[l * s..(l + 1) * s]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Marks the cube normalized after checking every value lies in `[0, 1]`.
    pub fn mark_normalized(mut self) -> Result<Self> {
        if self.values.iter().any(|&v| !(0.0..=1.0).contains(&v)) {
            return Err(CassiError::Degenerate(
                "normalized cube must lie in [0, 1]".into(),
            ));
        }
        self.normalized = true;
        Ok(self)
    }

    pub fn max_value(&self) -> f64 {
        self.values
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max)
    }
}

/// Flattens a cube into voxel order.
pub fn vectorize_cube(cube: &HyperCube) -> Vec<f64> {
    cube.values.clone()
}

pub fn devectorize_cube(v: &[f64], rows: usize, cols: usize, bands: usize) -> Result<HyperCube> {
    let dims = CubeDims::new(rows, cols, bands)?;
    HyperCube::from_vec(dims, v.to_vec())
}

/// Divides by the maximum value so the result peaks at exactly 1.
pub fn normalize_cube(cube: &HyperCube) -> Result<(HyperCube, f64)> {
    if cube.values.iter().all(|&v| v == 0.0) {
        return Err(CassiError::Degenerate(
            "cannot normalize an all-zero cube".into(),
        ));
    }
    let scale = cube.max_value();
    if scale <= 0.0 {
        return Err(CassiError::Degenerate(
            "cube has no positive values to normalize by".into(),
        ));
    }
    let values = cube.values.iter().map(|v| v / scale).collect();
    let out = HyperCube::from_vec(cube.dims, values)?.mark_normalized()?;
    Ok((out, scale))
}

/// Vectorized detector readout across all shots, with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementSet {
    pub shots: usize,
    pub dims: CubeDims,
    pub values: Vec<f64>,
    pub meta: MeasurementMeta,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeasurementMeta {
    pub weights: DispersionWeights,
    /// Seed recorded with the run that produced the measurements.
    pub seed: u64,
    /// Standard deviation of the injected noise; 0 when noiseless.
    pub sigma_noise: f64,
    pub snr_db: Option<f64>,
    pub scheme: Option<String>,
}

impl MeasurementSet {
    pub fn new(
        shots: usize,
        dims: CubeDims,
        values: Vec<f64>,
        meta: MeasurementMeta,
    ) -> Result<Self> {
        ensure_len(
            "measurement values",
            values.len(),
            shots * dims.rows * dims.fpa_cols(),
        )?;
        if values.iter().any(|v| !v.is_finite()) {
            return Err(CassiError::Degenerate("non-finite measurement".into()));
        }
        Ok(MeasurementSet {
            shots,
            dims,
            values,
            meta,
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}
