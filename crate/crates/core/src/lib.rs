//! Coded aperture snapshot spectral imaging (CASSI): forward simulation,
//! damped AMP reconstruction with an adaptive subband Wiener denoiser, an
//! ℓ1 proximal-gradient baseline, and evaluation tools.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod amp;
pub mod cli;
pub mod cube;
pub mod error;
pub mod io;
pub mod l1;
pub mod metrics;
pub mod operator;
pub mod selfcheck;
pub mod transform;
pub mod wiener;

pub use amp::{AmpConfig, AmpOutput, AmpState, AmpTrace};
pub use cube::{CubeDims, HyperCube, MeasurementMeta, MeasurementSet};
pub use error::{CassiError, Result};
pub use l1::{L1Config, L1Output, L1Trace};
pub use operator::{
    generate_apertures, measurement_count, ApertureScheme, CassiModel, CodedApertureSet,
    DispersionWeights,
};
pub use transform::{SparsifyingTransform, SubbandMap, Wavelet};
