//! C ABI over `cassi-core`.
//!
//! Models are opaque heap handles created by `cassi_model_new` or
//! `cassi_model_from_masks` and released with `cassi_model_free`. Every
//! fallible call returns a [`CassiStatus`]; the message of the most recent
//! failure on the calling thread is available from `cassi_last_error`.
//! Buffers are caller-owned and passed with explicit lengths.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::ptr;
use std::slice;

use cassi_core::amp::{self, AmpConfig};
use cassi_core::l1::{self, L1Config};
use cassi_core::metrics;
use cassi_core::{
    generate_apertures, measurement_count, ApertureScheme, CassiError, CodedApertureSet, CubeDims,
    DispersionWeights, SparsifyingTransform, Wavelet,
};

/// Status codes. Values 2, 3 and 4 match the `cassi` CLI exit codes.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CassiStatus {
    Ok = 0,
    NullPointer = 1,
    InvalidArgument = 2,
    Io = 3,
    Diverged = 4,
    DimensionMismatch = 5,
    Panic = 99,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CassiScheme {
    Random = 0,
    Complementary = 1,
}

#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CassiWavelet {
    Haar = 0,
    Db4 = 1,
}

/// Opaque sensing model.
pub struct CassiModel {
    inner: cassi_core::CassiModel,
}

thread_local! {
    static LAST_ERROR: RefCell<Option<CString>> = const { RefCell::new(None) };
}

fn set_error(msg: impl Into<String>) {
    let msg = CString::new(msg.into().replace('\0', " ")).expect("interior nul removed");
    LAST_ERROR.with(|e| *e.borrow_mut() = Some(msg));
}

fn status_of(err: &CassiError) -> CassiStatus {
    match err {
        CassiError::Io(_) => CassiStatus::Io,
        CassiError::Dimension(_) => CassiStatus::DimensionMismatch,
        e if e.is_divergence() => CassiStatus::Diverged,
        _ => CassiStatus::InvalidArgument,
    }
}

fn guard(f: impl FnOnce() -> Result<(), CassiStatus>) -> CassiStatus {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(Ok(())) => CassiStatus::Ok,
        Ok(Err(status)) => status,
        Err(_) => {
            set_error("internal panic");
            CassiStatus::Panic
        }
    }
}

fn fail(err: CassiError) -> CassiStatus {
    set_error(err.to_string());
    status_of(&err)
}

fn null(name: &str) -> CassiStatus {
    set_error(format!("{name} is null"));
    CassiStatus::NullPointer
}

fn dim_mismatch(name: &str, got: usize, want: usize) -> CassiStatus {
    set_error(format!("{name} has length {got}, expected {want}"));
    CassiStatus::DimensionMismatch
}

unsafe fn input<'a>(p: *const f64, len: usize, name: &str) -> Result<&'a [f64], CassiStatus> {
    if p.is_null() {
        return Err(null(name));
    }
    Ok(unsafe { slice::from_raw_parts(p, len) })
}

unsafe fn output<'a>(p: *mut f64, len: usize, name: &str) -> Result<&'a mut [f64], CassiStatus> {
    if p.is_null() {
        return Err(null(name));
    }
    Ok(unsafe { slice::from_raw_parts_mut(p, len) })
}

unsafe fn model_ref<'a>(
    model: *const CassiModel,
) -> Result<&'a cassi_core::CassiModel, CassiStatus> {
    if model.is_null() {
        return Err(null("model"));
    }
    Ok(unsafe { &(*model).inner })
}

unsafe fn weights_from(w: *const f64) -> Result<DispersionWeights, CassiStatus> {
    if w.is_null() {
        return Ok(DispersionWeights::default());
    }
    let w = unsafe { slice::from_raw_parts(w, 3) };
    DispersionWeights::new([w[0], w[1], w[2]]).map_err(fail)
}

fn levels_from(levels: i32) -> Option<usize> {
    (levels >= 0).then_some(levels as usize)
}

fn wavelet_from(w: CassiWavelet) -> Wavelet {
    match w {
        CassiWavelet::Haar => Wavelet::Haar,
        CassiWavelet::Db4 => Wavelet::Db4,
    }
}

fn publish(model: cassi_core::CassiModel, out: *mut *mut CassiModel) {
    let handle = Box::new(CassiModel { inner: model });
    // SAFETY: callers check `out` for null before building the model.
    unsafe { *out = Box::into_raw(handle) };
}

/// Message describing the last failed call on this thread, or NULL.
/// The pointer stays valid until the next failing call on the same thread.
#[no_mangle]
pub extern "C" fn cassi_last_error() -> *const c_char {
    LAST_ERROR.with(|e| e.borrow().as_ref().map_or(ptr::null(), |s| s.as_ptr()))
}

/// `K * M * (N + L + 1)`.
#[no_mangle]
pub extern "C" fn cassi_measurement_count(
    rows: usize,
    cols: usize,
    bands: usize,
    shots: usize,
) -> usize {
    measurement_count(rows, cols, bands, shots)
}

/// Creates a model with generated apertures.
///
/// `weights` points to three dispersion weights, or is NULL for the default
/// `(0.25, 0.5, 0.25)`.
///
/// # Safety
/// `weights` must be NULL or point to 3 readable doubles; `out` must be a
/// valid pointer to write the handle to.
#[no_mangle]
pub unsafe extern "C" fn cassi_model_new(
    rows: usize,
    cols: usize,
    bands: usize,
    shots: usize,
    scheme: CassiScheme,
    seed: u64,
    weights: *const f64,
    out: *mut *mut CassiModel,
) -> CassiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let weights = unsafe { weights_from(weights)? };
        let scheme = match scheme {
            CassiScheme::Random => ApertureScheme::Random,
            CassiScheme::Complementary => ApertureScheme::Complementary,
        };
        let apertures = generate_apertures(rows, cols, shots, scheme, seed).map_err(fail)?;
        let model = cassi_core::CassiModel::new(apertures, weights, bands).map_err(fail)?;
        publish(model, out);
        Ok(())
    })
}

/// Creates a model from caller-supplied binary masks laid out `i + M*j + M*N*k`.
///
/// # Safety
/// `masks` must point to `shots * rows * cols` readable bytes; `weights` as in
/// `cassi_model_new`; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_model_from_masks(
    rows: usize,
    cols: usize,
    bands: usize,
    shots: usize,
    masks: *const u8,
    weights: *const f64,
    out: *mut *mut CassiModel,
) -> CassiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        if masks.is_null() {
            return Err(null("masks"));
        }
        let weights = unsafe { weights_from(weights)? };
        let bytes = unsafe { slice::from_raw_parts(masks, shots * rows * cols) }.to_vec();
        let apertures = CodedApertureSet::from_masks(shots, rows, cols, bytes).map_err(fail)?;
        let model = cassi_core::CassiModel::new(apertures, weights, bands).map_err(fail)?;
        publish(model, out);
        Ok(())
    })
}

/// Releases a model. NULL is ignored.
///
/// # Safety
/// `model` must come from this library and not have been freed already.
#[no_mangle]
pub unsafe extern "C" fn cassi_model_free(model: *mut CassiModel) {
    if !model.is_null() {
        drop(unsafe { Box::from_raw(model) });
    }
}

/// Signal length `n = M*N*L`, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cassi_model_signal_len(model: *const CassiModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.inner.n())
}

/// Measurement length `m`, or 0 for a NULL handle.
///
/// # Safety
/// `model` must be NULL or a live handle.
#[no_mangle]
pub unsafe extern "C" fn cassi_model_measurement_len(model: *const CassiModel) -> usize {
    unsafe { model.as_ref() }.map_or(0, |m| m.inner.m())
}

/// `g = H f`.
///
/// # Safety
/// `f` must hold `f_len` doubles and `g` must have room for `g_len`.
#[no_mangle]
pub unsafe extern "C" fn cassi_forward(
    model: *const CassiModel,
    f: *const f64,
    f_len: usize,
    g: *mut f64,
    g_len: usize,
) -> CassiStatus {
    guard(|| {
        let model = unsafe { model_ref(model)? };
        let f = unsafe { input(f, f_len, "f")? };
        let g = unsafe { output(g, g_len, "g")? };
        if g_len != model.m() {
            return Err(dim_mismatch("g", g_len, model.m()));
        }
        g.copy_from_slice(&model.forward(f).map_err(fail)?);
        Ok(())
    })
}

/// `f = Hᵀ g`.
///
/// # Safety
/// `g` must hold `g_len` doubles and `f` must have room for `f_len`.
#[no_mangle]
pub unsafe extern "C" fn cassi_adjoint(
    model: *const CassiModel,
    g: *const f64,
    g_len: usize,
    f: *mut f64,
    f_len: usize,
) -> CassiStatus {
    guard(|| {
        let model = unsafe { model_ref(model)? };
        let g = unsafe { input(g, g_len, "g")? };
        let f = unsafe { output(f, f_len, "f")? };
        if f_len != model.n() {
            return Err(dim_mismatch("f", f_len, model.n()));
        }
        f.copy_from_slice(&model.adjoint(g).map_err(fail)?);
        Ok(())
    })
}

/// Damped AMP reconstruction. `levels < 0` selects the default depth.
/// On divergence `iterations_done` (if not NULL) receives the failing iteration.
///
/// # Safety
/// Buffers must match their lengths; `iterations_done` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn cassi_amp_reconstruct(
    model: *const CassiModel,
    g: *const f64,
    g_len: usize,
    alpha: f64,
    max_iter: usize,
    wavelet: CassiWavelet,
    levels: i32,
    f_out: *mut f64,
    f_len: usize,
    iterations_done: *mut usize,
) -> CassiStatus {
    guard(|| {
        let model = unsafe { model_ref(model)? };
        let g = unsafe { input(g, g_len, "g")? };
        let f_out = unsafe { output(f_out, f_len, "f_out")? };
        if f_len != model.n() {
            return Err(dim_mismatch("f_out", f_len, model.n()));
        }
        let cfg = AmpConfig {
            alpha,
            max_iter,
            wavelet: wavelet_from(wavelet),
            levels: levels_from(levels),
            ..AmpConfig::default()
        };
        match amp::run(g, model, &cfg, None) {
            Ok(out) => {
                f_out.copy_from_slice(&out.estimate);
                if !iterations_done.is_null() {
                    unsafe { *iterations_done = out.trace.len() };
                }
                Ok(())
            }
            Err(e) => {
                if let (CassiError::AmpDiverged { iteration, .. }, false) =
                    (&e, iterations_done.is_null())
                {
                    unsafe { *iterations_done = *iteration };
                }
                Err(fail(e))
            }
        }
    })
}

/// ℓ1-regularized least squares by monotone FISTA.
///
/// # Safety
/// Buffers must match their lengths.
#[no_mangle]
pub unsafe extern "C" fn cassi_fista_reconstruct(
    model: *const CassiModel,
    g: *const f64,
    g_len: usize,
    lambda: f64,
    iterations: usize,
    wavelet: CassiWavelet,
    levels: i32,
    f_out: *mut f64,
    f_len: usize,
) -> CassiStatus {
    guard(|| {
        let model = unsafe { model_ref(model)? };
        let g = unsafe { input(g, g_len, "g")? };
        let f_out = unsafe { output(f_out, f_len, "f_out")? };
        if f_len != model.n() {
            return Err(dim_mismatch("f_out", f_len, model.n()));
        }
        let wavelet = wavelet_from(wavelet);
        let transform = match levels_from(levels) {
            Some(j) => SparsifyingTransform::new(model.dims(), wavelet, j),
            None => SparsifyingTransform::with_default_levels(model.dims(), wavelet),
        }
        .map_err(fail)?;
        let out = l1::fista_run(
            g,
            model,
            &transform,
            &L1Config::new(lambda, iterations),
            None,
        )
        .map_err(fail)?;
        f_out.copy_from_slice(&out.estimate);
        Ok(())
    })
}

/// Adds seeded Gaussian noise at the requested cassi-snr (dB).
///
/// # Safety
/// `clean` and `noisy` must each hold `len` doubles; `sigma_out` may be NULL.
#[no_mangle]
pub unsafe extern "C" fn cassi_add_noise(
    clean: *const f64,
    len: usize,
    snr_db: f64,
    seed: u64,
    noisy: *mut f64,
    sigma_out: *mut f64,
) -> CassiStatus {
    guard(|| {
        let clean = unsafe { input(clean, len, "clean")? };
        let noisy = unsafe { output(noisy, len, "noisy")? };
        let (values, sigma) = metrics::add_noise(clean, snr_db, seed).map_err(fail)?;
        noisy.copy_from_slice(&values);
        if !sigma_out.is_null() {
            unsafe { *sigma_out = sigma };
        }
        Ok(())
    })
}

/// Band-averaged PSNR of `estimate` against `reference`; infinite bands are
/// skipped and the result is `+inf` only if every band matches exactly.
///
/// # Safety
/// Both cubes must hold `rows * cols * bands` doubles; `out` must be writable.
#[no_mangle]
pub unsafe extern "C" fn cassi_avg_psnr(
    reference: *const f64,
    estimate: *const f64,
    rows: usize,
    cols: usize,
    bands: usize,
    peak: f64,
    out: *mut f64,
) -> CassiStatus {
    guard(|| {
        if out.is_null() {
            return Err(null("out"));
        }
        let dims = CubeDims::new(rows, cols, bands).map_err(fail)?;
        let reference = unsafe { input(reference, dims.voxels(), "reference")? };
        let estimate = unsafe { input(estimate, dims.voxels(), "estimate")? };
        let psnr = metrics::avg_psnr_values(reference, estimate, dims, peak).map_err(fail)?;
        unsafe { *out = psnr.value };
        Ok(())
    })
}
