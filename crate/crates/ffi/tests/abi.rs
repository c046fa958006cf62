use std::ffi::CStr;
use std::ptr;

use cassi_ffi::*;

fn last_error() -> String {
    unsafe { CStr::from_ptr(cassi_last_error()) }
        .to_string_lossy()
        .into_owned()
}

fn new_model(rows: usize, cols: usize, bands: usize, shots: usize) -> *mut CassiModel {
    let mut model = ptr::null_mut();
    let status = unsafe {
        cassi_model_new(
            rows,
            cols,
            bands,
            shots,
            CassiScheme::Complementary,
            4,
            ptr::null(),
            &mut model,
        )
    };
    assert_eq!(status, CassiStatus::Ok);
    assert!(!model.is_null());
    model
}

#[test]
fn counts_and_lengths() {
    assert_eq!(cassi_measurement_count(8, 8, 4, 1), 104);
    assert_eq!(cassi_measurement_count(256, 256, 24, 2), 143_872);
    let model = new_model(8, 8, 4, 2);
    unsafe {
        assert_eq!(cassi_model_signal_len(model), 256);
        assert_eq!(cassi_model_measurement_len(model), 208);
        cassi_model_free(model);
    }
}

#[test]
fn forward_adjoint_pair() {
    let model = new_model(8, 8, 4, 2);
    let f: Vec<f64> = (0..256).map(|i| ((i * 37) % 11) as f64 / 11.0).collect();
    let y: Vec<f64> = (0..208).map(|i| ((i * 13) % 7) as f64 - 3.0).collect();
    let mut hf = vec![0.0; 208];
    let mut hty = vec![0.0; 256];
    unsafe {
        assert_eq!(
            cassi_forward(model, f.as_ptr(), f.len(), hf.as_mut_ptr(), hf.len()),
            CassiStatus::Ok
        );
        assert_eq!(
            cassi_adjoint(model, y.as_ptr(), y.len(), hty.as_mut_ptr(), hty.len()),
            CassiStatus::Ok
        );
        cassi_model_free(model);
    }
    let lhs: f64 = hf.iter().zip(&y).map(|(a, b)| a * b).sum();
    let rhs: f64 = f.iter().zip(&hty).map(|(a, b)| a * b).sum();
    assert!((lhs - rhs).abs() < 1e-10 * lhs.abs().max(1.0));
}

#[test]
fn null_and_size_errors() {
    let mut sink = [0.0; 4];
    unsafe {
        let status = cassi_forward(ptr::null(), sink.as_ptr(), 4, sink.as_mut_ptr(), 4);
        assert_eq!(status, CassiStatus::NullPointer);
        assert!(last_error().contains("model"));

        let status = cassi_model_new(
            8,
            8,
            4,
            2,
            CassiScheme::Random,
            0,
            ptr::null(),
            ptr::null_mut(),
        );
        assert_eq!(status, CassiStatus::NullPointer);

        let model = new_model(8, 8, 4, 2);
        let status = cassi_forward(model, sink.as_ptr(), 4, sink.as_mut_ptr(), 4);
        assert_eq!(status, CassiStatus::DimensionMismatch);
        cassi_model_free(model);
        cassi_model_free(ptr::null_mut());
    }
}

#[test]
fn invalid_arguments() {
    let mut model = ptr::null_mut();
    let bad = [0.4, 0.5, 0.4];
    unsafe {
        let status = cassi_model_new(
            8,
            8,
            4,
            3,
            CassiScheme::Complementary,
            0,
            ptr::null(),
            &mut model,
        );
        assert_eq!(status, CassiStatus::InvalidArgument);
        assert!(model.is_null());
        let status = cassi_model_new(8, 8, 4, 2, CassiScheme::Random, 0, bad.as_ptr(), &mut model);
        assert_eq!(status, CassiStatus::InvalidArgument);
        assert!(!last_error().is_empty());

        let masks = [2u8; 64];
        let status = cassi_model_from_masks(8, 8, 4, 1, masks.as_ptr(), ptr::null(), &mut model);
        assert_eq!(status, CassiStatus::InvalidArgument);
    }
}

#[test]
fn reconstructions_run() {
    let (rows, cols, bands) = (16, 16, 4);
    let model = new_model(rows, cols, bands, 4);
    let n = rows * cols * bands;
    let truth: Vec<f64> = (0..n)
        .map(|v| {
            let (i, j) = ((v % rows) as f64, ((v / rows) % cols) as f64);
            (-((i - 8.0).powi(2) + (j - 7.0).powi(2)) / 20.0).exp()
        })
        .collect();
    unsafe {
        let m = cassi_model_measurement_len(model);
        let mut clean = vec![0.0; m];
        assert_eq!(
            cassi_forward(model, truth.as_ptr(), n, clean.as_mut_ptr(), m),
            CassiStatus::Ok
        );
        let mut g = vec![0.0; m];
        let mut sigma = 0.0;
        assert_eq!(
            cassi_add_noise(clean.as_ptr(), m, 25.0, 1, g.as_mut_ptr(), &mut sigma),
            CassiStatus::Ok
        );
        assert!(sigma > 0.0);

        let mut est = vec![0.0; n];
        let mut done = 0usize;
        let status = cassi_amp_reconstruct(
            model,
            g.as_ptr(),
            m,
            0.2,
            40,
            CassiWavelet::Haar,
            -1,
            est.as_mut_ptr(),
            n,
            &mut done,
        );
        assert_eq!(status, CassiStatus::Ok);
        assert_eq!(done, 40);
        let mut amp_psnr = 0.0;
        let status = cassi_avg_psnr(
            truth.as_ptr(),
            est.as_ptr(),
            rows,
            cols,
            bands,
            1.0,
            &mut amp_psnr,
        );
        assert_eq!(status, CassiStatus::Ok);
        assert!(amp_psnr > 15.0, "{amp_psnr}");

        let status = cassi_fista_reconstruct(
            model,
            g.as_ptr(),
            m,
            1e-3,
            30,
            CassiWavelet::Db4,
            1,
            est.as_mut_ptr(),
            n,
        );
        assert_eq!(status, CassiStatus::Ok);
        let status = cassi_amp_reconstruct(
            model,
            g.as_ptr(),
            m,
            1.5,
            10,
            CassiWavelet::Haar,
            -1,
            est.as_mut_ptr(),
            n,
            ptr::null_mut(),
        );
        assert_eq!(status, CassiStatus::InvalidArgument);

        let mut same = 0.0;
        cassi_avg_psnr(
            truth.as_ptr(),
            truth.as_ptr(),
            rows,
            cols,
            bands,
            1.0,
            &mut same,
        );
        assert!(same.is_infinite());
        cassi_model_free(model);
    }
}

#[test]
fn header_declares_api() {
    let header =
        std::fs::read_to_string(concat!(env!("CARGO_MANIFEST_DIR"), "/include/cassi.h")).unwrap();
    for name in [
        "cassi_model_new",
        "cassi_model_free",
        "cassi_forward",
        "cassi_adjoint",
        "cassi_amp_reconstruct",
        "cassi_fista_reconstruct",
        "cassi_last_error",
        "CASSI_STATUS_DIMENSION_MISMATCH",
        "typedef struct CassiModel CassiModel",
    ] {
        assert!(header.contains(name), "header lacks {name}");
    }
}
