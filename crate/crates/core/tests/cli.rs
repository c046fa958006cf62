use std::path::Path;
use std::process::{Command, Output};

use cassi_core::cube::{CubeDims, HyperCube};
use cassi_core::io;
use tempfile::TempDir;

fn cassi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_cassi"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn p(path: &Path) -> &str {
    path.to_str().unwrap()
}

fn aperture(
    dir: &Path,
    name: &str,
    rows: usize,
    cols: usize,
    shots: usize,
    seed: u64,
) -> std::path::PathBuf {
    let out = dir.join(name);
    let (r, c, k, s) = (
        rows.to_string(),
        cols.to_string(),
        shots.to_string(),
        seed.to_string(),
    );
    let res = cassi(&[
        "aperture",
        "--rows",
        &r,
        "--cols",
        &c,
        "--shots",
        &k,
        "--seed",
        &s,
        "--out",
        p(&out),
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    out
}

fn phantom(dir: &Path, rows: usize, cols: usize, bands: usize) -> std::path::PathBuf {
    let out = dir.join("truth.hsc");
    let (r, c, b) = (rows.to_string(), cols.to_string(), bands.to_string());
    let res = cassi(&[
        "phantom",
        "--rows",
        &r,
        "--cols",
        &c,
        "--bands",
        &b,
        "--seed",
        "3",
        "--out",
        p(&out),
    ]);
    assert_eq!(res.status.code(), Some(0));
    out
}

#[test]
fn complementary_apertures_are_deterministic() {
    let dir = TempDir::new().unwrap();
    let a = aperture(dir.path(), "a.hsa", 16, 16, 4, 9);
    let b = aperture(dir.path(), "b.hsa", 16, 16, 4, 9);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let set = io::read_apertures(&a).unwrap();
    assert!(set.is_pairwise_complementary());
    assert_eq!(set.shots(), 4);
}

#[test]
fn odd_complementary_shots_are_rejected() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("a.hsa");
    let res = cassi(&[
        "aperture",
        "--rows",
        "8",
        "--cols",
        "8",
        "--shots",
        "3",
        "--out",
        p(&out),
    ]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

fn simulate_rate(rows: usize, cols: usize, bands: usize) -> String {
    let dir = TempDir::new().unwrap();
    let cube = dir.path().join("c.hsc");
    let dims = CubeDims::new(rows, cols, bands).unwrap();
    let c = HyperCube::from_fn(dims, |i, j, l| ((i + j + l) % 7) as f64 / 7.0).unwrap();
    io::write_cube(&cube, &c).unwrap();
    let ap = aperture(dir.path(), "a.hsa", rows, cols, 2, 1);
    let meas = dir.path().join("g.hsm");
    let res = cassi(&[
        "simulate",
        "--cube",
        p(&cube),
        "--apertures",
        p(&ap),
        "--out",
        p(&meas),
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    stdout(&res)
}

#[test]
fn simulate_reports_rates() {
    let small = simulate_rate(256, 256, 24);
    assert!(small.contains("m=143872"), "{small}");
    assert!(small.contains("rate=0.0915"), "{small}");
    assert!(small.contains("sigma_noise=0"), "{small}");
    let large = simulate_rate(512, 512, 33);
    assert!(large.contains("m=559104"), "{large}");
    assert!(large.contains("rate=0.0646"), "{large}");
}

#[test]
fn end_to_end_amp_and_eval() {
    let dir = TempDir::new().unwrap();
    let truth = phantom(dir.path(), 16, 16, 4);
    let ap = aperture(dir.path(), "a.hsa", 16, 16, 4, 2);
    let meas = dir.path().join("g.hsm");
    let res = cassi(&[
        "simulate",
        "--cube",
        p(&truth),
        "--apertures",
        p(&ap),
        "--snr",
        "20",
        "--seed",
        "5",
        "--out",
        p(&meas),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let set = io::read_measurements(&meas).unwrap();
    assert!(set.meta.sigma_noise > 0.0);

    let est = dir.path().join("est.hsc");
    let trace = dir.path().join("trace.csv");
    let res = cassi(&[
        "reconstruct",
        "--measurements",
        p(&meas),
        "--apertures",
        p(&ap),
        "--iters",
        "30",
        "--out",
        p(&est),
        "--truth",
        p(&truth),
        "--trace",
        p(&trace),
    ]);
    assert_eq!(
        res.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&res.stderr)
    );
    let csv = std::fs::read_to_string(&trace).unwrap();
    assert!(csv.starts_with("iter,sigma2,residual_norm,derivative_mean,psnr"));
    assert_eq!(csv.lines().count(), 31);

    let report = dir.path().join("psnr.csv");
    let res = cassi(&[
        "eval",
        "--truth",
        p(&truth),
        "--estimate",
        p(&est),
        "--report",
        p(&report),
    ]);
    assert_eq!(res.status.code(), Some(0));
    let rows = std::fs::read_to_string(&report).unwrap();
    assert_eq!(rows.lines().count(), 1 + 4 + 1);
    assert!(rows.lines().last().unwrap().starts_with("average,"));

    // An estimate equal to the truth is infinite PSNR in every band.
    let res = cassi(&[
        "eval",
        "--truth",
        p(&truth),
        "--estimate",
        p(&truth),
        "--report",
        p(&report),
    ]);
    assert_eq!(res.status.code(), Some(0));
    assert!(stdout(&res).contains("inf"));
    assert!(std::fs::read_to_string(&report)
        .unwrap()
        .contains("all_inf"));
}

#[test]
fn fista_needs_lambda() {
    let dir = TempDir::new().unwrap();
    let truth = phantom(dir.path(), 8, 8, 4);
    let ap = aperture(dir.path(), "a.hsa", 8, 8, 2, 2);
    let meas = dir.path().join("g.hsm");
    assert_eq!(
        cassi(&[
            "simulate",
            "--cube",
            p(&truth),
            "--apertures",
            p(&ap),
            "--out",
            p(&meas)
        ])
        .status
        .code(),
        Some(0)
    );
    let est = dir.path().join("est.hsc");
    let base = [
        "reconstruct",
        "--measurements",
        p(&meas),
        "--apertures",
        p(&ap),
        "--solver",
        "fista",
        "--out",
        p(&est),
    ];
    assert_eq!(cassi(&base).status.code(), Some(2));
    let mut with = base.to_vec();
    with.extend(["--lambda", "0.01", "--iters", "20"]);
    assert_eq!(cassi(&with).status.code(), Some(0));
    assert!(est.exists());
}

#[test]
fn missing_input_is_io_error() {
    let dir = TempDir::new().unwrap();
    let res = cassi(&[
        "export-slices",
        "--cube",
        p(&dir.path().join("nope.hsc")),
        "--outdir",
        p(dir.path()),
    ]);
    assert_eq!(res.status.code(), Some(3));
}

#[test]
fn selfcheck_runs() {
    let res = cassi(&["selfcheck"]);
    assert_eq!(res.status.code(), Some(0), "{}", stdout(&res));
    assert!(stdout(&res).contains("208"));
    let res = cassi(&["selfcheck", "--corrupt-weights"]);
    assert_ne!(res.status.code(), Some(0));
}

#[test]
fn export_writes_one_file_per_band() {
    let dir = TempDir::new().unwrap();
    let truth = phantom(dir.path(), 16, 8, 24);
    let outdir = dir.path().join("slices");
    let res = cassi(&["export-slices", "--cube", p(&truth), "--outdir", p(&outdir)]);
    assert_eq!(res.status.code(), Some(0));
    let count = std::fs::read_dir(&outdir).unwrap().count();
    assert_eq!(count, 24);
    let first = std::fs::read(outdir.join("band_00.pgm")).unwrap();
    assert!(first.starts_with(b"P5"));
}

#[test]
fn bad_arguments_exit_two() {
    assert_eq!(cassi(&["reconstruct"]).status.code(), Some(2));
    assert_eq!(cassi(&["--help"]).status.code(), Some(0));
}
