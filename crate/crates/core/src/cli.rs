//! Command-line surface of the `cassi` binary.
//!
//! Exit codes: 0 success, 2 usage or validation error, 3 I/O failure,
//! 4 solver divergence.

use std::ffi::OsString;
use std::path::PathBuf;

use clap::{Parser, Subcommand, ValueEnum};

use crate::amp::{self, AmpConfig, DEFAULT_ALPHA, DEFAULT_MAX_ITER};
use crate::cube::{MeasurementMeta, MeasurementSet};
use crate::error::{CassiError, Result};
use crate::io;
use crate::l1::{self, L1Config};
use crate::metrics::{add_noise, avg_psnr, phantom_cube, PhantomKind};
use crate::operator::{generate_apertures, ApertureScheme, CassiModel, DispersionWeights};
use crate::selfcheck::{self, SelfcheckDims};
use crate::transform::{SparsifyingTransform, Wavelet};
use crate::HyperCube;

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_IO: i32 = 3;
pub const EXIT_DIVERGED: i32 = 4;

#[derive(Debug, Parser)]
#[command(
    name = "cassi",
    version,
    about = "CASSI simulation and hyperspectral reconstruction"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SchemeArg {
    Random,
    Complementary,
}

#[derive(Debug, Clone, Copy, ValueEnum, PartialEq)]
enum SolverArg {
    Amp,
    Fista,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum WaveletArg {
    Haar,
    Db4,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum SliceFormat {
    Pgm,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
enum PhantomArg {
    GaussianBlobs,
    PiecewiseConstant,
    SpectralCosine,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate coded aperture patterns.
    Aperture {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        shots: usize,
        #[arg(long, value_enum, default_value = "complementary")]
        scheme: SchemeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Apply the CASSI forward model to a cube and optionally add noise.
    Simulate {
        #[arg(long)]
        cube: PathBuf,
        #[arg(long)]
        apertures: PathBuf,
        #[arg(long, default_value = "0.25,0.5,0.25")]
        weights: String,
        /// Target cassi-snr in dB; noiseless when omitted.
        #[arg(long)]
        snr: Option<f64>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Reconstruct a cube from measurements.
    Reconstruct {
        #[arg(long)]
        measurements: PathBuf,
        #[arg(long)]
        apertures: PathBuf,
        #[arg(long, value_enum, default_value = "amp")]
        solver: SolverArg,
        #[arg(long, default_value_t = DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = DEFAULT_MAX_ITER)]
        iters: usize,
        /// ℓ1 weight, required by the fista solver.
        #[arg(long)]
        lambda: Option<f64>,
        #[arg(long, value_enum, default_value = "haar")]
        wavelet: WaveletArg,
        #[arg(long)]
        levels: Option<usize>,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long, default_value_t = 1.0)]
        peak: f64,
    },
    /// Per-band PSNR of an estimate against ground truth.
    Eval {
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        estimate: PathBuf,
        #[arg(long, default_value_t = 1.0)]
        peak: f64,
        #[arg(long)]
        report: PathBuf,
    },
    /// Run the built-in invariant suite.
    Selfcheck {
        /// M,N,L,K
        #[arg(long, default_value = "8,8,4,2")]
        dims: String,
        #[arg(long, hide = true)]
        corrupt_weights: bool,
    },
    /// Write one 8-bit PGM per band.
    ExportSlices {
        #[arg(long)]
        cube: PathBuf,
        #[arg(long)]
        outdir: PathBuf,
        #[arg(long, value_enum, default_value = "pgm")]
        format: SliceFormat,
        #[arg(long, default_value_t = 1.0)]
        peak: f64,
    },
    /// Generate a synthetic normalized cube.
    Phantom {
        #[arg(long)]
        rows: usize,
        #[arg(long)]
        cols: usize,
        #[arg(long)]
        bands: usize,
        #[arg(long, value_enum, default_value = "gaussian-blobs")]
        kind: PhantomArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

/// Exit code for a library error.
pub fn exit_code(err: &CassiError) -> i32 {
    match err {
        CassiError::Io(_) => EXIT_IO,
        e if e.is_divergence() => EXIT_DIVERGED,
        _ => EXIT_USAGE,
    }
}

/// One-line summary printed by `simulate`.
pub fn simulate_summary(m: usize, n: usize, sigma_noise: f64) -> String {
    format!(
        "m={m} n={n} rate={:.4} sigma_noise={sigma_noise}",
        m as f64 / n as f64
    )
}

fn parse_dims(s: &str) -> Result<SelfcheckDims> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse::<usize>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| CassiError::config(format!("bad --dims {s:?}, expected M,N,L,K")))?;
    match parts[..] {
        [rows, cols, bands, shots] if parts.iter().all(|&v| v > 0) => Ok(SelfcheckDims {
            rows,
            cols,
            bands,
            shots,
        }),
        _ => Err(CassiError::config(format!(
            "bad --dims {s:?}, expected M,N,L,K"
        ))),
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn execute(command: Command) -> Result<i32> {
    match command {
        Command::Aperture {
            rows,
            cols,
            shots,
            scheme,
            seed,
            out,
        } => {
            let scheme = match scheme {
                SchemeArg::Random => ApertureScheme::Random,
                SchemeArg::Complementary => ApertureScheme::Complementary,
            };
            let set = generate_apertures(rows, cols, shots, scheme, seed)?;
            io::write_apertures(&out, &set)?;
            println!(
                "wrote {shots} {scheme} apertures of {rows}x{cols} to {}",
                out.display()
            );
            Ok(EXIT_OK)
        }
        Command::Simulate {
            cube,
            apertures,
            weights,
            snr,
            seed,
            out,
        } => {
            let cube = io::read_cube(&cube)?;
            let apertures = io::read_apertures(&apertures)?;
            let weights: DispersionWeights = weights.parse()?;
            let dims = cube.dims();
            if (apertures.rows(), apertures.cols()) != (dims.rows, dims.cols) {
                return Err(CassiError::dim(format!(
                    "apertures are {}x{} but cube is {}x{}",
                    apertures.rows(),
                    apertures.cols(),
                    dims.rows,
                    dims.cols
                )));
            }
            let shots = apertures.shots();
            let scheme = apertures
                .is_pairwise_complementary()
                .then(|| "complementary".to_string());
            let model = CassiModel::new(apertures, weights, dims.bands)?;
            let clean = model.forward(cube.values())?;
            let (values, sigma_noise) = match snr {
                Some(db) => add_noise(&clean, db, seed)?,
                None => (clean, 0.0),
            };
            let set = MeasurementSet::new(
                shots,
                dims,
                values,
                MeasurementMeta {
                    weights,
                    seed,
                    sigma_noise,
                    snr_db: snr,
                    scheme,
                },
            )?;
            io::write_measurements(&out, &set)?;
            println!("{}", simulate_summary(model.m(), model.n(), sigma_noise));
            Ok(EXIT_OK)
        }
        Command::Reconstruct {
            measurements,
            apertures,
            solver,
            alpha,
            iters,
            lambda,
            wavelet,
            levels,
            out,
            truth,
            trace,
            peak,
        } => {
            if solver == SolverArg::Fista && lambda.is_none() {
                return Err(CassiError::config("--solver fista requires --lambda"));
            }
            let set = io::read_measurements(&measurements)?;
            let apertures = io::read_apertures(&apertures)?;
            if (apertures.shots(), apertures.rows(), apertures.cols())
                != (set.shots, set.dims.rows, set.dims.cols)
            {
                return Err(CassiError::dim(
                    "aperture file does not match measurement file",
                ));
            }
            let model = CassiModel::new(apertures, set.meta.weights, set.dims.bands)?;
            let truth = truth.map(|p| io::read_cube(&p)).transpose()?;
            let wavelet = match wavelet {
                WaveletArg::Haar => Wavelet::Haar,
                WaveletArg::Db4 => Wavelet::Db4,
            };
            let estimate = match solver {
                SolverArg::Amp => {
                    let cfg = AmpConfig {
                        alpha,
                        max_iter: iters,
                        wavelet,
                        levels,
                        peak,
                    };
                    match amp::run(&set.values, &model, &cfg, truth.as_ref()) {
                        Ok(o) => {
                            if let Some(p) = &trace {
                                io::write_atomic(p, io::amp_trace_csv(&o.trace, true).as_bytes())?;
                            }
                            let last = o.trace.last().expect("at least one iteration");
                            println!(
                                "amp: {} iterations, sigma2={}, derivative_mean={}",
                                o.trace.len(),
                                last.sigma2,
                                last.derivative_mean
                            );
                            o.estimate
                        }
                        Err(CassiError::AmpDiverged {
                            iteration,
                            trace: partial,
                        }) => {
                            if let Some(p) = &trace {
                                io::write_atomic(p, io::amp_trace_csv(&partial, true).as_bytes())?;
                            }
                            return Err(CassiError::AmpDiverged {
                                iteration,
                                trace: partial,
                            });
                        }
                        Err(e) => return Err(e),
                    }
                }
                SolverArg::Fista => {
                    let transform = match levels {
                        Some(j) => SparsifyingTransform::new(model.dims(), wavelet, j)?,
                        None => SparsifyingTransform::with_default_levels(model.dims(), wavelet)?,
                    };
                    let cfg = L1Config {
                        peak,
                        ..L1Config::new(lambda.expect("checked above"), iters)
                    };
                    match l1::fista_run(&set.values, &model, &transform, &cfg, truth.as_ref()) {
                        Ok(o) => {
                            if let Some(p) = &trace {
                                io::write_atomic(p, io::l1_trace_csv(&o.trace, true).as_bytes())?;
                            }
                            println!(
                                "fista: {} iterations, objective={}",
                                o.trace.len(),
                                o.trace
                                    .records
                                    .last()
                                    .map(|r| r.objective)
                                    .unwrap_or(f64::NAN)
                            );
                            o.estimate
                        }
                        Err(CassiError::L1Diverged {
                            iteration,
                            trace: partial,
                        }) => {
                            if let Some(p) = &trace {
                                io::write_atomic(p, io::l1_trace_csv(&partial, true).as_bytes())?;
                            }
                            return Err(CassiError::L1Diverged {
                                iteration,
                                trace: partial,
                            });
                        }
                        Err(e) => return Err(e),
                    }
                }
            };
            let cube = HyperCube::from_vec(model.dims(), estimate)?;
            if let Some(t) = &truth {
                println!("average psnr: {:.4} dB", avg_psnr(t, &cube, peak)?.value);
            }
            io::write_cube(&out, &cube)?;
            Ok(EXIT_OK)
        }
        Command::Eval {
            truth,
            estimate,
            peak,
            report,
        } => {
            let truth = io::read_cube(&truth)?;
            let estimate = io::read_cube(&estimate)?;
            let psnr = avg_psnr(&truth, &estimate, peak)?;
            io::write_atomic(&report, io::psnr_report_csv(&psnr).as_bytes())?;
            if psnr.flagged() {
                eprintln!(
                    "warning: {} band(s) match exactly and are excluded from the average",
                    psnr.excluded
                );
            }
            if psnr.value.is_infinite() {
                println!("average psnr: inf");
            } else {
                println!("average psnr: {:.4} dB", psnr.value);
            }
            Ok(EXIT_OK)
        }
        Command::Selfcheck {
            dims,
            corrupt_weights,
        } => {
            let dims = parse_dims(&dims)?;
            let weights = if corrupt_weights {
                DispersionWeights::new_unchecked([0.4, 0.5, 0.4])
            } else {
                DispersionWeights::default()
            };
            let checks = selfcheck::run(dims, weights)?;
            print!("{}", selfcheck::render(&checks));
            let failed = checks.iter().filter(|c| !c.passed).count();
            if failed == 0 {
                println!("all {} checks passed", checks.len());
                Ok(EXIT_OK)
            } else {
                println!("{failed} of {} checks failed", checks.len());
                Ok(1)
            }
        }
        Command::ExportSlices {
            cube,
            outdir,
            format: SliceFormat::Pgm,
            peak,
        } => {
            if !(peak > 0.0) {
                return Err(CassiError::config("--peak must be positive"));
            }
            let cube = io::read_cube(&cube)?;
            let paths = io::export_slices(&cube, &outdir, peak)?;
            println!("wrote {} slices to {}", paths.len(), outdir.display());
            Ok(EXIT_OK)
        }
        Command::Phantom {
            rows,
            cols,
            bands,
            kind,
            seed,
            out,
        } => {
            let kind = match kind {
                PhantomArg::GaussianBlobs => PhantomKind::GaussianBlobs,
                PhantomArg::PiecewiseConstant => PhantomKind::PiecewiseConstant,
                PhantomArg::SpectralCosine => PhantomKind::SpectralCosine,
            };
            let cube = phantom_cube(rows, cols, bands, kind, seed)?;
            io::write_cube(&out, &cube)?;
            println!(
                "wrote {kind} phantom {rows}x{cols}x{bands} to {}",
                out.display()
            );
            Ok(EXIT_OK)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dims_parsing() {
        assert_eq!(parse_dims("8,8,4,2").unwrap(), SelfcheckDims::default());
        assert!(parse_dims("8,8,4").is_err());
        assert!(parse_dims("8,0,4,2").is_err());
        assert!(parse_dims("a,b,c,d").is_err());
    }

    #[test]
    fn summary_rates() {
        assert!(simulate_summary(143_872, 256 * 256 * 24, 0.0).contains("rate=0.0915"));
        assert!(simulate_summary(559_104, 512 * 512 * 33, 0.0).contains("rate=0.0646"));
    }

    #[test]
    fn error_codes() {
        assert_eq!(
            exit_code(&CassiError::Io(std::io::Error::other("x"))),
            EXIT_IO
        );
        assert_eq!(exit_code(&CassiError::config("x")), EXIT_USAGE);
        assert_eq!(
            exit_code(&CassiError::AmpDiverged {
                iteration: 3,
                trace: Box::default()
            }),
            EXIT_DIVERGED
        );
    }
}
