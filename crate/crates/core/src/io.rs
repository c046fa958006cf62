//! Binary cube, measurement and aperture files, PGM band export and CSV
//! reports. All integers and floats are little-endian; payloads follow the
//! flat index conventions of [`crate::cube`].
//!
//! ```text
//! HSC1  u32 M, N, L                         f32 * M*N*L
//! HSM1  u32 K, M, N, L  f64 w0, w1, w2  u64 seed  f64 sigma   f32 * K*M*(N+L+1)
//! HSA1  u32 K, M, N                         u8 * K*M*N   (0 or 1)
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::amp::AmpTrace;
use crate::cube::{CubeDims, HyperCube, MeasurementMeta, MeasurementSet};
use crate::error::{CassiError, Result};
use crate::l1::L1Trace;
use crate::metrics::AvgPsnr;
use crate::operator::{CodedApertureSet, DispersionWeights};

pub const CUBE_MAGIC: &[u8; 4] = b"HSC1";
pub const MEASUREMENT_MAGIC: &[u8; 4] = b"HSM1";
pub const APERTURE_MAGIC: &[u8; 4] = b"HSA1";

const MEASUREMENT_HEADER: usize = 4 + 4 * 4 + 3 * 8 + 8 + 8;

/// Writes through a sibling temp file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    let name = path
        .file_name()
        .ok_or_else(|| CassiError::config(format!("{} is not a file path", path.display())))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".tmp{}", std::process::id()));
    let tmp = dir.join(tmp_name);
    {
        let mut file = fs::File::create(&tmp)?;
        file.write_all(bytes)?;
        file.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })?;
    Ok(())
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    what: &'static str,
}

impl<'a> Reader<'a> {
    fn new(bytes: &'a [u8], magic: &[u8; 4], what: &'static str) -> Result<Self> {
        if bytes.len() < 4 || &bytes[..4] != magic {
            return Err(CassiError::Format(format!(
                "{what}: missing {} magic",
                String::from_utf8_lossy(magic)
            )));
        }
        Ok(Reader {
            bytes,
            pos: 4,
            what,
        })
    }

    fn take<const N: usize>(&mut self) -> Result<[u8; N]> {
        let end = self.pos + N;
        let slice = self
            .bytes
            .get(self.pos..end)
            .ok_or_else(|| CassiError::Format(format!("{}: truncated header", self.what)))?;
        self.pos = end;
        Ok(slice.try_into().expect("slice has length N"))
    }

    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take()?) as usize)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take()?))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take()?))
    }

    fn payload(&self, expected: usize) -> Result<&'a [u8]> {
        let rest = &self.bytes[self.pos..];
        if rest.len() != expected {
            return Err(CassiError::Format(format!(
                "{}: payload is {} bytes, header declares {expected}",
                self.what,
                rest.len()
            )));
        }
        Ok(rest)
    }
}

fn push_u32(out: &mut Vec<u8>, v: usize, what: &str) -> Result<()> {
    let v = u32::try_from(v).map_err(|_| CassiError::Format(format!("{what} {v} exceeds u32")))?;
    out.extend_from_slice(&v.to_le_bytes());
    Ok(())
}

fn push_f32s(out: &mut Vec<u8>, values: &[f64]) {
    out.reserve(values.len() * 4);
    for &v in values {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
}

fn read_f32s(bytes: &[u8]) -> Vec<f64> {
    bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]) as f64)
        .collect()
}

pub fn encode_cube(cube: &HyperCube) -> Result<Vec<u8>> {
    let d = cube.dims();
    let mut out = Vec::with_capacity(16 + 4 * d.voxels());
    out.extend_from_slice(CUBE_MAGIC);
    push_u32(&mut out, d.rows, "rows")?;
    push_u32(&mut out, d.cols, "cols")?;
    push_u32(&mut out, d.bands, "bands")?;
    push_f32s(&mut out, cube.values());
    Ok(out)
}

pub fn decode_cube(bytes: &[u8]) -> Result<HyperCube> {
    let mut r = Reader::new(bytes, CUBE_MAGIC, "cube file")?;
    let dims = CubeDims::new(r.u32()?, r.u32()?, r.u32()?)?;
    let payload = r.payload(4 * dims.voxels())?;
    HyperCube::from_vec(dims, read_f32s(payload))
}

pub fn encode_measurements(set: &MeasurementSet) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(MEASUREMENT_HEADER + 4 * set.len());
    out.extend_from_slice(MEASUREMENT_MAGIC);
    push_u32(&mut out, set.shots, "shots")?;
    push_u32(&mut out, set.dims.rows, "rows")?;
    push_u32(&mut out, set.dims.cols, "cols")?;
    push_u32(&mut out, set.dims.bands, "bands")?;
    for w in set.meta.weights.as_array() {
        out.extend_from_slice(&w.to_le_bytes());
    }
    out.extend_from_slice(&set.meta.seed.to_le_bytes());
    out.extend_from_slice(&set.meta.sigma_noise.to_le_bytes());
    push_f32s(&mut out, &set.values);
    Ok(out)
}

pub fn decode_measurements(bytes: &[u8]) -> Result<MeasurementSet> {
    let mut r = Reader::new(bytes, MEASUREMENT_MAGIC, "measurement file")?;
    let shots = r.u32()?;
    let dims = CubeDims::new(r.u32()?, r.u32()?, r.u32()?)?;
    if shots == 0 {
        return Err(CassiError::Format("measurement file: zero shots".into()));
    }
    let w = [r.f64()?, r.f64()?, r.f64()?];
    let sum: f64 = w.iter().sum();
    if (sum - 1.0).abs() > 1e-9 {
        return Err(CassiError::Format(format!(
            "measurement file: weights sum to {sum}"
        )));
    }
    let weights = DispersionWeights::new_unchecked(w);
    let seed = r.u64()?;
    let sigma_noise = r.f64()?;
    let payload = r.payload(4 * shots * dims.rows * dims.fpa_cols())?;
    MeasurementSet::new(
        shots,
        dims,
        read_f32s(payload),
        MeasurementMeta {
            weights,
            seed,
            sigma_noise,
            snr_db: None,
            scheme: None,
        },
    )
}

pub fn encode_apertures(set: &CodedApertureSet) -> Result<Vec<u8>> {
    let mut out = Vec::with_capacity(16 + set.as_bytes().len());
    out.extend_from_slice(APERTURE_MAGIC);
    push_u32(&mut out, set.shots(), "shots")?;
    push_u32(&mut out, set.rows(), "rows")?;
    push_u32(&mut out, set.cols(), "cols")?;
    out.extend_from_slice(set.as_bytes());
    Ok(out)
}

pub fn decode_apertures(bytes: &[u8]) -> Result<CodedApertureSet> {
    let mut r = Reader::new(bytes, APERTURE_MAGIC, "aperture file")?;
    let (k, m, n) = (r.u32()?, r.u32()?, r.u32()?);
    let payload = r.payload(k * m * n)?;
    CodedApertureSet::from_masks(k, m, n, payload.to_vec())
}

pub fn write_cube(path: &Path, cube: &HyperCube) -> Result<()> {
    write_atomic(path, &encode_cube(cube)?)
}

pub fn read_cube(path: &Path) -> Result<HyperCube> {
    decode_cube(&fs::read(path)?)
}

pub fn write_measurements(path: &Path, set: &MeasurementSet) -> Result<()> {
    write_atomic(path, &encode_measurements(set)?)
}

pub fn read_measurements(path: &Path) -> Result<MeasurementSet> {
    decode_measurements(&fs::read(path)?)
}

pub fn write_apertures(path: &Path, set: &CodedApertureSet) -> Result<()> {
    write_atomic(path, &encode_apertures(set)?)
}

pub fn read_apertures(path: &Path) -> Result<CodedApertureSet> {
    decode_apertures(&fs::read(path)?)
}

/// 8-bit binary PGM of one band, `value / peak` mapped linearly onto 0..=255.
pub fn encode_pgm(band: &[f64], rows: usize, cols: usize, peak: f64) -> Vec<u8> {
    let mut out = format!("P5\n{cols} {rows}\n255\n").into_bytes();
    // PGM is row-major; bands are column-major.
    for i in 0..rows {
        for j in 0..cols {
            let v = (band[i + rows * j] / peak).clamp(0.0, 1.0);
            out.push((v * 255.0).round() as u8);
        }
    }
    out
}

/// Parses a P5 PGM back into a column-major slice scaled by `peak`.
pub fn decode_pgm(bytes: &[u8], peak: f64) -> Result<(usize, usize, Vec<f64>)> {
    let mut fields = Vec::with_capacity(4);
    let mut pos = 0;
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(CassiError::Format("PGM: truncated header".into()));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    if fields[0] != "P5" || fields[3] != "255" {
        return Err(CassiError::Format(
            "PGM: expected P5 with maxval 255".into(),
        ));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| CassiError::Format(format!("PGM: bad size {s:?}")))
    };
    let (cols, rows) = (parse(&fields[1])?, parse(&fields[2])?);
    let pixels = bytes
        .get(pos..pos + rows * cols)
        .ok_or_else(|| CassiError::Format("PGM: truncated pixels".into()))?;
    let mut band = vec![0.0; rows * cols];
    for i in 0..rows {
        for j in 0..cols {
            band[i + rows * j] = pixels[i * cols + j] as f64 / 255.0 * peak;
        }
    }
    Ok((rows, cols, band))
}

/// Writes `band_XX.pgm` for every band, returning the paths in band order.
pub fn export_slices(cube: &HyperCube, dir: &Path, peak: f64) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(dir)?;
    let d = cube.dims();
    let width = d.bands.saturating_sub(1).to_string().len().max(2);
    (0..d.bands)
        .map(|l| {
            let path = dir.join(format!("band_{l:0width$}.pgm"));
            write_atomic(&path, &encode_pgm(cube.band(l), d.rows, d.cols, peak))?;
            Ok(path)
        })
        .collect()
}

fn fmt_num(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 {
            "inf".into()
        } else {
            "-inf".into()
        }
    } else {
        format!("{v}")
    }
}

fn opt_num(v: Option<f64>) -> String {
    v.map(fmt_num).unwrap_or_default()
}

pub fn amp_trace_csv(trace: &AmpTrace, include_wall: bool) -> String {
    let mut out = String::from("iter,sigma2,residual_norm,derivative_mean,psnr,wall_ms\n");
    for r in &trace.records {
        let wall = if include_wall {
            fmt_num(r.wall_ms)
        } else {
            String::new()
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.iter,
            fmt_num(r.sigma2),
            fmt_num(r.residual_norm),
            fmt_num(r.derivative_mean),
            opt_num(r.psnr),
            wall
        ));
    }
    out
}

pub fn l1_trace_csv(trace: &L1Trace, include_wall: bool) -> String {
    let mut out = String::from("iter,objective,residual_norm,restarted,psnr,wall_ms\n");
    for r in &trace.records {
        let wall = if include_wall {
            fmt_num(r.wall_ms)
        } else {
            String::new()
        };
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.iter,
            fmt_num(r.objective),
            fmt_num(r.residual_norm),
            r.restarted as u8,
            opt_num(r.psnr),
            wall
        ));
    }
    out
}

/// Per-band PSNR rows followed by an `average` row.
pub fn psnr_report_csv(psnr: &AvgPsnr) -> String {
    let mut out = String::from("band,psnr_db,flag\n");
    for (l, p) in psnr.per_band.iter().enumerate() {
        let flag = if p.is_finite() { "ok" } else { "inf_excluded" };
        out.push_str(&format!("{l},{},{flag}\n", fmt_num(*p)));
    }
    let flag = if psnr.excluded == psnr.per_band.len() {
        "all_inf"
    } else if psnr.flagged() {
        "inf_excluded"
    } else {
        "ok"
    };
    out.push_str(&format!("average,{},{flag}\n", fmt_num(psnr.value)));
    out
}
