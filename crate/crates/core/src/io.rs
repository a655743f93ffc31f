//! File formats: MEF image stacks, mask JSON, k-space blobs, PGM export and
//! run records.
//!
//! Images and k-space are stored as little-endian `f32`. Saving rounds each
//! value to the nearest `f32`; values already representable in `f32` (for
//! instance anything produced by [`quantize_f32`] or loaded from disk)
//! roundtrip bit-exactly.

use std::fs;
use std::path::{Path, PathBuf};

use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::RunRecord;
use crate::model::{KSpaceData, MultiEchoImage, SamplingMask};

pub const MEF_VERSION: u32 = 1;
const MEF_LAYOUT: &str = "echo-major, then row-major";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct MefHeader {
    mef_version: u32,
    height: usize,
    width: usize,
    echoes: usize,
    dtype: String,
    endian: String,
    layout: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct MaskFile {
    height: usize,
    width: usize,
    echoes: usize,
    lines: Vec<Vec<usize>>,
}

/// Header and blob paths of an MEF pair. `path` may name either file or the
/// shared stem.
pub fn mef_paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("json"), path.with_extension("bin"))
}

/// Rounds every value to the nearest `f32`, i.e. exactly what [`save_mef`]
/// stores.
pub fn quantize_f32(image: &MultiEchoImage) -> MultiEchoImage {
    let data = image.data().iter().map(|&v| v as f32 as f64).collect();
    MultiEchoImage::new(image.height(), image.width(), image.echoes(), data).expect("same shape")
}

pub fn save_mef(path: &Path, image: &MultiEchoImage) -> Result<()> {
    let (header_path, blob_path) = mef_paths(path);
    let header = MefHeader {
        mef_version: MEF_VERSION,
        height: image.height(),
        width: image.width(),
        echoes: image.echoes(),
        dtype: "f32".into(),
        endian: "little".into(),
        layout: MEF_LAYOUT.into(),
    };
    write_json(&header_path, &header)?;
    let mut blob = Vec::with_capacity(image.data().len() * 4);
    for &v in image.data() {
        blob.extend_from_slice(&(v as f32).to_le_bytes());
    }
    write_bytes(&blob_path, &blob)
}

pub fn load_mef(path: &Path) -> Result<MultiEchoImage> {
    let (header_path, blob_path) = mef_paths(path);
    let header: MefHeader = read_json(&header_path)?;
    if header.mef_version != MEF_VERSION {
        return Err(Error::format(
            &header_path,
            format!("unsupported mef_version {}", header.mef_version),
        ));
    }
    if header.dtype != "f32" || header.endian != "little" || header.layout != MEF_LAYOUT {
        return Err(Error::format(
            &header_path,
            format!(
                "unsupported encoding dtype={:?} endian={:?} layout={:?}",
                header.dtype, header.endian, header.layout
            ),
        ));
    }
    let n = header.height * header.width * header.echoes;
    let blob = read_bytes(&blob_path)?;
    let data = decode_f32(&blob, n, &blob_path)?;
    MultiEchoImage::new(header.height, header.width, header.echoes, data)
        .map_err(|e| Error::format(&header_path, e.to_string()))
}

pub fn save_mask(path: &Path, mask: &SamplingMask) -> Result<()> {
    write_json(
        path,
        &MaskFile {
            height: mask.height(),
            width: mask.width(),
            echoes: mask.echoes(),
            lines: mask.lines().to_vec(),
        },
    )
}

pub fn load_mask(path: &Path) -> Result<SamplingMask> {
    let file: MaskFile = read_json(path)?;
    if file.lines.len() != file.echoes {
        return Err(Error::format(
            path,
            format!("{} line lists for {} echoes", file.lines.len(), file.echoes),
        ));
    }
    SamplingMask::new(file.height, file.width, file.lines)
        .map_err(|e| Error::format(path, e.to_string()))
}

/// Mask JSON and `.kbin` paths of a k-space pair.
pub fn kspace_paths(path: &Path) -> (PathBuf, PathBuf) {
    (path.with_extension("json"), path.with_extension("kbin"))
}

/// Writes the mask JSON plus interleaved `(re, im)` `f32` pairs, echo-major,
/// then by ascending line, then by ascending column.
pub fn save_kspace(path: &Path, y: &KSpaceData) -> Result<()> {
    let (mask_path, blob_path) = kspace_paths(path);
    save_mask(&mask_path, y.mask())?;
    let mut blob = Vec::with_capacity(y.samples().len() * 8);
    for z in y.samples() {
        blob.extend_from_slice(&(z.re as f32).to_le_bytes());
        blob.extend_from_slice(&(z.im as f32).to_le_bytes());
    }
    write_bytes(&blob_path, &blob)
}

pub fn load_kspace(path: &Path) -> Result<KSpaceData> {
    let (mask_path, blob_path) = kspace_paths(path);
    let mask = load_mask(&mask_path)?;
    let blob = read_bytes(&blob_path)?;
    let flat = decode_f32(&blob, 2 * mask.sample_count(), &blob_path)?;
    let samples = flat
        .chunks_exact(2)
        .map(|p| Complex64::new(p[0], p[1]))
        .collect();
    KSpaceData::new(mask, samples).map_err(|e| Error::format(&blob_path, e.to_string()))
}

/// 8-bit binary PGM of one plane: `round(255·v/normalization_max)` clamped
/// to `[0, 255]`.
pub fn export_pgm(
    path: &Path,
    plane: &[f64],
    height: usize,
    width: usize,
    normalization_max: f64,
) -> Result<()> {
    if plane.len() != height * width {
        return Err(Error::shape(format!(
            "plane has {} values, expected {height}x{width}",
            plane.len()
        )));
    }
    if !(normalization_max > 0.0) || !normalization_max.is_finite() {
        return Err(Error::invalid("normalization maximum must be positive"));
    }
    let mut out = format!("P5\n{width} {height}\n255\n").into_bytes();
    out.extend(plane.iter().map(|&v| {
        let q = (255.0 * v / normalization_max).round();
        if q.is_nan() {
            0
        } else {
            q.clamp(0.0, 255.0) as u8
        }
    }));
    write_bytes(path, &out)
}

/// PGM of `|reference - reconstruction|` normalized by the reference maximum.
pub fn export_difference(
    path: &Path,
    reference: &[f64],
    reconstruction: &[f64],
    height: usize,
    width: usize,
) -> Result<()> {
    if reference.len() != reconstruction.len() {
        return Err(Error::shape("difference planes differ in size"));
    }
    let peak = reference.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    if !(peak > 0.0) {
        return Err(Error::invalid("reference plane is all zero"));
    }
    let diff: Vec<f64> = reference
        .iter()
        .zip(reconstruction)
        .map(|(a, b)| (a - b).abs())
        .collect();
    export_pgm(path, &diff, height, width, peak)
}

/// Reads a binary P5 PGM back as `(height, width, pixels)`.
pub fn read_pgm(path: &Path) -> Result<(usize, usize, Vec<u8>)> {
    let bytes = read_bytes(path)?;
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
            return Err(Error::format(path, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    pos += 1;
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| Error::format(path, format!("bad PGM header field {s:?}")))
    };
    if fields[0] != "P5" || parse(&fields[3])? != 255 {
        return Err(Error::format(path, "not an 8-bit P5 PGM"));
    }
    let (width, height) = (parse(&fields[1])?, parse(&fields[2])?);
    let pixels = bytes.get(pos..).unwrap_or_default().to_vec();
    if pixels.len() != width * height {
        return Err(Error::format(
            path,
            format!("{} pixels for {width}x{height}", pixels.len()),
        ));
    }
    Ok((height, width, pixels))
}

pub fn save_record(path: &Path, record: &RunRecord) -> Result<()> {
    write_json(path, record)
}

pub fn load_record(path: &Path) -> Result<RunRecord> {
    read_json(path)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut text =
        serde_json::to_string_pretty(value).map_err(|e| Error::format(path, e.to_string()))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = read_bytes(path)?;
    serde_json::from_slice(&bytes).map_err(|e| Error::format(path, e.to_string()))
}

fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| Error::io(path, e))
}

fn decode_f32(blob: &[u8], count: usize, path: &Path) -> Result<Vec<f64>> {
    if blob.len() != count * 4 {
        return Err(Error::format(
            path,
            format!("expected {} bytes, found {}", count * 4, blob.len()),
        ));
    }
    Ok(blob
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]) as f64)
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::tempdir;

    #[test]
    fn mef_roundtrip_of_f32_values_is_bit_exact() {
        let dir = tempdir().unwrap();
        let img = quantize_f32(&MultiEchoImage::from_fn(5, 3, 2, |r, c, e| {
            (r as f64 * 0.37 - c as f64 * 1.1 + e as f64).sin() * 1e3
        }));
        let p = dir.path().join("img");
        save_mef(&p, &img).unwrap();
        let back = load_mef(&p).unwrap();
        assert_eq!(back.shape(), img.shape());
        for (a, b) in back.data().iter().zip(img.data()) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_blob_is_a_format_error() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("img");
        save_mef(&p, &MultiEchoImage::zeros(4, 4, 2)).unwrap();
        let blob = p.with_extension("bin");
        let bytes = fs::read(&blob).unwrap();
        fs::write(&blob, &bytes[..bytes.len() - 4]).unwrap();
        assert!(matches!(load_mef(&p), Err(Error::Format { .. })));
    }

    #[test]
    fn missing_file_reports_path() {
        let err = load_mef(Path::new("/nonexistent/dir/img")).unwrap_err();
        assert!(err.to_string().contains("/nonexistent/dir/img.json"));
    }

    #[test]
    fn kspace_roundtrip() {
        let dir = tempdir().unwrap();
        let mask = SamplingMask::new(4, 3, vec![vec![0, 2], vec![3, 1]]).unwrap();
        let samples: Vec<Complex64> = (0..12)
            .map(|i| Complex64::new(i as f64 * 0.5, -(i as f64) * 0.25))
            .collect();
        let y = KSpaceData::new(mask, samples).unwrap();
        let p = dir.path().join("k");
        save_kspace(&p, &y).unwrap();
        assert_eq!(load_kspace(&p).unwrap(), y);
    }

    #[test]
    fn mask_file_is_validated() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("m.json");
        fs::write(&p, r#"{"height":4,"width":4,"echoes":1,"lines":[[1,1]]}"#).unwrap();
        assert!(load_mask(&p).is_err());
    }

    #[test]
    fn pgm_scaling_and_clamping() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("a.pgm");
        export_pgm(&p, &[2.0, 1.0, 0.0, -1.0, 4.0, 0.5], 2, 3, 2.0).unwrap();
        let (h, w, px) = read_pgm(&p).unwrap();
        assert_eq!((h, w), (2, 3));
        assert_eq!(px, vec![255, 128, 0, 0, 255, 64]);
    }

    #[test]
    fn identical_planes_give_black_difference() {
        let dir = tempdir().unwrap();
        let p = dir.path().join("d.pgm");
        let plane = [0.1, 0.7, 0.3, 0.9];
        export_difference(&p, &plane, &plane, 2, 2).unwrap();
        assert_eq!(read_pgm(&p).unwrap().2, vec![0; 4]);
    }
}
