//! Raw float files with JSON sidecars, plus PGM import and export.
//!
//! An image `foo.f32` is `width·height` little-endian `f32` values in row-major
//! order, described by `foo.json` holding `{"width": .., "height": ..}`.
//! Sinograms use the same scheme with `{"n_angles": .., "n_detectors": ..}`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{Image, Sinogram};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ImageSidecar {
    width: usize,
    height: usize,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SinogramSidecar {
    n_angles: usize,
    n_detectors: usize,
}

fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("json")
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn write_raw(path: &Path, values: &[f32]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    let bytes: Vec<u8> = values.iter().flat_map(|v| v.to_le_bytes()).collect();
    fs::write(path, bytes).map_err(Error::io(path))
}

fn read_raw(path: &Path, expected: usize) -> Result<Vec<f32>> {
    let bytes = fs::read(path).map_err(Error::io(path))?;
    if bytes.len() != 4 * expected {
        return Err(format_err(
            path,
            format!("expected {} bytes, found {}", 4 * expected, bytes.len()),
        ));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
        .collect())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(Error::json(path))?;
    fs::write(path, text).map_err(Error::io(path))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(Error::io(path))?;
    serde_json::from_str(&text).map_err(Error::json(path))
}

pub fn write_image(path: impl AsRef<Path>, image: &Image) -> Result<()> {
    let path = path.as_ref();
    write_raw(path, image.as_slice())?;
    let n = image.size();
    write_json(
        &sidecar_path(path),
        &ImageSidecar {
            width: n,
            height: n,
        },
    )
}

pub fn read_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let meta: ImageSidecar = read_json(&sidecar_path(path))?;
    if meta.width != meta.height {
        return Err(format_err(
            path,
            format!(
                "images must be square, sidecar says {}×{}",
                meta.width, meta.height
            ),
        ));
    }
    let values = read_raw(path, meta.width * meta.height)?;
    Image::from_vec(meta.width, values).map_err(|e| format_err(path, e.to_string()))
}

pub fn write_sinogram(path: impl AsRef<Path>, sino: &Sinogram) -> Result<()> {
    let path = path.as_ref();
    write_raw(path, sino.as_slice())?;
    write_json(
        &sidecar_path(path),
        &SinogramSidecar {
            n_angles: sino.n_angles(),
            n_detectors: sino.n_detectors(),
        },
    )
}

pub fn read_sinogram(path: impl AsRef<Path>) -> Result<Sinogram> {
    let path = path.as_ref();
    let meta: SinogramSidecar = read_json(&sidecar_path(path))?;
    let values = read_raw(path, meta.n_angles * meta.n_detectors)?;
    Sinogram::from_vec(meta.n_angles, meta.n_detectors, values)
        .map_err(|e| format_err(path, e.to_string()))
}

/// Writes a 16-bit binary PGM, mapping `[lo, hi]` linearly onto `0..=65535`.
pub fn write_pgm(path: impl AsRef<Path>, image: &Image, lo: f32, hi: f32) -> Result<()> {
    let path = path.as_ref();
    if !(hi > lo) {
        return Err(Error::InvalidInput(format!(
            "PGM range [{lo}, {hi}] is empty"
        )));
    }
    let n = image.size();
    let mut bytes = format!("P5\n{n} {n}\n65535\n").into_bytes();
    for &v in image.as_slice() {
        let q = ((v - lo) / (hi - lo)).clamp(0.0, 1.0) * 65535.0;
        bytes.extend_from_slice(&(q.round() as u16).to_be_bytes());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(Error::io(dir))?;
    }
    fs::write(path, bytes).map_err(Error::io(path))
}

/// Reads a binary (P5) PGM of 8 or 16 bits. Returns `(width, height, values)`
/// with the raw grey levels as floats.
pub fn read_pgm(path: impl AsRef<Path>) -> Result<(usize, usize, Vec<f32>)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(Error::io(path))?;
    let mut pos = 0;
    let mut fields = Vec::with_capacity(4);
    while fields.len() < 4 {
        while pos < bytes.len() && bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if pos < bytes.len() && bytes[pos] == b'#' {
            while pos < bytes.len() && bytes[pos] != b'\n' {
                pos += 1;
            }
            continue;
        }
        let start = pos;
        while pos < bytes.len() && !bytes[pos].is_ascii_whitespace() {
            pos += 1;
        }
        if start == pos {
            return Err(format_err(path, "truncated PGM header"));
        }
        fields.push(String::from_utf8_lossy(&bytes[start..pos]).into_owned());
    }
    // Exactly one whitespace byte separates the header from the raster.
    pos += 1;
    if fields[0] != "P5" {
        return Err(format_err(
            path,
            format!("unsupported magic {:?}", fields[0]),
        ));
    }
    let parse = |s: &str| {
        s.parse::<usize>()
            .map_err(|_| format_err(path, format!("bad header field {s:?}")))
    };
    let (w, h, maxval) = (parse(&fields[1])?, parse(&fields[2])?, parse(&fields[3])?);
    if w == 0 || h == 0 || maxval == 0 || maxval > 65535 {
        return Err(format_err(path, "bad PGM dimensions or maxval"));
    }
    let depth = if maxval < 256 { 1 } else { 2 };
    let raster = bytes.get(pos..).unwrap_or(&[]);
    if raster.len() < w * h * depth {
        return Err(format_err(path, "truncated PGM raster"));
    }
    let values = if depth == 1 {
        raster[..w * h].iter().map(|&b| b as f32).collect()
    } else {
        raster[..2 * w * h]
            .chunks_exact(2)
            .map(|c| u16::from_be_bytes([c[0], c[1]]) as f32)
            .collect()
    };
    Ok((w, h, values))
}

/// Bilinear resampling of a `width×height` raster onto a `size×size` grid,
/// aligning pixel centres of the outer rows and columns.
pub fn resample(width: usize, height: usize, values: &[f32], size: usize) -> Result<Image> {
    if values.len() != width * height || width == 0 || height == 0 || size == 0 {
        return Err(Error::DimensionMismatch(format!(
            "{} values for a {width}×{height} raster",
            values.len()
        )));
    }
    let coord = |i: usize, src: usize| {
        if size == 1 {
            (src as f64 - 1.0) / 2.0
        } else {
            i as f64 * (src as f64 - 1.0) / (size as f64 - 1.0)
        }
    };
    let mut out = Vec::with_capacity(size * size);
    for r in 0..size {
        let y = coord(r, height);
        let y0 = (y.floor() as usize).min(height - 1);
        let y1 = (y0 + 1).min(height - 1);
        let fy = y - y0 as f64;
        for c in 0..size {
            let x = coord(c, width);
            let x0 = (x.floor() as usize).min(width - 1);
            let x1 = (x0 + 1).min(width - 1);
            let fx = x - x0 as f64;
            let at = |yy: usize, xx: usize| values[yy * width + xx] as f64;
            let top = at(y0, x0) * (1.0 - fx) + at(y0, x1) * fx;
            let bottom = at(y1, x0) * (1.0 - fx) + at(y1, x1) * fx;
            out.push((top * (1.0 - fy) + bottom * fy) as f32);
        }
    }
    Image::from_vec(size, out)
}

/// Loads a PGM or raw `.f32` image of any shape and resamples it to `size×size`.
/// Grey levels are returned unscaled; dataset normalisation maps them to `[0, 1]`.
pub fn import_image(path: impl AsRef<Path>, size: usize) -> Result<Image> {
    let path = path.as_ref();
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("");
    let (w, h, values) = if ext.eq_ignore_ascii_case("pgm") {
        read_pgm(path)?
    } else {
        let meta: ImageSidecar = read_json(&sidecar_path(path))?;
        (
            meta.width,
            meta.height,
            read_raw(path, meta.width * meta.height)?,
        )
    };
    if w == size && h == size {
        return Image::from_vec(size, values);
    }
    resample(w, h, &values, size)
}
