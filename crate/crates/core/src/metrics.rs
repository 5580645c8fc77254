//! Image- and sinogram-space quality measures and their aggregate reports.
//!
//! PSNR of identical inputs is `f64::INFINITY`, written as `inf` in CSV files.
//! Aggregates use the population standard deviation.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{forward_project, Image, ProjectionGeometry, Sinogram};

const SSIM_WINDOW: usize = 11;
const SSIM_SIGMA: f64 = 1.5;
const SSIM_K1: f64 = 0.01;
const SSIM_K2: f64 = 0.03;

/// A row-major 2D array of samples.
pub trait Grid {
    /// `(rows, cols)`.
    fn shape(&self) -> (usize, usize);
    fn values(&self) -> &[f32];
}

impl Grid for Image {
    fn shape(&self) -> (usize, usize) {
        (self.size(), self.size())
    }

    fn values(&self) -> &[f32] {
        self.as_slice()
    }
}

impl Grid for Sinogram {
    fn shape(&self) -> (usize, usize) {
        (self.n_angles(), self.n_detectors())
    }

    fn values(&self) -> &[f32] {
        self.as_slice()
    }
}

fn check_shapes<G: Grid>(a: &G, b: &G) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(Error::DimensionMismatch(format!(
            "{:?} vs {:?}",
            a.shape(),
            b.shape()
        )));
    }
    Ok(())
}

/// Mean of squared differences.
pub fn mse<G: Grid>(a: &G, b: &G) -> Result<f64> {
    check_shapes(a, b)?;
    let n = a.values().len() as f64;
    let sum: f64 = a
        .values()
        .iter()
        .zip(b.values())
        .map(|(&x, &y)| {
            let d = x as f64 - y as f64;
            d * d
        })
        .sum();
    Ok(sum / n)
}

/// `10·log10(range²/mse)`; infinite for a zero error.
pub fn psnr_from_mse(mse: f64, data_range: f64) -> f64 {
    if mse == 0.0 {
        f64::INFINITY
    } else {
        10.0 * (data_range * data_range / mse).log10()
    }
}

pub fn psnr<G: Grid>(a: &G, b: &G, data_range: f64) -> Result<f64> {
    check_range(data_range)?;
    Ok(psnr_from_mse(mse(a, b)?, data_range))
}

fn check_range(data_range: f64) -> Result<()> {
    if data_range.is_finite() && data_range > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidInput(format!(
            "data range must be positive, got {data_range}"
        )))
    }
}

fn gaussian_window(size: usize) -> Vec<f64> {
    let c = (size as f64 - 1.0) / 2.0;
    let g: Vec<f64> = (0..size)
        .map(|i| (-((i as f64 - c).powi(2)) / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp())
        .collect();
    let mut w = Vec::with_capacity(size * size);
    for &gy in &g {
        for &gx in &g {
            w.push(gy * gx);
        }
    }
    let total: f64 = w.iter().sum();
    w.iter().map(|v| v / total).collect()
}

/// Mean SSIM over every fully contained 11×11 Gaussian window (σ = 1.5).
/// Smaller inputs use the largest odd window that fits.
pub fn ssim<G: Grid>(a: &G, b: &G, data_range: f64) -> Result<f64> {
    check_shapes(a, b)?;
    check_range(data_range)?;
    let (rows, cols) = a.shape();
    let mut win = SSIM_WINDOW.min(rows).min(cols);
    if win % 2 == 0 {
        win -= 1;
    }
    let w = gaussian_window(win);
    let c1 = (SSIM_K1 * data_range).powi(2);
    let c2 = (SSIM_K2 * data_range).powi(2);
    let (av, bv) = (a.values(), b.values());

    let mut total = 0.0;
    let mut count = 0usize;
    for r0 in 0..=rows - win {
        for c0 in 0..=cols - win {
            let (mut ma, mut mb, mut saa, mut sbb, mut sab) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..win {
                for j in 0..win {
                    let k = (r0 + i) * cols + c0 + j;
                    let (x, y) = (av[k] as f64, bv[k] as f64);
                    let g = w[i * win + j];
                    ma += g * x;
                    mb += g * y;
                    saa += g * x * x;
                    sbb += g * y * y;
                    sab += g * (x * y);
                }
            }
            let va = saa - ma * ma;
            let vb = sbb - mb * mb;
            let cov = sab - ma * mb;
            total += ((2.0 * ma * mb + c1) * (2.0 * cov + c2))
                / ((ma * ma + mb * mb + c1) * (va + vb + c2));
            count += 1;
        }
    }
    Ok(total / count as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Space {
    Image,
    Sinogram,
}

impl std::fmt::Display for Space {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Space::Image => "image",
            Space::Sinogram => "sinogram",
        })
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricEntry {
    pub method: String,
    pub space: Space,
    pub sample_id: String,
    pub psnr_db: f64,
    pub mse: f64,
    pub ssim: f64,
}

impl MetricEntry {
    /// Scores `estimate` against `reference`.
    pub fn compare<G: Grid>(
        method: &str,
        space: Space,
        sample_id: &str,
        estimate: &G,
        reference: &G,
        data_range: f64,
    ) -> Result<Self> {
        check_range(data_range)?;
        let mse = mse(estimate, reference)?;
        Ok(MetricEntry {
            method: method.to_owned(),
            space,
            sample_id: sample_id.to_owned(),
            psnr_db: psnr_from_mse(mse, data_range),
            mse,
            ssim: ssim(estimate, reference, data_range)?,
        })
    }
}

/// Projects `recon` and scores it against the measured sinogram, using
/// `max(p) − min(p)` as the data range.
pub fn sinogram_fidelity(
    method: &str,
    sample_id: &str,
    recon: &Image,
    p_measured: &Sinogram,
    geom: &ProjectionGeometry,
) -> Result<MetricEntry> {
    geom.check_sinogram(p_measured)?;
    let projected = forward_project(recon, geom)?;
    let range = (p_measured.max() - p_measured.min()) as f64;
    let range = if range > 0.0 { range } else { 1.0 };
    MetricEntry::compare(
        method,
        Space::Sinogram,
        sample_id,
        &projected,
        p_measured,
        range,
    )
}

/// Mean and population standard deviation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Stats {
    pub mean: f64,
    pub std: f64,
}

impl Stats {
    pub fn of(values: &[f64]) -> Self {
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        Stats {
            mean,
            std: var.sqrt(),
        }
    }

    pub fn variance(&self) -> f64 {
        self.std * self.std
    }
}

/// Aggregate of one `(method, space)` group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub method: String,
    pub space: Space,
    pub entries: Vec<MetricEntry>,
    pub psnr_db: Stats,
    pub mse: Stats,
    pub ssim: Stats,
}

impl MetricReport {
    fn from_entries(entries: Vec<MetricEntry>) -> Self {
        let col =
            |f: fn(&MetricEntry) -> f64| Stats::of(&entries.iter().map(f).collect::<Vec<_>>());
        MetricReport {
            method: entries[0].method.clone(),
            space: entries[0].space,
            psnr_db: col(|e| e.psnr_db),
            mse: col(|e| e.mse),
            ssim: col(|e| e.ssim),
            entries,
        }
    }
}

/// Groups entries by `(method, space)` in order of first appearance.
pub fn aggregate_report(entries: &[MetricEntry]) -> Result<Vec<MetricReport>> {
    if entries.is_empty() {
        return Err(Error::InvalidInput("no metric entries to aggregate".into()));
    }
    let mut groups: Vec<Vec<MetricEntry>> = Vec::new();
    for e in entries {
        match groups
            .iter_mut()
            .find(|g| g[0].method == e.method && g[0].space == e.space)
        {
            Some(g) => g.push(e.clone()),
            None => groups.push(vec![e.clone()]),
        }
    }
    Ok(groups.into_iter().map(MetricReport::from_entries).collect())
}

/// Aligned text table: one line per report with μ and σ columns, plus σ² for MSE.
pub fn format_table(reports: &[MetricReport]) -> String {
    let header = [
        "method", "space", "PSNR μ", "PSNR σ", "MSE μ", "MSE σ", "MSE σ²", "SSIM μ", "SSIM σ", "n",
    ];
    let rows: Vec<Vec<String>> = reports
        .iter()
        .map(|r| {
            vec![
                r.method.clone(),
                r.space.to_string(),
                format!("{:.2}", r.psnr_db.mean),
                format!("{:.2}", r.psnr_db.std),
                format!("{:.3e}", r.mse.mean),
                format!("{:.3e}", r.mse.std),
                format!("{:.3e}", r.mse.variance()),
                format!("{:.4}", r.ssim.mean),
                format!("{:.4}", r.ssim.std),
                r.entries.len().to_string(),
            ]
        })
        .collect();
    let widths: Vec<usize> = (0..header.len())
        .map(|c| {
            rows.iter()
                .map(|r| r[c].chars().count())
                .chain([header[c].chars().count()])
                .max()
                .unwrap_or(0)
        })
        .collect();
    let mut out = String::new();
    let mut line = |cells: &[String]| {
        let parts: Vec<String> = cells
            .iter()
            .zip(&widths)
            .enumerate()
            .map(|(i, (c, &w))| {
                let pad = w - c.chars().count();
                if i < 2 {
                    format!("{c}{}", " ".repeat(pad))
                } else {
                    format!("{}{c}", " ".repeat(pad))
                }
            })
            .collect();
        let _ = writeln!(out, "{}", parts.join("  ").trim_end());
    };
    line(&header.map(String::from));
    for r in &rows {
        line(r);
    }
    out
}

pub fn write_csv(path: impl AsRef<Path>, entries: &[MetricEntry]) -> Result<()> {
    let path = path.as_ref();
    let mut w = csv::Writer::from_path(path).map_err(Error::csv(path))?;
    for e in entries {
        w.serialize(e).map_err(Error::csv(path))?;
    }
    w.flush().map_err(Error::io(path))
}

pub fn read_csv(path: impl AsRef<Path>) -> Result<Vec<MetricEntry>> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(Error::csv(path))?;
    r.deserialize()
        .map(|row| row.map_err(Error::csv(path)))
        .collect()
}
