//! Parallel-beam acquisition geometry and the matrix-free projection operator.
//!
//! The image is an `n × n` grid of unit pixels centred on the origin, with
//! row 0 at the top (`y` grows upwards). A ray is the line
//! `x·cos θ + y·sin θ = t`; detector `d` sits at
//! `t_d = (d − (n_det − 1)/2) · spacing`.

mod projector;

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use projector::{back_project, forward_project, inverse_col_sums, inverse_row_sums};

/// Equidistant, endpoint-exclusive angles `k·π/n`, `k = 0..n`.
pub fn equidistant_angles(n_angles: usize) -> Vec<f64> {
    (0..n_angles)
        .map(|k| k as f64 * PI / n_angles as f64)
        .collect()
}

/// Angle set, detector layout and the image grid they are bound to.
///
/// Together these define the implicit system matrix `W`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "GeometryDoc", into = "GeometryDoc")]
pub struct ProjectionGeometry {
    angles: Vec<f64>,
    n_detectors: usize,
    detector_spacing: f64,
    image_size: usize,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct GeometryDoc {
    n_angles: usize,
    n_detectors: usize,
    image_size: usize,
    #[serde(default = "unit_spacing")]
    detector_spacing: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angles: Option<Vec<f64>>,
}

fn unit_spacing() -> f64 {
    1.0
}

impl TryFrom<GeometryDoc> for ProjectionGeometry {
    type Error = Error;

    fn try_from(doc: GeometryDoc) -> Result<Self> {
        let angles = match doc.angles {
            Some(angles) => {
                if angles.len() != doc.n_angles {
                    return Err(Error::InvalidInput(format!(
                        "n_angles is {} but {} angles were listed",
                        doc.n_angles,
                        angles.len()
                    )));
                }
                angles
            }
            None => equidistant_angles(doc.n_angles),
        };
        ProjectionGeometry::new(
            angles,
            doc.n_detectors,
            doc.detector_spacing,
            doc.image_size,
        )
    }
}

impl From<ProjectionGeometry> for GeometryDoc {
    fn from(g: ProjectionGeometry) -> Self {
        let default = equidistant_angles(g.angles.len());
        GeometryDoc {
            n_angles: g.angles.len(),
            n_detectors: g.n_detectors,
            image_size: g.image_size,
            detector_spacing: g.detector_spacing,
            angles: (g.angles != default).then_some(g.angles),
        }
    }
}

impl ProjectionGeometry {
    pub fn new(
        angles: Vec<f64>,
        n_detectors: usize,
        detector_spacing: f64,
        image_size: usize,
    ) -> Result<Self> {
        if angles.is_empty() || n_detectors == 0 || image_size == 0 {
            return Err(Error::InvalidInput(format!(
                "geometry needs at least one angle, detector and pixel (got {} / {} / {})",
                angles.len(),
                n_detectors,
                image_size
            )));
        }
        if !(detector_spacing.is_finite() && detector_spacing > 0.0) {
            return Err(Error::InvalidInput(format!(
                "detector spacing must be positive, got {detector_spacing}"
            )));
        }
        if angles.iter().any(|a| !(0.0..PI).contains(a)) {
            return Err(Error::InvalidInput("angles must lie in [0, π)".into()));
        }
        if angles.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidInput(
                "angles must be strictly increasing".into(),
            ));
        }
        let geom = ProjectionGeometry {
            angles,
            n_detectors,
            detector_spacing,
            image_size,
        };
        if !geom.covers_diagonal() {
            log::warn!(
                "detector ({} bins × {}) does not cover the {}×{} grid diagonal; outer pixels are truncated",
                n_detectors,
                detector_spacing,
                image_size,
                image_size
            );
        }
        Ok(geom)
    }

    /// `n_angles` equidistant views over `[0, π)` with one unit-spaced
    /// detector bin per image column.
    pub fn parallel(n_angles: usize, image_size: usize) -> Result<Self> {
        Self::new(equidistant_angles(n_angles), image_size, 1.0, image_size)
    }

    pub fn with_detectors(self, n_detectors: usize, detector_spacing: f64) -> Result<Self> {
        Self::new(self.angles, n_detectors, detector_spacing, self.image_size)
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn detector_spacing(&self) -> f64 {
        self.detector_spacing
    }

    pub fn image_size(&self) -> usize {
        self.image_size
    }

    /// Number of rays, `m`.
    pub fn n_rays(&self) -> usize {
        self.angles.len() * self.n_detectors
    }

    /// Number of pixels, `n²`.
    pub fn n_pixels(&self) -> usize {
        self.image_size * self.image_size
    }

    /// Detector coordinate `t` of bin `d`.
    pub fn detector_position(&self, d: usize) -> f64 {
        (d as f64 - (self.n_detectors as f64 - 1.0) / 2.0) * self.detector_spacing
    }

    /// Whether the detector span reaches the corners of the image grid.
    pub fn covers_diagonal(&self) -> bool {
        let half_span = self.n_detectors as f64 * self.detector_spacing / 2.0;
        half_span >= self.image_size as f64 * std::f64::consts::SQRT_2 / 2.0
    }

    pub fn blank_image(&self) -> Image {
        Image::zeros(self.image_size)
    }

    pub fn blank_sinogram(&self) -> Sinogram {
        Sinogram::zeros(self.n_angles(), self.n_detectors)
    }

    pub fn check_image(&self, image: &Image) -> Result<()> {
        if image.size() != self.image_size {
            return Err(Error::DimensionMismatch(format!(
                "image is {0}×{0}, geometry expects {1}×{1}",
                image.size(),
                self.image_size
            )));
        }
        Ok(())
    }

    pub fn check_sinogram(&self, sino: &Sinogram) -> Result<()> {
        if sino.n_angles() != self.n_angles() || sino.n_detectors() != self.n_detectors {
            return Err(Error::DimensionMismatch(format!(
                "sinogram is {}×{}, geometry expects {}×{}",
                sino.n_angles(),
                sino.n_detectors(),
                self.n_angles(),
                self.n_detectors
            )));
        }
        Ok(())
    }
}

/// Square grid of attenuation values, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    size: usize,
    values: Vec<f32>,
}

impl Image {
    pub fn zeros(size: usize) -> Self {
        Image {
            size,
            values: vec![0.0; size * size],
        }
    }

    pub fn filled(size: usize, value: f32) -> Self {
        Image {
            size,
            values: vec![value; size * size],
        }
    }

    /// Wraps row-major values; rejects wrong lengths and non-finite entries.
    pub fn from_vec(size: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != size * size {
            return Err(Error::DimensionMismatch(format!(
                "{} values cannot form a {size}×{size} image",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "image contains non-finite values".into(),
            ));
        }
        Ok(Image { size, values })
    }

    pub fn size(&self) -> usize {
        self.size
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.values
    }

    pub fn get(&self, row: usize, col: usize) -> f32 {
        self.values[row * self.size + col]
    }

    pub fn set(&mut self, row: usize, col: usize, value: f32) {
        self.values[row * self.size + col] = value;
    }

    /// `self + scale·other`, elementwise.
    pub fn add_scaled(&self, other: &Image, scale: f32) -> Result<Image> {
        if other.size != self.size {
            return Err(Error::DimensionMismatch(format!(
                "cannot combine {}×{} with {}×{}",
                self.size, self.size, other.size, other.size
            )));
        }
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| a + scale * b)
            .collect();
        Ok(Image {
            size: self.size,
            values,
        })
    }

    pub fn map(&self, f: impl Fn(f32) -> f32) -> Image {
        Image {
            size: self.size,
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Angle-major array of line integrals.
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    n_angles: usize,
    n_detectors: usize,
    values: Vec<f32>,
}

impl Sinogram {
    pub fn zeros(n_angles: usize, n_detectors: usize) -> Self {
        Sinogram {
            n_angles,
            n_detectors,
            values: vec![0.0; n_angles * n_detectors],
        }
    }

    pub fn filled(n_angles: usize, n_detectors: usize, value: f32) -> Self {
        Sinogram {
            n_angles,
            n_detectors,
            values: vec![value; n_angles * n_detectors],
        }
    }

    pub fn from_vec(n_angles: usize, n_detectors: usize, values: Vec<f32>) -> Result<Self> {
        if values.len() != n_angles * n_detectors {
            return Err(Error::DimensionMismatch(format!(
                "{} values cannot form a {n_angles}×{n_detectors} sinogram",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(
                "sinogram contains non-finite values".into(),
            ));
        }
        Ok(Sinogram {
            n_angles,
            n_detectors,
            values,
        })
    }

    pub fn n_angles(&self) -> usize {
        self.n_angles
    }

    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn as_slice(&self) -> &[f32] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [f32] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<f32> {
        self.values
    }

    /// Detector profile recorded at angle index `a`.
    pub fn row(&self, a: usize) -> &[f32] {
        &self.values[a * self.n_detectors..(a + 1) * self.n_detectors]
    }

    pub fn get(&self, angle: usize, detector: usize) -> f32 {
        self.values[angle * self.n_detectors + detector]
    }

    pub fn set(&mut self, angle: usize, detector: usize, value: f32) {
        self.values[angle * self.n_detectors + detector] = value;
    }

    pub fn max(&self) -> f32 {
        self.values
            .iter()
            .copied()
            .fold(f32::NEG_INFINITY, f32::max)
    }

    pub fn min(&self) -> f32 {
        self.values.iter().copied().fold(f32::INFINITY, f32::min)
    }
}
