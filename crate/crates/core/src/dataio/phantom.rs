//! Random ellipse phantoms.
//!
//! Coordinates are normalised so the unit disk spans the image: pixel
//! centre `(row, col)` maps to `((col − (n−1)/2)/(n/2), ((n−1)/2 − row)/(n/2))`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Image;

const SUPERSAMPLE: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center: (f64, f64),
    pub semi_axes: (f64, f64),
    /// Counter-clockwise rotation in radians.
    pub rotation: f64,
    /// Added to every covered point.
    pub intensity: f64,
}

impl Ellipse {
    fn contains(&self, x: f64, y: f64) -> bool {
        let (s, c) = self.rotation.sin_cos();
        let (dx, dy) = (x - self.center.0, y - self.center.1);
        let u = dx * c + dy * s;
        let v = -dx * s + dy * c;
        (u / self.semi_axes.0).powi(2) + (v / self.semi_axes.1).powi(2) <= 1.0
    }
}

/// Distribution of random phantoms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EllipsePhantomSpec {
    pub size: usize,
    /// Inclusive range for the number of inner ellipses.
    pub count_min: usize,
    pub count_max: usize,
    pub semi_axis_min: f64,
    pub semi_axis_max: f64,
    pub intensity_min: f64,
    pub intensity_max: f64,
    /// Start every phantom with one large "body" ellipse.
    pub body: bool,
}

impl Default for EllipsePhantomSpec {
    fn default() -> Self {
        EllipsePhantomSpec {
            size: 64,
            count_min: 3,
            count_max: 8,
            semi_axis_min: 0.05,
            semi_axis_max: 0.4,
            intensity_min: -0.3,
            intensity_max: 0.5,
            body: true,
        }
    }
}

impl EllipsePhantomSpec {
    pub fn validate(&self) -> Result<()> {
        let ok = self.size > 0
            && self.count_min <= self.count_max
            && 0.0 < self.semi_axis_min
            && self.semi_axis_min <= self.semi_axis_max
            && self.semi_axis_max < 1.0
            && self.intensity_min <= self.intensity_max;
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!(
                "invalid phantom spec {self:?}"
            )))
        }
    }

    /// Draws one set of ellipses, each fully inside the unit disk.
    pub fn sample(&self, rng: &mut impl Rng) -> Vec<Ellipse> {
        let mut out = Vec::new();
        if self.body {
            let a: f64 = rng.random_range(0.6..0.85);
            let b: f64 = rng.random_range(0.6..0.85);
            let slack = 0.95 - a.max(b);
            out.push(Ellipse {
                center: (
                    rng.random_range(-slack..=slack) * 0.5,
                    rng.random_range(-slack..=slack) * 0.5,
                ),
                semi_axes: (a, b),
                rotation: rng.random_range(0.0..std::f64::consts::PI),
                intensity: rng.random_range(0.3..0.6),
            });
        }
        let count = rng.random_range(self.count_min..=self.count_max);
        for _ in 0..count {
            let a = rng.random_range(self.semi_axis_min..=self.semi_axis_max);
            let b = rng.random_range(self.semi_axis_min..=self.semi_axis_max);
            let reach = 1.0 - a.max(b);
            let r = reach * rng.random::<f64>().sqrt();
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            out.push(Ellipse {
                center: (r * phi.cos(), r * phi.sin()),
                semi_axes: (a, b),
                rotation: rng.random_range(0.0..std::f64::consts::PI),
                intensity: rng.random_range(self.intensity_min..=self.intensity_max),
            });
        }
        out
    }
}

/// Rasterises ellipses with 4×4 supersampling per pixel, then clamps to `[0, 1]`.
pub fn render_ellipses(ellipses: &[Ellipse], size: usize) -> Image {
    let half = (size as f64 - 1.0) / 2.0;
    let radius = size as f64 / 2.0;
    let mut img = Image::zeros(size);
    let ss = SUPERSAMPLE as f64;
    for row in 0..size {
        for col in 0..size {
            let mut acc = 0.0;
            for i in 0..SUPERSAMPLE {
                for j in 0..SUPERSAMPLE {
                    let x = (col as f64 - half + (j as f64 + 0.5) / ss - 0.5) / radius;
                    let y = (half - row as f64 - (i as f64 + 0.5) / ss + 0.5) / radius;
                    let v: f64 = ellipses
                        .iter()
                        .filter(|e| e.contains(x, y))
                        .map(|e| e.intensity)
                        .sum();
                    acc += v.clamp(0.0, 1.0);
                }
            }
            img.set(row, col, (acc / (ss * ss)) as f32);
        }
    }
    img
}

/// `count` phantoms drawn from `spec`, deterministic in `seed`.
pub fn generate_phantoms(spec: &EllipsePhantomSpec, count: usize, seed: u64) -> Result<Vec<Image>> {
    spec.validate()?;
    if count == 0 {
        return Err(Error::InvalidInput(
            "phantom count must be at least 1".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Ok((0..count)
        .map(|_| render_ellipses(&spec.sample(&mut rng), spec.size))
        .collect())
}

/// Modified (high-contrast) Shepp-Logan head phantom.
pub fn shepp_logan(size: usize) -> Image {
    const TABLE: [(f64, f64, f64, f64, f64, f64); 10] = [
        (1.0, 0.69, 0.92, 0.0, 0.0, 0.0),
        (-0.8, 0.6624, 0.874, 0.0, -0.0184, 0.0),
        (-0.2, 0.11, 0.31, 0.22, 0.0, -18.0),
        (-0.2, 0.16, 0.41, -0.22, 0.0, 18.0),
        (0.1, 0.21, 0.25, 0.0, 0.35, 0.0),
        (0.1, 0.046, 0.046, 0.0, 0.1, 0.0),
        (0.1, 0.046, 0.046, 0.0, -0.1, 0.0),
        (0.1, 0.046, 0.023, -0.08, -0.605, 0.0),
        (0.1, 0.023, 0.023, 0.0, -0.606, 0.0),
        (0.1, 0.023, 0.046, 0.06, -0.605, 0.0),
    ];
    let ellipses: Vec<Ellipse> = TABLE
        .iter()
        .map(|&(intensity, a, b, x0, y0, deg)| Ellipse {
            center: (x0, y0),
            semi_axes: (a, b),
            rotation: deg.to_radians(),
            intensity,
        })
        .collect();
    render_ellipses(&ellipses, size)
}
