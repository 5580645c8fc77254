//! Joseph-interpolation projector.
//!
//! Each ray is walked along its dominant axis: one sample per pixel row (or
//! column), linearly interpolated between the two straddling pixels and
//! scaled by the step length along the ray. Forward and back projection share
//! the walk, so `back_project` is the exact transpose of `forward_project`.

use super::{Image, ProjectionGeometry, Sinogram};
use crate::error::Result;

impl ProjectionGeometry {
    /// Calls `visit(pixel_index, weight)` for every nonzero `w_ij` of ray
    /// `(angle, detector)`.
    pub(crate) fn for_each_weight(
        &self,
        angle: usize,
        detector: usize,
        mut visit: impl FnMut(usize, f64),
    ) {
        let n = self.image_size;
        let half = (n as f64 - 1.0) / 2.0;
        let (s, c) = self.angles[angle].sin_cos();
        let t = self.detector_position(detector);

        let mut emit = |major: usize, pos: f64, step: f64, row_major: bool| {
            let base = pos.floor();
            let frac = pos - base;
            let lo = base as isize;
            for (k, w) in [(lo, 1.0 - frac), (lo + 1, frac)] {
                if w > 0.0 && k >= 0 && (k as usize) < n {
                    let idx = if row_major {
                        major * n + k as usize
                    } else {
                        k as usize * n + major
                    };
                    visit(idx, w * step);
                }
            }
        };

        if c.abs() >= s.abs() {
            // Mostly vertical ray: one sample per row.
            let step = 1.0 / c.abs();
            for row in 0..n {
                let y = half - row as f64;
                let x = (t - y * s) / c;
                emit(row, x + half, step, true);
            }
        } else {
            let step = 1.0 / s.abs();
            for col in 0..n {
                let x = col as f64 - half;
                let y = (t - x * c) / s;
                emit(col, half - y, step, false);
            }
        }
    }
}

/// `q = W x`.
pub fn forward_project(image: &Image, geom: &ProjectionGeometry) -> Result<Sinogram> {
    geom.check_image(image)?;
    let x = image.as_slice();
    let mut out = geom.blank_sinogram();
    let nd = geom.n_detectors();
    for (i, q) in out.as_mut_slice().iter_mut().enumerate() {
        let mut acc = 0.0f64;
        geom.for_each_weight(i / nd, i % nd, |j, w| acc += w * x[j] as f64);
        *q = acc as f32;
    }
    Ok(out)
}

/// `Wᵀ p`, using the same weights as [`forward_project`].
pub fn back_project(sino: &Sinogram, geom: &ProjectionGeometry) -> Result<Image> {
    geom.check_sinogram(sino)?;
    let nd = geom.n_detectors();
    let mut acc = vec![0.0f64; geom.n_pixels()];
    for (i, &p) in sino.as_slice().iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let p = p as f64;
        geom.for_each_weight(i / nd, i % nd, |j, w| acc[j] += w * p);
    }
    Image::from_vec(
        geom.image_size(),
        acc.into_iter().map(|v| v as f32).collect(),
    )
}

fn guarded_inverse(sums: &[f32]) -> Vec<f32> {
    sums.iter()
        .map(|&s| if s > 0.0 { 1.0 / s } else { 0.0 })
        .collect()
}

/// Diagonal of `R`: `r_ii = 1/Σ_j w_ij`, with rays that miss the grid set to 0.
pub fn inverse_row_sums(geom: &ProjectionGeometry) -> Vec<f32> {
    let ones = Image::filled(geom.image_size(), 1.0);
    let sums = forward_project(&ones, geom).expect("geometry-shaped image");
    guarded_inverse(sums.as_slice())
}

/// Diagonal of `C`: `c_jj = 1/Σ_i w_ij`, with pixels no ray touches set to 0.
pub fn inverse_col_sums(geom: &ProjectionGeometry) -> Image {
    let ones = Sinogram::filled(geom.n_angles(), geom.n_detectors(), 1.0);
    let sums = back_project(&ones, geom).expect("geometry-shaped sinogram");
    Image::from_vec(geom.image_size(), guarded_inverse(sums.as_slice()))
        .expect("finite guarded inverse")
}
