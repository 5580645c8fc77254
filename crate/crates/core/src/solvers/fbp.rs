use std::f64::consts::PI;

use rustfft::{num_complex::Complex, FftPlanner};

use crate::error::Result;
use crate::geometry::{back_project, Image, ProjectionGeometry, Sinogram};

/// Spatial Ram-Lak kernel of length `len`, stored circularly (tap `k` at
/// index `k mod len`): `1/4` at zero, `−1/(πk)²` at odd `k`, zero otherwise.
pub fn ramp_kernel(len: usize) -> Vec<f64> {
    let mut h = vec![0.0; len];
    h[0] = 0.25;
    for k in (1..=len / 2).step_by(2) {
        let v = -1.0 / (PI * k as f64).powi(2);
        h[k] = v;
        h[len - k] = v;
    }
    h
}

/// Ram-Lak filters every detector row in the frequency domain, zero-padded
/// to the next power of two at or above `2·n_detectors`.
pub fn ramp_filter(p: &Sinogram, geom: &ProjectionGeometry) -> Result<Sinogram> {
    geom.check_sinogram(p)?;
    let nd = geom.n_detectors();
    let len = (2 * nd).next_power_of_two();

    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(len);
    let inv = planner.plan_fft_inverse(len);

    let mut response: Vec<Complex<f64>> = ramp_kernel(len)
        .into_iter()
        .map(|v| Complex::new(v, 0.0))
        .collect();
    fwd.process(&mut response);
    // The kernel is even, so its spectrum is real; 2|f| convention.
    let response: Vec<f64> = response.iter().map(|c| 2.0 * c.re).collect();

    let mut out = geom.blank_sinogram();
    let mut buf = vec![Complex::new(0.0, 0.0); len];
    for a in 0..geom.n_angles() {
        for (b, &v) in buf.iter_mut().zip(p.row(a)) {
            *b = Complex::new(v as f64, 0.0);
        }
        buf[nd..].fill(Complex::new(0.0, 0.0));
        fwd.process(&mut buf);
        for (b, &r) in buf.iter_mut().zip(&response) {
            *b *= r;
        }
        inv.process(&mut buf);
        let row = &mut out.as_mut_slice()[a * nd..(a + 1) * nd];
        for (o, b) in row.iter_mut().zip(&buf) {
            *o = (b.re / len as f64) as f32;
        }
    }
    Ok(out)
}

/// Filtered back projection: ramp filter, `Wᵀ`, then `π/(2·n_angles)`.
pub fn fbp(p: &Sinogram, geom: &ProjectionGeometry) -> Result<Image> {
    let filtered = ramp_filter(p, geom)?;
    let scale = (PI / (2.0 * geom.n_angles() as f64)) as f32;
    Ok(back_project(&filtered, geom)?.map(|v| v * scale))
}
