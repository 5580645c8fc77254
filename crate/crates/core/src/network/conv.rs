//! Dilated 3×3 convolution with zero padding.
//!
//! Taps follow the convolution convention
//! `out(y, x) = b + Σ_c Σ_{i,j ∈ {−1,0,1}} w_c(i, j) · in_c(y − i·d, x − j·d)`,
//! where `w_c(i, j)` is stored at `(c, i + 1, j + 1)`.

use super::Real;
use crate::error::{Error, Result};

/// One output channel of a dilated 3×3 convolution.
#[derive(Debug, Clone, PartialEq)]
pub struct ConvKernel<T> {
    /// `in_channels × 3 × 3`, row-major by (channel, ky, kx).
    pub weights: Vec<T>,
    pub bias: T,
    pub dilation: usize,
}

impl<T: Real> ConvKernel<T> {
    pub fn new(weights: Vec<T>, bias: T, dilation: usize) -> Result<Self> {
        if dilation == 0 {
            return Err(Error::InvalidInput("dilation must be at least 1".into()));
        }
        if weights.is_empty() || weights.len() % 9 != 0 {
            return Err(Error::InvalidInput(format!(
                "{} weights do not form 3×3 kernels",
                weights.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) || !bias.is_finite() {
            return Err(Error::InvalidInput("kernel has non-finite entries".into()));
        }
        Ok(ConvKernel {
            weights,
            bias,
            dilation,
        })
    }

    pub fn in_channels(&self) -> usize {
        self.weights.len() / 9
    }
}

/// Dilated convolution of a `C × n × n` stack, bias included, no activation.
pub fn conv2d_dilated<T: Real>(input: &[T], n: usize, kernel: &ConvKernel<T>) -> Result<Vec<T>> {
    let channels = kernel.in_channels();
    if input.len() != channels * n * n {
        return Err(Error::DimensionMismatch(format!(
            "input holds {} values, kernel expects {channels} channels of {n}×{n}",
            input.len()
        )));
    }
    let mut out = vec![kernel.bias; n * n];
    for (c, w) in kernel.weights.chunks_exact(9).enumerate() {
        accumulate(
            &mut out,
            &input[c * n * n..(c + 1) * n * n],
            n,
            w,
            kernel.dilation,
        );
    }
    Ok(out)
}

/// Valid output range for a tap offset `o`: indices `y` with `0 ≤ y − o < n`.
#[inline]
fn span(o: isize, n: usize) -> (usize, usize) {
    let lo = o.max(0) as usize;
    let hi = (n as isize + o).min(n as isize).max(0) as usize;
    (lo, hi.max(lo))
}

#[inline]
fn taps(dilation: usize) -> impl Iterator<Item = (usize, isize, isize)> {
    let d = dilation as isize;
    (0..9).map(move |k| (k, (k as isize / 3 - 1) * d, (k as isize % 3 - 1) * d))
}

/// `out += w ⋆ input` for one channel.
pub(crate) fn accumulate<T: Real>(out: &mut [T], input: &[T], n: usize, w: &[T], dilation: usize) {
    for (k, oy, ox) in taps(dilation) {
        let wk = w[k];
        if wk == T::zero() {
            continue;
        }
        let (y0, y1) = span(oy, n);
        let (x0, x1) = span(ox, n);
        if x0 >= x1 {
            continue;
        }
        for y in y0..y1 {
            let src_row = (y as isize - oy) as usize * n;
            let src = &input
                [src_row + (x0 as isize - ox) as usize..src_row + (x1 as isize - ox) as usize];
            let dst = &mut out[y * n + x0..y * n + x1];
            for (o, &s) in dst.iter_mut().zip(src) {
                *o += wk * s;
            }
        }
    }
}

/// Adds `∂L/∂w` for one channel to `grad_w` and `∂L/∂input` to `grad_in`,
/// given `∂L/∂out` in `g`.
pub(crate) fn accumulate_adjoint<T: Real>(
    g: &[T],
    input: &[T],
    n: usize,
    w: &[T],
    dilation: usize,
    grad_w: &mut [T],
    mut grad_in: Option<&mut [T]>,
) {
    for (k, oy, ox) in taps(dilation) {
        let (y0, y1) = span(oy, n);
        let (x0, x1) = span(ox, n);
        if x0 >= x1 {
            continue;
        }
        let wk = w[k];
        let mut acc = T::zero();
        for y in y0..y1 {
            let src_row = (y as isize - oy) as usize * n;
            let lo = src_row + (x0 as isize - ox) as usize;
            let hi = src_row + (x1 as isize - ox) as usize;
            let gr = &g[y * n + x0..y * n + x1];
            acc += gr
                .iter()
                .zip(&input[lo..hi])
                .fold(T::zero(), |a, (&gv, &iv)| a + gv * iv);
            if let Some(gi) = grad_in.as_deref_mut() {
                if wk != T::zero() {
                    for (d, &gv) in gi[lo..hi].iter_mut().zip(gr) {
                        *d += wk * gv;
                    }
                }
            }
        }
        grad_w[k] += acc;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn delta() -> Vec<f64> {
        let mut w = vec![0.0; 9];
        w[4] = 1.0;
        w
    }

    #[test]
    fn delta_kernel_is_identity() {
        let img: Vec<f64> = (0..25).map(|v| v as f64 * 0.1).collect();
        for d in 1..4 {
            let k = ConvKernel::new(delta(), 0.0, d).unwrap();
            assert_eq!(conv2d_dilated(&img, 5, &k).unwrap(), img);
        }
    }

    #[test]
    fn box_kernel_sums_the_window() {
        let img = vec![0.5f64; 49];
        let k = ConvKernel::new(vec![1.0; 9], 0.0, 1).unwrap();
        let out = conv2d_dilated(&img, 7, &k).unwrap();
        assert_eq!(out[3 * 7 + 3], 4.5);
        // Corner sees a 2×2 window because of zero padding.
        assert_eq!(out[0], 2.0);
    }

    #[test]
    fn bias_is_added() {
        let k = ConvKernel::new(vec![0.0; 9], 0.75, 2).unwrap();
        let out = conv2d_dilated(&vec![1.0f32; 16], 4, &k).unwrap();
        assert!(out.iter().all(|&v| v == 0.75));
    }

    #[test]
    fn rejects_bad_shapes() {
        let k = ConvKernel::new(vec![1.0f32; 18], 0.0, 1).unwrap();
        assert_eq!(k.in_channels(), 2);
        assert!(conv2d_dilated(&vec![0.0; 16], 4, &k).is_err());
        assert!(ConvKernel::new(vec![1.0f32; 8], 0.0, 1).is_err());
        assert!(ConvKernel::new(vec![1.0f32; 9], 0.0, 0).is_err());
    }
}
