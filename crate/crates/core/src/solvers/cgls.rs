use crate::error::{Error, Result};
use crate::geometry::{back_project, forward_project, Image, ProjectionGeometry, Sinogram};

const STAGNATION: f64 = 1e-12;

fn to_image(n: usize, v: &[f64]) -> Image {
    Image::from_vec(n, v.iter().map(|&x| x as f32).collect()).expect("finite iterate")
}

fn norm_sq(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum()
}

/// CGLS on `min ‖Wx − p‖₂` from `x = 0`.
pub fn cgls(p: &Sinogram, geom: &ProjectionGeometry, n_iters: usize) -> Result<Image> {
    cgls_with_history(p, geom, n_iters).map(|(x, _)| x)
}

/// As [`cgls`], also returning `‖Wx_k − p‖₂` for `k = 0..=iterations run`.
pub fn cgls_with_history(
    p: &Sinogram,
    geom: &ProjectionGeometry,
    n_iters: usize,
) -> Result<(Image, Vec<f64>)> {
    geom.check_sinogram(p)?;
    if n_iters == 0 {
        return Err(Error::InvalidInput(
            "CGLS needs at least one iteration".into(),
        ));
    }
    let n = geom.image_size();
    let mut x = vec![0.0f64; geom.n_pixels()];
    let mut r: Vec<f64> = p.as_slice().iter().map(|&v| v as f64).collect();
    let mut history = vec![norm_sq(&r).sqrt()];

    let mut s = to_f64(back_project(&to_sino(geom, &r), geom)?.as_slice());
    let mut d = s.clone();
    let mut gamma = norm_sq(&s);

    for _ in 0..n_iters {
        if norm_sq(&d).sqrt() < STAGNATION {
            break;
        }
        let q = to_f64(forward_project(&to_image(n, &d), geom)?.as_slice());
        let qq = norm_sq(&q);
        if qq == 0.0 {
            break;
        }
        let alpha = gamma / qq;
        for (xi, di) in x.iter_mut().zip(&d) {
            *xi += alpha * di;
        }
        for (ri, qi) in r.iter_mut().zip(&q) {
            *ri -= alpha * qi;
        }
        history.push(norm_sq(&r).sqrt());

        s = to_f64(back_project(&to_sino(geom, &r), geom)?.as_slice());
        let gamma_next = norm_sq(&s);
        let beta = gamma_next / gamma;
        gamma = gamma_next;
        for (di, si) in d.iter_mut().zip(&s) {
            *di = si + beta * *di;
        }
    }
    Ok((to_image(n, &x), history))
}

fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

fn to_sino(geom: &ProjectionGeometry, v: &[f64]) -> Sinogram {
    Sinogram::from_vec(
        geom.n_angles(),
        geom.n_detectors(),
        v.iter().map(|&x| x as f32).collect(),
    )
    .expect("finite residual")
}
