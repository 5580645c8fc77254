//! Independent reference implementations used by the integration suites.
//!
//! Nothing here calls into the projector or solvers under test; the dense
//! matrix is assembled element by element from closed-form expressions.

#![allow(dead_code)]

use sirtnet::ProjectionGeometry;

/// Joseph weight of pixel `(row, col)` for ray `(angle, det)`, evaluated
/// directly as a hat function of the distance between the ray crossing and
/// the pixel centre along the ray's minor axis.
pub fn joseph_weight(
    g: &ProjectionGeometry,
    angle: usize,
    det: usize,
    row: usize,
    col: usize,
) -> f64 {
    let n = g.image_size() as f64;
    let half = (n - 1.0) / 2.0;
    let theta = g.angles()[angle];
    let (s, c) = (theta.sin(), theta.cos());
    let t = (det as f64 - (g.n_detectors() as f64 - 1.0) / 2.0) * g.detector_spacing();
    let px = col as f64 - half;
    let py = half - row as f64;
    if c.abs() >= s.abs() {
        let x_ray = (t - py * s) / c;
        (1.0 - (x_ray - px).abs()).max(0.0) / c.abs()
    } else {
        let y_ray = (t - px * c) / s;
        (1.0 - (y_ray - py).abs()).max(0.0) / s.abs()
    }
}

/// Dense `m × n²` system matrix built from [`joseph_weight`].
pub fn dense_matrix(g: &ProjectionGeometry) -> Vec<Vec<f64>> {
    let n = g.image_size();
    let mut rows = Vec::with_capacity(g.n_rays());
    for a in 0..g.n_angles() {
        for d in 0..g.n_detectors() {
            let mut row = vec![0.0; n * n];
            for r in 0..n {
                for c in 0..n {
                    row[r * n + c] = joseph_weight(g, a, d, r, c);
                }
            }
            rows.push(row);
        }
    }
    rows
}

pub fn matvec(m: &[Vec<f64>], x: &[f64]) -> Vec<f64> {
    m.iter()
        .map(|row| row.iter().zip(x).map(|(a, b)| a * b).sum())
        .collect()
}

pub fn matvec_t(m: &[Vec<f64>], y: &[f64]) -> Vec<f64> {
    let cols = m.first().map_or(0, |r| r.len());
    let mut out = vec![0.0; cols];
    for (row, &yi) in m.iter().zip(y) {
        for (o, w) in out.iter_mut().zip(row) {
            *o += w * yi;
        }
    }
    out
}

/// Exact length of the line `x cos θ + y sin θ = t` inside the unit pixel
/// centred at `(px, py)`, by slab clipping.
pub fn chord_length(theta: f64, t: f64, px: f64, py: f64) -> f64 {
    let (s, c) = (theta.sin(), theta.cos());
    // Parametrise along the ray: (x, y) = t(c, s) + u(-s, c).
    let (ox, oy) = (t * c, t * s);
    let (dx, dy) = (-s, c);
    let mut lo = f64::NEG_INFINITY;
    let mut hi = f64::INFINITY;
    for (o, d, centre) in [(ox, dx, px), (oy, dy, py)] {
        let (a, b) = (centre - 0.5, centre + 0.5);
        if d.abs() < 1e-15 {
            if o < a || o > b {
                return 0.0;
            }
        } else {
            let (u0, u1) = ((a - o) / d, (b - o) / d);
            lo = lo.max(u0.min(u1));
            hi = hi.min(u0.max(u1));
        }
    }
    (hi - lo).max(0.0)
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

pub fn to_f64(v: &[f32]) -> Vec<f64> {
    v.iter().map(|&x| x as f64).collect()
}

/// Solves the square system `a x = b` by Gaussian elimination with partial pivoting.
pub fn solve_dense(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            if f != 0.0 {
                for k in col..n {
                    a[row][k] -= f * a[col][k];
                }
                b[row] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x
}

/// Least-squares solution of `w x ≈ p` via ridge-stabilised normal equations.
pub fn least_squares(w: &[Vec<f64>], p: &[f64], ridge: f64) -> Vec<f64> {
    let n = w[0].len();
    let mut ata = vec![vec![0.0; n]; n];
    for row in w {
        for i in 0..n {
            if row[i] == 0.0 {
                continue;
            }
            for j in 0..n {
                ata[i][j] += row[i] * row[j];
            }
        }
    }
    for (i, r) in ata.iter_mut().enumerate() {
        r[i] += ridge;
    }
    solve_dense(ata, matvec_t(w, p))
}

/// Smooth, positive test object: a few overlapping Gaussian blobs.
pub fn blob_image(n: usize) -> sirtnet::Image {
    let half = (n as f64 - 1.0) / 2.0;
    let blobs = [
        (0.0, 0.0, 0.35, 0.6),
        (0.3, -0.2, 0.15, 0.5),
        (-0.35, 0.25, 0.12, 0.4),
    ];
    let mut v = Vec::with_capacity(n * n);
    for r in 0..n {
        for c in 0..n {
            let x = (c as f64 - half) / half;
            let y = (half - r as f64) / half;
            let val: f64 = blobs
                .iter()
                .map(|(bx, by, s, a)| {
                    a * (-((x - bx).powi(2) + (y - by).powi(2)) / (2.0 * s * s)).exp()
                })
                .sum();
            v.push(val as f32);
        }
    }
    sirtnet::Image::from_vec(n, v).unwrap()
}
