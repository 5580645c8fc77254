mod common;

use common::*;
use sirtnet::dataio::shepp_logan;
use sirtnet::geometry::{forward_project, inverse_col_sums, inverse_row_sums};
use sirtnet::metrics::psnr;
use sirtnet::solvers::{
    cgls, cgls_with_history, fbp, ramp_filter, ramp_kernel, sirt_run, sirt_step, weighted_residual,
    SirtState,
};
use sirtnet::{Image, ProjectionGeometry, Sinogram};

#[test]
fn first_sirt_step_matches_dense_arithmetic() {
    let g = ProjectionGeometry::parallel(10, 8).unwrap();
    let w = dense_matrix(&g);
    let p: Vec<f64> = matvec(&w, &to_f64(blob_image(8).as_slice()));
    let sino = Sinogram::from_vec(10, 8, p.iter().map(|&v| v as f32).collect()).unwrap();

    let row_sums: Vec<f64> = w.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<f64> = (0..64).map(|j| w.iter().map(|r| r[j]).sum()).collect();
    let rp: Vec<f64> = p
        .iter()
        .zip(&row_sums)
        .map(|(v, s)| if *s > 0.0 { v / s } else { 0.0 })
        .collect();
    let expect: Vec<f64> = matvec_t(&w, &rp)
        .iter()
        .zip(&col_sums)
        .map(|(v, s)| if *s > 0.0 { v / s } else { 0.0 })
        .collect();

    let state = sirt_step(SirtState::new(&g, &sino, g.blank_image()).unwrap());
    for (got, want) in state.x().as_slice().iter().zip(&expect) {
        assert!((*got as f64 - want).abs() < 1e-5 * (1.0 + want.abs()));
    }
}

#[test]
fn weighted_residual_matches_dense_oracle() {
    let g = ProjectionGeometry::parallel(10, 8).unwrap();
    let w = dense_matrix(&g);
    let x = blob_image(8);
    let p = Sinogram::from_vec(10, 8, (0..80).map(|i| (i % 7) as f32 * 0.3).collect()).unwrap();
    let wx = matvec(&w, &to_f64(x.as_slice()));
    let expect: f64 = w
        .iter()
        .zip(wx.iter().zip(p.as_slice()))
        .map(|(row, (q, &pi))| {
            let s: f64 = row.iter().sum();
            let r = if s > 0.0 { 1.0 / s } else { 0.0 };
            r * (q - pi as f64).powi(2)
        })
        .sum();
    let got = weighted_residual(&x, &p, &g).unwrap();
    assert!((got - expect).abs() <= 1e-6 * expect);
}

#[test]
fn sirt_converges_monotonically_on_consistent_data() {
    let g = ProjectionGeometry::parallel(32, 32).unwrap();
    let x_true = blob_image(32);
    let p = forward_project(&x_true, &g).unwrap();
    let mut state = SirtState::new(&g, &p, g.blank_image()).unwrap();
    let initial = state.weighted_residual();
    let mut prev = initial;
    for _ in 0..200 {
        state.step();
        let now = state.weighted_residual();
        assert!(now <= prev * (1.0 + 1e-6), "{now} > {prev}");
        prev = now;
    }
    assert!(prev < 1e-3 * initial, "ratio {}", prev / initial);
}

#[test]
fn sirt_from_zero_is_linear_in_the_data() {
    let g = ProjectionGeometry::parallel(12, 16).unwrap();
    let p1 = forward_project(&blob_image(16), &g).unwrap();
    let p2 = Sinogram::from_vec(
        12,
        16,
        (0..192).map(|i| ((i * 37) % 11) as f32 / 5.0).collect(),
    )
    .unwrap();
    let (a, b) = (0.7f32, -1.3f32);
    let combo = Sinogram::from_vec(
        12,
        16,
        p1.as_slice()
            .iter()
            .zip(p2.as_slice())
            .map(|(u, v)| a * u + b * v)
            .collect(),
    )
    .unwrap();
    let zero = g.blank_image();
    let lhs = sirt_run(&zero, &combo, &g, 25).unwrap();
    let r1 = sirt_run(&zero, &p1, &g, 25).unwrap();
    let r2 = sirt_run(&zero, &p2, &g, 25).unwrap();
    let rhs = r1.map(|v| a * v).add_scaled(&r2, b).unwrap();
    let diff: f64 = lhs
        .as_slice()
        .iter()
        .zip(rhs.as_slice())
        .map(|(u, v)| ((u - v) as f64).powi(2))
        .sum();
    assert!(diff.sqrt() <= 1e-4 * norm(&to_f64(rhs.as_slice())));
}

#[test]
fn cgls_solves_a_consistent_system() {
    let g = ProjectionGeometry::parallel(10, 8).unwrap();
    let w = dense_matrix(&g);
    let x_true = blob_image(8);
    let p_vec = matvec(&w, &to_f64(x_true.as_slice()));
    let p = Sinogram::from_vec(10, 8, p_vec.iter().map(|&v| v as f32).collect()).unwrap();

    // The dense least-squares solution attains (numerically) zero residual.
    let ls = least_squares(&w, &p_vec, 1e-12);
    let ls_res: Vec<f64> = matvec(&w, &ls)
        .iter()
        .zip(&p_vec)
        .map(|(a, b)| a - b)
        .collect();
    assert!(norm(&ls_res) < 1e-6 * norm(&p_vec));

    let x = cgls(&p, &g, 64).unwrap();
    let res: Vec<f64> = matvec(&w, &to_f64(x.as_slice()))
        .iter()
        .zip(&p_vec)
        .map(|(a, b)| a - b)
        .collect();
    assert!(
        norm(&res) / norm(&p_vec) < 1e-4,
        "{}",
        norm(&res) / norm(&p_vec)
    );
}

#[test]
fn cgls_residual_is_monotone() {
    let g = ProjectionGeometry::parallel(9, 12).unwrap();
    // Inconsistent data: arbitrary pattern that is not in the range of W.
    let p = Sinogram::from_vec(
        9,
        12,
        (0..108).map(|i| ((i * 13) % 17) as f32 - 8.0).collect(),
    )
    .unwrap();
    let (_, history) = cgls_with_history(&p, &g, 30).unwrap();
    for w in history.windows(2) {
        assert!(w[1] <= w[0] * (1.0 + 1e-6), "{} > {}", w[1], w[0]);
    }
    let mut prev = f64::INFINITY;
    for k in [1, 2, 5, 10, 20, 30] {
        let x = cgls(&p, &g, k).unwrap();
        let q = forward_project(&x, &g).unwrap();
        let r: f64 = q
            .as_slice()
            .iter()
            .zip(p.as_slice())
            .map(|(a, b)| ((a - b) as f64).powi(2))
            .sum::<f64>()
            .sqrt();
        assert!(r <= prev * (1.0 + 1e-6));
        prev = r;
    }
}

#[test]
fn ramp_filter_matches_direct_convolution() {
    let g = ProjectionGeometry::parallel(3, 24).unwrap();
    let p = Sinogram::from_vec(
        3,
        24,
        (0..72)
            .map(|i| ((i * 7) % 5) as f32 + 0.5 * (i as f32).sin())
            .collect(),
    )
    .unwrap();
    let filtered = ramp_filter(&p, &g).unwrap();
    let len = 64;
    let h = ramp_kernel(len);
    let tap = |k: i64| -> f64 {
        // Linear-convolution kernel, independent of the padding.
        if k == 0 {
            0.25
        } else if k % 2 != 0 {
            -1.0 / (std::f64::consts::PI * k as f64).powi(2)
        } else {
            0.0
        }
    };
    assert_eq!(h[3], tap(3));
    for a in 0..3 {
        for i in 0..24i64 {
            let direct: f64 = (0..24i64)
                .map(|k| p.get(a, k as usize) as f64 * tap(i - k))
                .sum::<f64>()
                * 2.0;
            assert!(
                (filtered.get(a, i as usize) as f64 - direct).abs() < 1e-5,
                "{a},{i}"
            );
        }
    }
}

#[test]
fn normalisation_diagonals_are_finite() {
    let g = ProjectionGeometry::parallel(20, 64).unwrap();
    assert!(inverse_row_sums(&g)
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0));
    assert!(inverse_col_sums(&g)
        .as_slice()
        .iter()
        .all(|v| v.is_finite() && *v >= 0.0));
    let _ = Image::zeros(1);
}

#[test]
fn fbp_of_zero_is_zero() {
    let g = ProjectionGeometry::parallel(12, 16).unwrap();
    let x = fbp(&g.blank_sinogram(), &g).unwrap();
    assert!(x.as_slice().iter().all(|&v| v == 0.0));
}

#[test]
fn fbp_dense_view_quality() {
    let phantom = shepp_logan(64);
    let g = ProjectionGeometry::parallel(180, 64).unwrap();
    let p = forward_project(&phantom, &g).unwrap();
    let db = psnr(&fbp(&p, &g).unwrap(), &phantom, 1.0).unwrap();
    println!("dense-view FBP PSNR {db:.2} dB");
    assert!(db >= 25.0, "{db}");
}

#[test]
fn sparse_view_fbp_trails_sirt() {
    let phantom = shepp_logan(64);
    let g = ProjectionGeometry::parallel(20, 64).unwrap();
    let p = forward_project(&phantom, &g).unwrap();
    let f = psnr(&fbp(&p, &g).unwrap(), &phantom, 1.0).unwrap();
    let s = psnr(
        &sirt_run(&g.blank_image(), &p, &g, 200).unwrap(),
        &phantom,
        1.0,
    )
    .unwrap();
    println!("20 angles: FBP {f:.2} dB, SIRT {s:.2} dB");
    assert!(s > f + 1.0);
}
