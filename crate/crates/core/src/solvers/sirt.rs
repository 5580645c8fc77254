use crate::error::Result;
use crate::geometry::{
    back_project, forward_project, inverse_col_sums, inverse_row_sums, Image, ProjectionGeometry,
    Sinogram,
};

/// The diagonal normalisations `R` (per ray) and `C` (per pixel) of a geometry.
#[derive(Debug, Clone, PartialEq)]
pub struct SirtWeights {
    geom: ProjectionGeometry,
    row: Vec<f32>,
    col: Image,
}

impl SirtWeights {
    pub fn new(geom: &ProjectionGeometry) -> Self {
        SirtWeights {
            geom: geom.clone(),
            row: inverse_row_sums(geom),
            col: inverse_col_sums(geom),
        }
    }

    pub fn row(&self) -> &[f32] {
        &self.row
    }

    pub fn col(&self) -> &Image {
        &self.col
    }

    fn matches(&self, geom: &ProjectionGeometry) -> bool {
        self.geom == *geom
    }
}

/// A SIRT iterate together with everything needed to advance it.
#[derive(Debug, Clone)]
pub struct SirtState<'a> {
    geom: &'a ProjectionGeometry,
    target: &'a Sinogram,
    weights: SirtWeights,
    x: Image,
    iteration: usize,
}

impl<'a> SirtState<'a> {
    pub fn new(geom: &'a ProjectionGeometry, target: &'a Sinogram, x0: Image) -> Result<Self> {
        Self::with_weights(geom, target, x0, SirtWeights::new(geom))
    }

    /// Reuses precomputed `R`/`C`; they are rebuilt if they belong to another geometry.
    pub fn with_weights(
        geom: &'a ProjectionGeometry,
        target: &'a Sinogram,
        x0: Image,
        weights: SirtWeights,
    ) -> Result<Self> {
        geom.check_image(&x0)?;
        geom.check_sinogram(target)?;
        let weights = if weights.matches(geom) {
            weights
        } else {
            SirtWeights::new(geom)
        };
        Ok(SirtState {
            geom,
            target,
            weights,
            x: x0,
            iteration: 0,
        })
    }

    /// `x ← x + C Wᵀ R (p − W x)`.
    pub fn step(&mut self) {
        let wx = forward_project(&self.x, self.geom).expect("state shapes are checked");
        let mut resid = wx;
        for ((r, &p), &w) in resid
            .as_mut_slice()
            .iter_mut()
            .zip(self.target.as_slice())
            .zip(&self.weights.row)
        {
            *r = w * (p - *r);
        }
        let update = back_project(&resid, self.geom).expect("state shapes are checked");
        for ((x, &u), &c) in self
            .x
            .as_mut_slice()
            .iter_mut()
            .zip(update.as_slice())
            .zip(self.weights.col.as_slice())
        {
            *x += c * u;
        }
        self.iteration += 1;
    }

    pub fn run(&mut self, n_iters: usize) {
        for _ in 0..n_iters {
            self.step();
        }
    }

    pub fn x(&self) -> &Image {
        &self.x
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn weights(&self) -> &SirtWeights {
        &self.weights
    }

    /// `(Wx − p)ᵀ R (Wx − p)` at the current iterate.
    pub fn weighted_residual(&self) -> f64 {
        residual_with(&self.x, self.target, self.geom, &self.weights.row)
    }

    pub fn into_image(self) -> Image {
        self.x
    }
}

/// One SIRT update, consuming and returning the state.
pub fn sirt_step(mut state: SirtState<'_>) -> SirtState<'_> {
    state.step();
    state
}

/// Runs `n_iters` SIRT updates from `x0`.
pub fn sirt_run(
    x0: &Image,
    p: &Sinogram,
    geom: &ProjectionGeometry,
    n_iters: usize,
) -> Result<Image> {
    let mut state = SirtState::new(geom, p, x0.clone())?;
    state.run(n_iters);
    Ok(state.into_image())
}

fn residual_with(x: &Image, p: &Sinogram, geom: &ProjectionGeometry, row: &[f32]) -> f64 {
    let wx = forward_project(x, geom).expect("shapes are checked");
    wx.as_slice()
        .iter()
        .zip(p.as_slice())
        .zip(row)
        .map(|((&q, &p), &r)| {
            let d = q as f64 - p as f64;
            r as f64 * d * d
        })
        .sum()
}

/// `Σ_i r_ii (Wx − p)_i²`.
pub fn weighted_residual(x: &Image, p: &Sinogram, geom: &ProjectionGeometry) -> Result<f64> {
    geom.check_image(x)?;
    geom.check_sinogram(p)?;
    Ok(residual_with(x, p, geom, &inverse_row_sums(geom)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_a_fixed_point_of_zero_data() {
        let g = ProjectionGeometry::parallel(6, 8).unwrap();
        let p = g.blank_sinogram();
        let s = sirt_step(SirtState::new(&g, &p, g.blank_image()).unwrap());
        assert_eq!(s.iteration(), 1);
        assert!(s.x().as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn zero_iterations_is_identity() {
        let g = ProjectionGeometry::parallel(6, 8).unwrap();
        let p = Sinogram::filled(6, 8, 2.0);
        let x0 = Image::filled(8, 0.3);
        assert_eq!(sirt_run(&x0, &p, &g, 0).unwrap(), x0);
    }

    #[test]
    fn one_iteration_matches_a_fresh_step() {
        let g = ProjectionGeometry::parallel(6, 8).unwrap();
        let mut x = g.blank_image();
        x.set(3, 4, 1.0);
        let p = forward_project(&x, &g).unwrap();
        let run = sirt_run(&g.blank_image(), &p, &g, 1).unwrap();
        let step = sirt_step(SirtState::new(&g, &p, g.blank_image()).unwrap());
        assert_eq!(&run, step.x());
    }

    #[test]
    fn residual_of_zero_image_is_weighted_data_norm() {
        let g = ProjectionGeometry::parallel(5, 6).unwrap();
        let p = Sinogram::filled(5, 6, 1.5);
        let r = inverse_row_sums(&g);
        let expect: f64 = r.iter().map(|&w| w as f64 * 2.25).sum();
        let got = weighted_residual(&g.blank_image(), &p, &g).unwrap();
        assert!((got - expect).abs() < 1e-9 * expect);
    }

    #[test]
    fn exact_solution_has_zero_residual() {
        let g = ProjectionGeometry::parallel(5, 6).unwrap();
        let x = Image::filled(6, 0.5);
        let p = forward_project(&x, &g).unwrap();
        assert!(weighted_residual(&x, &p, &g).unwrap() < 1e-10);
    }
}
