//! Poisson counting noise on line integrals (Beer–Lambert model).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Sinogram;

/// Largest scaled line integral `p·μ` a dataset is allowed to reach.
pub const MAX_SCALED_INTEGRAL: f64 = 4.0;

/// Incident photon count per detector bin and the generator seed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseModel {
    pub i0: f64,
    pub seed: u64,
}

/// Attenuation scale `μ` such that `max(p)·μ = 4` over all given sinograms.
pub fn attenuation_scale<'a>(sinograms: impl IntoIterator<Item = &'a Sinogram>) -> f64 {
    let peak = sinograms
        .into_iter()
        .map(|s| s.max())
        .fold(0.0f32, f32::max) as f64;
    if peak > 0.0 {
        MAX_SCALED_INTEGRAL / peak
    } else {
        1.0
    }
}

/// Draws counts `c ~ Poisson(I0·exp(−p·μ))` and returns `−ln(max(c,1)/I0)/μ`.
pub fn apply_poisson_noise(sino: &Sinogram, model: &NoiseModel, mu_scale: f64) -> Result<Sinogram> {
    if !(model.i0.is_finite() && model.i0 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "incident intensity must be positive, got {}",
            model.i0
        )));
    }
    if !(mu_scale.is_finite() && mu_scale > 0.0) {
        return Err(Error::InvalidInput(format!(
            "attenuation scale must be positive, got {mu_scale}"
        )));
    }
    let negatives = sino.as_slice().iter().filter(|&&p| p < 0.0).count();
    if negatives > 0 {
        log::warn!("clamping {negatives} negative line integrals to 0 before adding noise");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut out = sino.clone();
    for v in out.as_mut_slice() {
        let p = (*v as f64).max(0.0);
        let mean = model.i0 * (-p * mu_scale).exp();
        let counts = Poisson::new(mean)
            .map_err(|e| Error::InvalidInput(format!("poisson mean {mean}: {e}")))?
            .sample(&mut rng);
        *v = (-(counts.max(1.0) / model.i0).ln() / mu_scale) as f32;
    }
    Ok(out)
}
