use serde::{Deserialize, Serialize};

use super::Real;
use crate::error::{Error, Result};

/// ADAM hyperparameters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Moment estimates and step count of an ADAM optimizer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl AdamState {
    pub fn new(config: AdamConfig, n_params: usize) -> Self {
        AdamState {
            config,
            m: vec![0.0; n_params],
            v: vec![0.0; n_params],
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }

    pub fn first_moment(&self) -> &[f64] {
        &self.m
    }

    pub fn second_moment(&self) -> &[f64] {
        &self.v
    }

    /// One bias-corrected ADAM update of `params` in place.
    pub fn update<T: Real>(&mut self, params: &mut [T], grads: &[T]) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch(format!(
                "optimizer tracks {} parameters, got {} params / {} grads",
                self.m.len(),
                params.len(),
                grads.len()
            )));
        }
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps,
        } = self.config;
        self.t += 1;
        let c1 = 1.0 - beta1.powi(self.t as i32);
        let c2 = 1.0 - beta2.powi(self.t as i32);
        for (((p, g), m), v) in params
            .iter_mut()
            .zip(grads)
            .zip(&mut self.m)
            .zip(&mut self.v)
        {
            let g = g.to_f64().expect("finite gradient");
            *m = beta1 * *m + (1.0 - beta1) * g;
            *v = beta2 * *v + (1.0 - beta2) * g * g;
            let m_hat = *m / c1;
            let v_hat = *v / c2;
            let next = p.to_f64().unwrap() - lr * m_hat / (v_hat.sqrt() + eps);
            *p = T::from(next).unwrap();
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_first_step_leaves_params() {
        let mut s = AdamState::new(AdamConfig::default(), 3);
        let mut p = vec![0.5f64, -1.0, 2.0];
        s.update(&mut p, &[0.0; 3]).unwrap();
        assert_eq!(p, vec![0.5, -1.0, 2.0]);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn first_step_is_normalised_gradient() {
        let cfg = AdamConfig {
            lr: 0.01,
            ..AdamConfig::default()
        };
        let mut s = AdamState::new(cfg, 4);
        let g = [3.0f64, -0.5, 1e-3, 1e-9];
        let mut p = vec![0.0f64; 4];
        s.update(&mut p, &g).unwrap();
        for (pi, gi) in p.iter().zip(&g) {
            let expect = -cfg.lr * gi / (gi.abs() + cfg.eps);
            assert!((pi - expect).abs() < 1e-15, "{pi} vs {expect}");
            assert!(pi.abs() <= cfg.lr);
        }
    }

    #[test]
    fn constant_gradient_has_unbiased_first_moment() {
        let cfg = AdamConfig::default();
        let mut s = AdamState::new(cfg, 1);
        let mut p = vec![0.0f64];
        for t in 1..=5 {
            s.update(&mut p, &[0.7]).unwrap();
            let m_hat = s.first_moment()[0] / (1.0 - cfg.beta1.powi(t));
            let v_hat = s.second_moment()[0] / (1.0 - cfg.beta2.powi(t));
            assert!((m_hat - 0.7).abs() < 1e-12);
            assert!((v_hat - 0.49).abs() < 1e-12);
        }
    }

    #[test]
    fn shape_mismatch() {
        let mut s = AdamState::new(AdamConfig::default(), 2);
        assert!(s.update(&mut [0.0f32; 3], &[0.0; 3]).is_err());
    }
}
