use serde::{Deserialize, Serialize};

use super::params::Parameters;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_hat: f64,
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps_hat: 1e-8,
            weight_decay: 0.1,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            ..Self::default()
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    m: Vec<Vec<f64>>,
    v: Vec<Vec<f64>>,
    step: u64,
}

impl AdamState {
    pub fn new<P: Parameters + ?Sized>(config: AdamConfig, params: &P) -> Self {
        let shapes = params.tensor_shapes();
        Self {
            config,
            m: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            v: shapes.iter().map(|&n| vec![0.0; n]).collect(),
            step: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One update. `trainable[i] == false` freezes tensor `i` (no decay, no
    /// moment update).
    pub fn step<P: Parameters + ?Sized>(
        &mut self,
        params: &mut P,
        grads: &P,
        trainable: Option<&[bool]>,
    ) -> Result<()> {
        let grads = grads.tensors();
        if grads.len() != self.m.len() {
            return Err(Error::DimensionMismatch {
                expected: self.m.len(),
                actual: grads.len(),
                context: "adam tensor count",
            });
        }
        for (g, m) in grads.iter().zip(&self.m) {
            if g.len() != m.len() {
                return Err(Error::DimensionMismatch {
                    expected: m.len(),
                    actual: g.len(),
                    context: "adam tensor shape",
                });
            }
        }
        if !grads.iter().all(|g| g.iter().all(|v| v.is_finite())) {
            return Err(Error::NonFinite("gradient"));
        }
        if let Some(mask) = trainable {
            if mask.len() != grads.len() {
                return Err(Error::DimensionMismatch {
                    expected: grads.len(),
                    actual: mask.len(),
                    context: "trainable mask length",
                });
            }
        }
        let mut tensors = params.tensors_mut();
        if tensors.len() != grads.len() {
            return Err(Error::DimensionMismatch {
                expected: grads.len(),
                actual: tensors.len(),
                context: "adam parameter tensor count",
            });
        }
        self.step += 1;
        let AdamConfig {
            lr,
            beta1,
            beta2,
            eps_hat,
            weight_decay,
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for (i, p) in tensors.iter_mut().enumerate() {
            if trainable.is_some_and(|mask| !mask[i]) {
                continue;
            }
            let (m, v, g) = (&mut self.m[i], &mut self.v[i], grads[i]);
            for j in 0..p.len() {
                p[j] -= lr * weight_decay * p[j];
                m[j] = beta1 * m[j] + (1.0 - beta1) * g[j];
                v[j] = beta2 * v[j] + (1.0 - beta2) * g[j] * g[j];
                let m_hat = m[j] / c1;
                let v_hat = v[j] / c2;
                p[j] -= lr * m_hat / (v_hat.sqrt() + eps_hat);
            }
        }
        Ok(())
    }
}

/// Free-function form of [`AdamState::step`].
pub fn adam_step<P: Parameters + ?Sized>(state: &mut AdamState, params: &mut P, grads: &P) -> Result<()> {
    state.step(params, grads, None)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_without_decay_is_noop() {
        let mut p = vec![1.0, -2.0, 0.5];
        let mut s = AdamState::new(AdamConfig::with_lr(1e-3, 0.0), &p);
        adam_step(&mut s, &mut p, &vec![0.0; 3]).unwrap();
        assert_eq!(p, vec![1.0, -2.0, 0.5]);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn zero_gradient_decay_only() {
        let orig = vec![1.0, -2.0, 0.5];
        let mut p = orig.clone();
        let mut s = AdamState::new(AdamConfig::with_lr(1e-3, 0.1), &p);
        adam_step(&mut s, &mut p, &vec![0.0; 3]).unwrap();
        for (a, b) in p.iter().zip(&orig) {
            assert!((a - b * (1.0 - 1e-4)).abs() < 1e-15);
        }
    }

    #[test]
    fn quadratic_bowl_converges() {
        let mut w = vec![1.0];
        let mut s = AdamState::new(AdamConfig::with_lr(1e-2, 0.0), &w);
        for _ in 0..2000 {
            let g = vec![2.0 * w[0]];
            adam_step(&mut s, &mut w, &g).unwrap();
        }
        assert!(w[0].abs() < 1e-3, "w = {}", w[0]);
    }

    #[test]
    fn rejects_non_finite_and_keeps_params() {
        let mut p = vec![1.0, 2.0];
        let mut s = AdamState::new(AdamConfig::default(), &p);
        assert!(adam_step(&mut s, &mut p, &vec![f64::NAN, 0.0]).is_err());
        assert_eq!(p, vec![1.0, 2.0]);
        assert_eq!(s.step_count(), 0);
        assert!(adam_step(&mut s, &mut p, &vec![0.0]).is_err());
    }

    #[test]
    fn frozen_tensors_do_not_move() {
        struct Two(Vec<f64>, Vec<f64>);
        impl Parameters for Two {
            fn tensors(&self) -> Vec<&[f64]> {
                vec![&self.0, &self.1]
            }
            fn tensors_mut(&mut self) -> Vec<&mut [f64]> {
                vec![&mut self.0, &mut self.1]
            }
        }
        let mut p = Two(vec![1.0], vec![1.0]);
        let g = Two(vec![1.0], vec![1.0]);
        let mut s = AdamState::new(AdamConfig::default(), &p);
        s.step(&mut p, &g, Some(&[false, true])).unwrap();
        assert_eq!(p.0, vec![1.0]);
        assert!(p.1[0] < 1.0);
    }
}
