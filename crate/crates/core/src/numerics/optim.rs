use serde::{Deserialize, Serialize};

use super::{ParamStore, Tensor};
use crate::error::{Result, ShineError};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 5e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Adam with bias correction. Moments are allocated lazily to match the store.
#[derive(Debug, Clone)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<Tensor>,
    second: Vec<Tensor>,
}

impl AdamState {
    pub fn new(config: AdamConfig) -> Self {
        AdamState {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn first_moments(&self) -> &[Tensor] {
        &self.first
    }

    /// One update using the gradients accumulated in `store`, at the configured
    /// learning rate scaled by `lr_scale` (for warmup schedules).
    pub fn step(&mut self, store: &mut ParamStore, lr_scale: f64) -> Result<()> {
        let lr = self.config.learning_rate * lr_scale;
        if !(lr > 0.0) {
            return Err(ShineError::Config(format!("learning rate must be positive, got {lr}")));
        }
        for p in store.iter_mut() {
            if !p.grad.is_finite() {
                return Err(ShineError::Numeric(format!("non-finite gradient for {}", p.name)));
            }
        }
        if self.first.is_empty() {
            self.first = store.iter().map(|(_, p)| Tensor::zeros_like(&p.value)).collect();
            self.second = self.first.clone();
        }
        if self.first.len() != store.len() {
            return Err(ShineError::Config("optimizer state does not match parameters".into()));
        }
        self.step += 1;
        let AdamConfig {
            beta1,
            beta2,
            epsilon,
            ..
        } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for ((p, m), v) in store.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            let g = p.grad.data();
            let m = m.data_mut();
            let v = v.data_mut();
            for (k, w) in p.value.data_mut().iter_mut().enumerate() {
                m[k] = beta1 * m[k] + (1.0 - beta1) * g[k];
                v[k] = beta2 * v[k] + (1.0 - beta2) * g[k] * g[k];
                let m_hat = m[k] / c1;
                let v_hat = v[k] / c2;
                *w -= lr * m_hat / (v_hat.sqrt() + epsilon);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_store(x: f64) -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("x", Tensor::scalar(x)).unwrap();
        s
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut store = scalar_store(1.5);
        let mut adam = AdamState::new(AdamConfig::default());
        adam.step(&mut store, 1.0).unwrap();
        assert_eq!(store.iter().next().unwrap().1.value.item(), 1.5);
        assert_eq!(adam.step, 1);
    }

    #[test]
    fn first_step_moves_by_learning_rate() {
        let mut store = scalar_store(0.0);
        store.iter_mut().next().unwrap().grad = Tensor::scalar(1.0);
        let mut adam = AdamState::new(AdamConfig {
            learning_rate: 0.1,
            ..AdamConfig::default()
        });
        adam.step(&mut store, 1.0).unwrap();
        let x = store.iter().next().unwrap().1.value.item();
        // m_hat = v_hat = 1, so the move is lr / (1 + eps).
        assert!((x + 0.1 / (1.0 + 1e-8)).abs() < 1e-15, "{x}");
    }

    #[test]
    fn converges_on_quadratic() {
        let mut store = scalar_store(0.0);
        let mut adam = AdamState::new(AdamConfig {
            learning_rate: 0.05,
            ..AdamConfig::default()
        });
        let mut reached = None;
        for step in 1..=2000 {
            let x = store.iter().next().unwrap().1.value.item();
            if (x - 3.0).abs() < 1e-3 {
                reached = Some(step);
                break;
            }
            store.iter_mut().next().unwrap().grad = Tensor::scalar(2.0 * (x - 3.0));
            adam.step(&mut store, 1.0).unwrap();
        }
        assert!(reached.is_some());
    }

    #[test]
    fn rejects_non_finite_gradient() {
        let mut store = scalar_store(0.0);
        store.iter_mut().next().unwrap().grad = Tensor::scalar(f64::NAN);
        let mut adam = AdamState::new(AdamConfig::default());
        assert!(matches!(adam.step(&mut store, 1.0), Err(ShineError::Numeric(_))));
    }
}
