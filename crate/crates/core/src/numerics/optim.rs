use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};

/// A parameter tensor paired with its gradient, as handed to the optimizer.
pub struct ParamSlot<'a> {
    pub name: String,
    pub values: &'a mut [f64],
    pub grads: &'a [f64],
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// Bias-corrected adaptive-moment optimizer.
///
/// Moment buffers are allocated on the first step and must match the slot
/// layout on every later step.
#[derive(Debug, Clone)]
pub struct Adam {
    config: AdamConfig,
    step: u64,
    first: Vec<Vec<f64>>,
    second: Vec<Vec<f64>>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            step: 0,
            first: Vec::new(),
            second: Vec::new(),
        }
    }

    pub fn config(&self) -> &AdamConfig {
        &self.config
    }

    pub fn steps(&self) -> u64 {
        self.step
    }

    pub fn first_moments(&self) -> &[Vec<f64>] {
        &self.first
    }

    pub fn second_moments(&self) -> &[Vec<f64>] {
        &self.second
    }

    /// Applies one update. Nothing is modified if any gradient is non-finite.
    pub fn step(&mut self, mut slots: Vec<ParamSlot<'_>>) -> Result<()> {
        for slot in &slots {
            if slot.values.len() != slot.grads.len() {
                return Err(shape_err("Adam::step", slot.values.len(), slot.grads.len()));
            }
            if slot.grads.iter().any(|g| !g.is_finite()) {
                return Err(Error::NonFiniteGradient {
                    tensor: slot.name.clone(),
                });
            }
        }
        if self.step == 0 {
            self.first = slots.iter().map(|s| vec![0.0; s.values.len()]).collect();
            self.second = self.first.clone();
        } else if self.first.len() != slots.len()
            || self.first.iter().zip(&slots).any(|(m, s)| m.len() != s.values.len())
        {
            return Err(shape_err(
                "Adam::step moments",
                format!("{} tensors", self.first.len()),
                format!("{} tensors", slots.len()),
            ));
        }

        self.step += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let t = self.step as i32;
        let c1 = 1.0 - beta1.powi(t);
        let c2 = 1.0 - beta2.powi(t);
        for ((slot, m), v) in slots.iter_mut().zip(&mut self.first).zip(&mut self.second) {
            for i in 0..slot.values.len() {
                let g = slot.grads[i];
                m[i] = beta1 * m[i] + (1.0 - beta1) * g;
                v[i] = beta2 * v[i] + (1.0 - beta2) * g * g;
                let m_hat = m[i] / c1;
                let v_hat = v[i] / c2;
                slot.values[i] -= lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn slot<'a>(values: &'a mut [f64], grads: &'a [f64]) -> Vec<ParamSlot<'a>> {
        vec![ParamSlot {
            name: "p".into(),
            values,
            grads,
        }]
    }

    #[test]
    fn zero_gradient_leaves_params_unchanged() {
        let mut adam = Adam::new(AdamConfig::default());
        let mut p = [1.0, -2.0];
        adam.step(slot(&mut p, &[0.0, 0.0])).unwrap();
        assert_eq!(p, [1.0, -2.0]);
    }

    #[test]
    fn zero_gradient_decays_moments() {
        let mut adam = Adam::new(AdamConfig::default());
        let mut p = [1.0, -2.0];
        adam.step(slot(&mut p, &[0.5, -0.5])).unwrap();
        let m = adam.first_moments()[0].clone();
        let v = adam.second_moments()[0].clone();
        adam.step(slot(&mut p, &[0.0, 0.0])).unwrap();
        for i in 0..2 {
            assert_eq!(adam.first_moments()[0][i], 0.9 * m[i]);
            assert_eq!(adam.second_moments()[0][i], 0.999 * v[i]);
        }
    }

    #[test]
    fn first_step_matches_hand_evaluation() {
        // m = 0.1 g, v = 0.001 g^2, m_hat = g, v_hat = g^2 => dp = -lr * g / (|g| + eps)
        let cfg = AdamConfig::default();
        let g = 0.37;
        let mut adam = Adam::new(cfg);
        let mut p = [2.0];
        adam.step(slot(&mut p, &[g])).unwrap();
        let m = (1.0 - 0.9) * g;
        let v = (1.0 - 0.999) * g * g;
        let m_hat = m / (1.0 - 0.9);
        let v_hat = v / (1.0 - 0.999);
        let want = 2.0 - 1e-3 * m_hat / (v_hat.sqrt() + 1e-8);
        assert!((p[0] - want).abs() < 1e-15);
        assert!((p[0] - (2.0 - 1e-3)).abs() < 1e-10);
        assert_eq!(adam.steps(), 1);
    }

    #[test]
    fn deterministic_trajectory() {
        let run = || {
            let mut adam = Adam::new(AdamConfig::default());
            let mut p = [0.3, 0.1];
            for _ in 0..5 {
                adam.step(slot(&mut p, &[0.2, -0.7])).unwrap();
            }
            p
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn non_finite_gradient_names_tensor() {
        let mut adam = Adam::new(AdamConfig::default());
        let mut p = [1.0];
        let err = adam
            .step(vec![ParamSlot {
                name: "encoder.layer0.weight".into(),
                values: &mut p,
                grads: &[f64::NAN],
            }])
            .unwrap_err();
        assert!(err.to_string().contains("encoder.layer0.weight"));
        assert_eq!(p, [1.0]);
        assert_eq!(adam.steps(), 0);
    }

    #[test]
    fn layout_change_is_rejected() {
        let mut adam = Adam::new(AdamConfig::default());
        let mut p = [1.0, 2.0];
        adam.step(slot(&mut p, &[0.1, 0.1])).unwrap();
        let mut q = [1.0];
        assert!(adam.step(slot(&mut q, &[0.1])).is_err());
    }
}
