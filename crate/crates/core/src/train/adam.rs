use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Adam with bias correction and fixed `(0.9, 0.999, 1e-8)` coefficients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        Self { m: vec![0.0; len], v: vec![0.0; len], t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// One update of `params` in place. Non-finite gradients leave everything
    /// untouched and return an error.
    pub fn step(&mut self, params: &mut [f64], grads: &[f64], lr: f64) -> Result<()> {
        self.step_scaled(params, grads, lr, None)
    }

    /// As [`AdamState::step`], with parameter `i` moving at `lr * scale[i]`.
    pub fn step_scaled(&mut self, params: &mut [f64], grads: &[f64], lr: f64, scale: Option<&[f64]>) -> Result<()> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(Error::dims(self.m.len(), params.len().max(grads.len())));
        }
        if let Some(s) = scale {
            if s.len() != self.m.len() {
                return Err(Error::dims(self.m.len(), s.len()));
            }
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(Error::Divergence { step: self.t as usize });
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, ((p, g), (m, v))) in
            params.iter_mut().zip(grads).zip(self.m.iter_mut().zip(self.v.iter_mut())).enumerate()
        {
            *m = self.beta1 * *m + (1.0 - self.beta1) * g;
            *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
            let mhat = *m / c1;
            let vhat = *v / c2;
            let rate = scale.map_or(lr, |s| lr * s[i]);
            *p -= rate * mhat / (vhat.sqrt() + self.eps);
        }
        Ok(())
    }
}
