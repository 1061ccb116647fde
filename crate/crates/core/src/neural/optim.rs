//! Adam with a per-epoch multiplicative learning-rate decay.

use super::tensor::{Gradients, ParamStore};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub adam_epsilon: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    /// Factor applied to the learning rate once per epoch.
    pub epoch_decay: f64,
    pub epochs: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            learning_rate: 1e-3,
            adam_epsilon: 1e-3,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            epoch_decay: 0.95,
            epochs: 10,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0) {
            return Err(Error::config("learning_rate must be positive"));
        }
        if !(self.epoch_decay > 0.0 && self.epoch_decay <= 1.0) {
            return Err(Error::config("epoch_decay must lie in (0, 1]"));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::config("adam betas must lie in [0, 1)"));
        }
        if !(self.adam_epsilon > 0.0) {
            return Err(Error::config("adam_epsilon must be positive"));
        }
        Ok(())
    }

    /// Learning rate used throughout `epoch` (0-based).
    pub fn lr_at(&self, epoch: usize) -> f64 {
        epoch_lr(self.learning_rate, epoch, self.epoch_decay)
    }
}

/// `base_lr * decay^epoch`.
pub fn epoch_lr(base_lr: f64, epoch: usize, decay: f64) -> f64 {
    base_lr * decay.powi(epoch as i32)
}

/// First and second moment estimates for every parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
}

impl AdamState {
    pub fn new(store: &ParamStore) -> Self {
        let zeros: Vec<Vec<f64>> = store.iter().map(|(_, _, t)| vec![0.0; t.len()]).collect();
        AdamState {
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }
}

/// One bias-corrected Adam step: `theta -= lr * m_hat / (sqrt(v_hat) + eps)`.
/// Parameters without a gradient are updated with a zero gradient.
pub fn adam_update(
    state: &mut AdamState,
    store: &mut ParamStore,
    grads: &Gradients,
    lr: f64,
    config: &TrainConfig,
) -> Result<()> {
    if state.m.len() != store.len() || grads.len() != store.len() {
        return Err(Error::shape(format!(
            "adam state has {} tensors, store {}, gradients {}",
            state.m.len(),
            store.len(),
            grads.len()
        )));
    }
    let (b1, b2, eps) = (config.adam_beta1, config.adam_beta2, config.adam_epsilon);
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - b1.powi(t);
    let c2 = 1.0 - b2.powi(t);
    let ids: Vec<_> = store.iter().map(|(id, _, _)| id).collect();
    for id in ids {
        let i = id.index();
        let g = grads.get(id);
        let tensor = store.get_mut(id);
        if state.m[i].len() != tensor.len() {
            return Err(Error::shape(format!("adam moments for tensor {i} are mis-sized")));
        }
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (k, theta) in tensor.data.iter_mut().enumerate() {
            let gk = g.map_or(0.0, |g| g[k]);
            m[k] = b1 * m[k] + (1.0 - b1) * gk;
            v[k] = b2 * v[k] + (1.0 - b2) * gk * gk;
            let m_hat = m[k] / c1;
            let v_hat = v[k] / c2;
            *theta -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}
