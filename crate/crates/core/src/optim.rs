//! SGD with momentum, decoupled weight decay, and the truncated cosine
//! schedule `η_k = η0 · cos(7πk / 16K)`.

use std::f64::consts::PI;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SgdConfig {
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: SgdConfig,
    pub step: usize,
    pub total_steps: usize,
    velocity: Vec<f64>,
}

/// Learning rate of the cosine law at `step` out of `total`.
pub fn cosine_lr(base: f64, step: usize, total: usize) -> f64 {
    if total == 0 {
        return base;
    }
    base * (7.0 * PI * step as f64 / (16.0 * total as f64)).cos()
}

impl OptimizerState {
    pub fn new(config: SgdConfig, param_count: usize, total_steps: usize) -> Self {
        OptimizerState {
            config,
            step: 0,
            total_steps,
            velocity: vec![0.0; param_count],
        }
    }

    pub fn learning_rate(&self) -> f64 {
        cosine_lr(self.config.lr, self.step, self.total_steps)
    }

    pub fn velocity(&self) -> &[f64] {
        &self.velocity
    }
}

/// One update: `v ← μv + g`, `θ ← θ − η_k v − η_k λ θ`, then `k ← k + 1`.
pub fn sgd_step(params: &mut [f64], state: &mut OptimizerState, grad: &[f64]) -> Result<()> {
    if state.step >= state.total_steps {
        return Err(Error::ScheduleExhausted {
            step: state.step,
            total: state.total_steps,
        });
    }
    if grad.len() != params.len() || state.velocity.len() != params.len() {
        return Err(Error::Shape {
            what: "gradient",
            expected: params.len(),
            actual: grad.len(),
        });
    }
    let lr = state.learning_rate();
    let SgdConfig {
        momentum,
        weight_decay,
        ..
    } = state.config;
    for ((p, v), &g) in params.iter_mut().zip(&mut state.velocity).zip(grad) {
        *v = momentum * *v + g;
        *p -= lr * *v + lr * weight_decay * *p;
    }
    state.step += 1;
    Ok(())
}
