use serde::{Deserialize, Serialize};

use crate::network::ParamVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub lr0: f64,
    pub decay_start: usize,
    pub decay_every: usize,
    pub decay_factor: f64,
    pub lr_min: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Geometric decay between the drops instead of piecewise-constant drops.
    pub smooth: bool,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr0: 1e-3,
            decay_start: 15_000,
            decay_every: 10_000,
            decay_factor: 0.1,
            lr_min: 1e-7,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            smooth: false,
        }
    }
}

impl AdamConfig {
    /// Learning rate at iteration `k` (0-based). Constant before
    /// `decay_start`; the first drop happens at `decay_start` and one more
    /// every `decay_every` steps after it.
    pub fn lr(&self, k: usize) -> f64 {
        if k < self.decay_start {
            return self.lr0;
        }
        let passed = (k - self.decay_start) as f64 / self.decay_every.max(1) as f64;
        let drops = if self.smooth {
            passed
        } else {
            passed.floor() + 1.0
        };
        (self.lr0 * self.decay_factor.powf(drops)).max(self.lr_min)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    /// Number of updates applied so far.
    pub t: usize,
}

impl AdamState {
    pub fn new(p: usize) -> Self {
        Self {
            m: vec![0.0; p],
            v: vec![0.0; p],
            t: 0,
        }
    }
}

/// One bias-corrected Adam update with the scheduled rate for `iteration`.
/// Returns `None` when the update is non-finite.
pub fn adam_step(
    state: &mut AdamState,
    params: &ParamVector,
    grad: &[f64],
    iteration: usize,
    cfg: &AdamConfig,
) -> Option<ParamVector> {
    state.t += 1;
    let t = state.t as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    let lr = cfg.lr(iteration);
    let mut step = vec![0.0; grad.len()];
    for i in 0..grad.len() {
        state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grad[i];
        state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
        step[i] = (state.m[i] / c1) / ((state.v[i] / c2).sqrt() + cfg.eps);
    }
    params.stepped(&step, lr)
}
