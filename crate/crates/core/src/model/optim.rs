//! AdamW with bias-corrected moments and decoupled weight decay.

use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamW {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
}

impl Default for AdamW {
    fn default() -> Self {
        AdamW {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

/// First and second moment estimates for one parameter buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl AdamState {
    pub fn new(len: usize) -> Self {
        AdamState {
            m: vec![0.0; len],
            v: vec![0.0; len],
            t: 0,
        }
    }
}

/// One update: `p ← p − lr·(m̂/(√v̂+ε) + weight_decay·p)`.
pub fn adamw_step(state: &mut AdamState, params: &mut [f64], grads: &[f64], cfg: &AdamW) {
    debug_assert_eq!(params.len(), grads.len());
    debug_assert_eq!(params.len(), state.m.len());
    state.t += 1;
    let t = state.t as f64;
    let bias1 = 1.0 - libm::pow(cfg.beta1, t);
    let bias2 = 1.0 - libm::pow(cfg.beta2, t);
    for (((p, &g), m), v) in params.iter_mut().zip(grads).zip(&mut state.m).zip(&mut state.v) {
        *m = cfg.beta1 * *m + (1.0 - cfg.beta1) * g;
        *v = cfg.beta2 * *v + (1.0 - cfg.beta2) * g * g;
        let m_hat = *m / bias1;
        let v_hat = *v / bias2;
        *p -= cfg.lr * (m_hat / (libm::sqrt(v_hat) + cfg.eps) + cfg.weight_decay * *p);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_fixed_point() {
        let mut p = [1.0, -2.0];
        let mut s = AdamState::new(2);
        for _ in 0..3 {
            adamw_step(&mut s, &mut p, &[0.0, 0.0], &AdamW::default());
        }
        assert_eq!(p, [1.0, -2.0]);
    }

    #[test]
    fn first_step_moves_by_lr() {
        let mut p = [1.0];
        let mut s = AdamState::new(1);
        let cfg = AdamW {
            lr: 0.01,
            ..AdamW::default()
        };
        adamw_step(&mut s, &mut p, &[1.0], &cfg);
        // m̂ = v̂ = 1 after bias correction.
        let expected = 1.0 - 0.01 * (1.0 / (1.0 + 1e-8));
        assert!((p[0] - expected).abs() < 1e-15);
        assert!((p[0] - 0.99).abs() < 1e-9);
    }

    #[test]
    fn pure_decay() {
        let mut p = [2.0];
        let mut s = AdamState::new(1);
        let cfg = AdamW {
            lr: 0.01,
            weight_decay: 0.1,
            ..AdamW::default()
        };
        adamw_step(&mut s, &mut p, &[0.0], &cfg);
        assert!((p[0] - 2.0 * (1.0 - 0.001)).abs() < 1e-15);
    }
}
