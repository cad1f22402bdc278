//! Adam optimizer over a ParamStore.

use super::params::ParamStore;
use std::collections::BTreeMap;

pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: BTreeMap<String, Vec<f64>>,
    v: BTreeMap<String, Vec<f64>>,
}

impl Adam {
    pub fn new(lr: f64) -> Self {
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: BTreeMap::new(),
            v: BTreeMap::new(),
        }
    }

    /// One update step using the accumulated gradients; clears nothing,
    /// callers zero the grads themselves.
    pub fn step(&mut self, store: &mut ParamStore) {
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (name, param) in store.iter_mut() {
            let m = self
                .m
                .entry(name.to_string())
                .or_insert_with(|| vec![0.0; param.grad.len()]);
            let v = self
                .v
                .entry(name.to_string())
                .or_insert_with(|| vec![0.0; param.grad.len()]);
            for i in 0..param.grad.len() {
                let g = param.grad[i];
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * g;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                param.value.data[i] -= self.lr * mhat / (vhat.sqrt() + self.eps);
            }
        }
    }
}
