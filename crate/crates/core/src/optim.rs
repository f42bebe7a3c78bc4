//! Adam with bias correction.

use std::collections::BTreeMap;

use crate::autodiff::ParamId;
use crate::tensor::Tensor;

/// First and second moment estimates for one group of parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: u64,
    moments: BTreeMap<ParamId, (Vec<f64>, Vec<f64>)>,
}

impl Default for AdamState {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            moments: BTreeMap::new(),
        }
    }
}

impl AdamState {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// Drops all moment estimates and restarts bias correction.
    pub fn reset(&mut self) {
        self.step = 0;
        self.moments.clear();
    }

    /// Advances the step counter; call once per optimizer step, before the
    /// [`update`](Self::update) calls of that step.
    pub fn begin_step(&mut self) {
        self.step += 1;
    }

    pub fn update(&mut self, id: ParamId, param: &mut Tensor, grad: &Tensor, lr: f64) {
        assert_eq!(param.shape(), grad.shape(), "gradient shape for {id:?}");
        assert!(self.step > 0, "begin_step must precede update");
        let n = param.len();
        let (m, v) = self
            .moments
            .entry(id)
            .or_insert_with(|| (vec![0.0; n], vec![0.0; n]));
        let (b1, b2) = (self.beta1, self.beta2);
        let c1 = 1.0 - b1.powi(self.step as i32);
        let c2 = 1.0 - b2.powi(self.step as i32);
        let skip = lr == 0.0;
        for (((p, &g), mi), vi) in param.data_mut().iter_mut().zip(grad.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
            *mi = b1 * *mi + (1.0 - b1) * g;
            *vi = b2 * *vi + (1.0 - b2) * g * g;
            if !skip {
                let m_hat = *mi / c1;
                let v_hat = *vi / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}
