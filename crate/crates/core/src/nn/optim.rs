use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float as _;

use super::Sequential;
use crate::tensor::Real;

/// Adaptive-moment optimizer with bias correction.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    step: i32,
    moments: Vec<(Vec<T>, Vec<T>)>,
}

impl<T: Real> Adam<T> {
    pub fn new(lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, step: 0, moments: Vec::new() }
    }

    /// Applies one update to every parameter of `models` from their accumulated gradients.
    pub fn step(&mut self, models: &mut [&mut Sequential<T>]) {
        self.step += 1;
        let c1 = 1.0 - self.beta1.powi(self.step);
        let c2 = 1.0 - self.beta2.powi(self.step);
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let (a1, a2) = (T::lit(1.0 - self.beta1), T::lit(1.0 - self.beta2));
        // lr * m_hat / (sqrt(v_hat) + eps) with the bias corrections folded
        // into the step size and epsilon.
        let lr = T::lit(self.lr * c2.sqrt() / c1);
        let eps = T::lit(self.eps * c2.sqrt());
        let tiny = T::min_positive_value();
        let params = models.iter_mut().flat_map(|m| m.params_mut());
        for (slot, (values, grads)) in params.enumerate() {
            if slot == self.moments.len() {
                self.moments.push((vec![T::zero(); values.len()], vec![T::zero(); values.len()]));
            }
            let (m, v) = &mut self.moments[slot];
            for (((p, g), m), v) in values.iter_mut().zip(grads.iter()).zip(m.iter_mut()).zip(v.iter_mut()) {
                // Moments of parameters that stop receiving gradient decay
                // geometrically into subnormals, which are very slow on x86,
                // so they are flushed to zero.
                let m_next = b1 * *m + a1 * *g;
                let v_next = b2 * *v + a2 * *g * *g;
                *m = if m_next.abs() < tiny { T::zero() } else { m_next };
                *v = if v_next < tiny { T::zero() } else { v_next };
                *p -= lr * *m / (v.sqrt() + eps);
            }
        }
    }
}
