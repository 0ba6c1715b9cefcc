use alloc::vec;
use alloc::vec::Vec;

use crate::tensor::{Real, Tensor};

const EPS: f64 = 1e-5;
const MOMENTUM: f64 = 0.1;

/// Batch normalization over axis 1 of `[B, C, ...]` inputs.
///
/// Training passes normalize with batch statistics and update the running
/// estimates; evaluation passes use the running estimates only.
#[derive(Debug, Clone)]
pub struct BatchNorm<T> {
    pub(crate) channels: usize,
    pub(crate) gamma: Vec<T>,
    pub(crate) beta: Vec<T>,
    pub(crate) running_mean: Vec<T>,
    pub(crate) running_var: Vec<T>,
    pub(crate) grad_gamma: Vec<T>,
    pub(crate) grad_beta: Vec<T>,
    cache: Option<Cache<T>>,
}

#[derive(Debug, Clone)]
struct Cache<T> {
    xhat: Tensor<T>,
    inv_std: Vec<T>,
    train: bool,
}

impl<T: Real> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            channels,
            gamma: vec![T::one(); channels],
            beta: vec![T::zero(); channels],
            running_mean: vec![T::zero(); channels],
            running_var: vec![T::one(); channels],
            grad_gamma: vec![T::zero(); channels],
            grad_beta: vec![T::zero(); channels],
            cache: None,
        }
    }

    fn spatial(&self, x: &Tensor<T>) -> usize {
        assert!(x.shape().len() >= 2 && x.shape()[1] == self.channels, "batchnorm: channel mismatch");
        x.row_len() / self.channels
    }

    #[allow(clippy::needless_range_loop)]
    pub fn forward(&mut self, mut x: Tensor<T>, train: bool) -> Tensor<T> {
        let batch = x.batch();
        let spatial = self.spatial(&x);
        let count = batch * spatial;
        let mut inv_std = vec![T::zero(); self.channels];
        for c in 0..self.channels {
            let (mean, var) = if train {
                let mut sum = 0.0f64;
                let mut sq = 0.0f64;
                for b in 0..batch {
                    for v in &x.row(b)[c * spatial..(c + 1) * spatial] {
                        let v = v.as_f64();
                        sum += v;
                        sq += v * v;
                    }
                }
                let mean = sum / count as f64;
                let var = (sq / count as f64 - mean * mean).max(0.0);
                let unbiased = if count > 1 { var * count as f64 / (count - 1) as f64 } else { var };
                let m = T::lit(MOMENTUM);
                self.running_mean[c] = (T::one() - m) * self.running_mean[c] + m * T::lit(mean);
                self.running_var[c] = (T::one() - m) * self.running_var[c] + m * T::lit(unbiased);
                (T::lit(mean), T::lit(var))
            } else {
                (self.running_mean[c], self.running_var[c])
            };
            let istd = T::one() / (var + T::lit(EPS)).sqrt();
            inv_std[c] = istd;
            for b in 0..batch {
                for v in &mut x.row_mut(b)[c * spatial..(c + 1) * spatial] {
                    *v = (*v - mean) * istd;
                }
            }
        }
        let xhat = x.clone();
        for b in 0..batch {
            let row = x.row_mut(b);
            for c in 0..self.channels {
                let (g, be) = (self.gamma[c], self.beta[c]);
                for v in &mut row[c * spatial..(c + 1) * spatial] {
                    *v = g * *v + be;
                }
            }
        }
        self.cache = Some(Cache { xhat, inv_std, train });
        x
    }

    pub fn backward(&mut self, mut grad: Tensor<T>, param_grads: bool) -> Tensor<T> {
        let cache = self.cache.as_ref().expect("batchnorm: backward before forward");
        let batch = grad.batch();
        let spatial = self.spatial(&grad);
        let count = T::lit((batch * spatial) as f64);
        for c in 0..self.channels {
            let mut sum_dy = T::zero();
            let mut sum_dy_xhat = T::zero();
            for b in 0..batch {
                let range = c * spatial..(c + 1) * spatial;
                for (dy, xh) in grad.row(b)[range.clone()].iter().zip(&cache.xhat.row(b)[range]) {
                    sum_dy += *dy;
                    sum_dy_xhat += *dy * *xh;
                }
            }
            if param_grads {
                self.grad_gamma[c] += sum_dy_xhat;
                self.grad_beta[c] += sum_dy;
            }
            let scale = self.gamma[c] * cache.inv_std[c];
            for b in 0..batch {
                let range = c * spatial..(c + 1) * spatial;
                let xh = &cache.xhat.row(b)[range.clone()];
                let dy = &mut grad.row_mut(b)[range];
                if cache.train {
                    for (d, x) in dy.iter_mut().zip(xh) {
                        *d = scale * (*d - (sum_dy + *x * sum_dy_xhat) / count);
                    }
                } else {
                    dy.iter_mut().for_each(|d| *d *= scale);
                }
            }
        }
        grad
    }
}
