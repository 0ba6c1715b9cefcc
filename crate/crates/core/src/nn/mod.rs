//! Minimal layer library with hand-written backward passes.
//!
//! Every layer caches what its backward pass needs during `forward`, so a
//! `backward` call always refers to the most recent `forward` of that layer.

mod activation;
mod conv;
mod linear;
mod norm;
mod optim;

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::RngCore;

pub use activation::{Dropout, MaxPool2, Relu, Reshape, Sigmoid};
pub use conv::{Conv2d, ConvTranspose2d};
pub use linear::Linear;
pub use norm::BatchNorm;
pub use optim::Adam;

use crate::error::Error;
use crate::tensor::{Real, Tensor};

/// Training mode enables dropout and batch statistics.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

impl Mode {
    fn is_train(self) -> bool {
        self == Mode::Train
    }
}

#[derive(Debug, Clone)]
pub enum Layer<T> {
    Linear(Linear<T>),
    Conv(Conv2d<T>),
    ConvTranspose(ConvTranspose2d<T>),
    BatchNorm(BatchNorm<T>),
    Relu(Relu),
    Sigmoid(Sigmoid<T>),
    Dropout(Dropout<T>),
    MaxPool(MaxPool2),
    Reshape(Reshape),
}

impl<T: Real> Layer<T> {
    fn forward(&mut self, x: Tensor<T>, mode: Mode, rng: &mut dyn RngCore) -> Tensor<T> {
        match self {
            Layer::Linear(l) => l.forward(x),
            Layer::Conv(l) => l.forward(x),
            Layer::ConvTranspose(l) => l.forward(x),
            Layer::BatchNorm(l) => l.forward(x, mode.is_train()),
            Layer::Relu(l) => l.forward(x),
            Layer::Sigmoid(l) => l.forward(x),
            Layer::Dropout(l) => l.forward(x, mode.is_train(), rng),
            Layer::MaxPool(l) => l.forward(x),
            Layer::Reshape(l) => l.forward(x),
        }
    }

    fn backward(&mut self, grad: Tensor<T>, param_grads: bool) -> Tensor<T> {
        match self {
            Layer::Linear(l) => l.backward(grad, param_grads),
            Layer::Conv(l) => l.backward(grad, param_grads),
            Layer::ConvTranspose(l) => l.backward(grad, param_grads),
            Layer::BatchNorm(l) => l.backward(grad, param_grads),
            Layer::Relu(l) => l.backward(grad),
            Layer::Sigmoid(l) => l.backward(grad),
            Layer::Dropout(l) => l.backward(grad),
            Layer::MaxPool(l) => l.backward(grad),
            Layer::Reshape(l) => l.backward(grad),
        }
    }

    /// Trainable tensors with their gradient buffers.
    fn params_mut(&mut self) -> Vec<(&mut [T], &mut [T])> {
        match self {
            Layer::Linear(l) => alloc::vec![(&mut l.weight[..], &mut l.grad_weight[..]), (&mut l.bias[..], &mut l.grad_bias[..])],
            Layer::Conv(l) => alloc::vec![(&mut l.weight[..], &mut l.grad_weight[..]), (&mut l.bias[..], &mut l.grad_bias[..])],
            Layer::ConvTranspose(l) => {
                alloc::vec![(&mut l.weight[..], &mut l.grad_weight[..]), (&mut l.bias[..], &mut l.grad_bias[..])]
            }
            Layer::BatchNorm(l) => alloc::vec![(&mut l.gamma[..], &mut l.grad_gamma[..]), (&mut l.beta[..], &mut l.grad_beta[..])],
            _ => Vec::new(),
        }
    }

    /// Named persistent tensors: parameters plus normalization buffers.
    fn state(&self) -> Vec<(&'static str, &[T])> {
        match self {
            Layer::Linear(l) => alloc::vec![("weight", &l.weight[..]), ("bias", &l.bias[..])],
            Layer::Conv(l) => alloc::vec![("weight", &l.weight[..]), ("bias", &l.bias[..])],
            Layer::ConvTranspose(l) => alloc::vec![("weight", &l.weight[..]), ("bias", &l.bias[..])],
            Layer::BatchNorm(l) => alloc::vec![
                ("gamma", &l.gamma[..]),
                ("beta", &l.beta[..]),
                ("running_mean", &l.running_mean[..]),
                ("running_var", &l.running_var[..]),
            ],
            _ => Vec::new(),
        }
    }

    fn state_mut(&mut self) -> Vec<(&'static str, &mut Vec<T>)> {
        match self {
            Layer::Linear(l) => alloc::vec![("weight", &mut l.weight), ("bias", &mut l.bias)],
            Layer::Conv(l) => alloc::vec![("weight", &mut l.weight), ("bias", &mut l.bias)],
            Layer::ConvTranspose(l) => alloc::vec![("weight", &mut l.weight), ("bias", &mut l.bias)],
            Layer::BatchNorm(l) => alloc::vec![
                ("gamma", &mut l.gamma),
                ("beta", &mut l.beta),
                ("running_mean", &mut l.running_mean),
                ("running_var", &mut l.running_var),
            ],
            _ => Vec::new(),
        }
    }
}

/// Feed-forward stack of layers.
#[derive(Debug, Clone)]
pub struct Sequential<T> {
    layers: Vec<Layer<T>>,
}

impl<T: Real> Sequential<T> {
    pub fn new(layers: Vec<Layer<T>>) -> Self {
        Self { layers }
    }

    pub fn layers(&self) -> &[Layer<T>] {
        &self.layers
    }

    pub fn forward(&mut self, x: Tensor<T>, mode: Mode, rng: &mut dyn RngCore) -> Tensor<T> {
        self.layers.iter_mut().fold(x, |h, layer| layer.forward(h, mode, rng))
    }

    /// Backpropagates `grad` (w.r.t. the last output) and returns the gradient
    /// w.r.t. the last input. Parameter gradients accumulate only when
    /// `param_grads` is set.
    pub fn backward(&mut self, grad: Tensor<T>, param_grads: bool) -> Tensor<T> {
        self.layers.iter_mut().rev().fold(grad, |g, layer| layer.backward(g, param_grads))
    }

    pub fn zero_grad(&mut self) {
        for layer in &mut self.layers {
            for (_, g) in layer.params_mut() {
                g.fill(T::zero());
            }
        }
    }

    /// Trainable parameter count (normalization running buffers excluded).
    pub fn num_params(&self) -> usize {
        self.layers
            .iter()
            .flat_map(|l| l.state())
            .filter(|(name, _)| !name.starts_with("running_"))
            .map(|(_, t)| t.len())
            .sum()
    }

    pub(crate) fn params_mut(&mut self) -> Vec<(&mut [T], &mut [T])> {
        self.layers.iter_mut().flat_map(|l| l.params_mut()).collect()
    }

    /// Named tensors, keyed `"<layer index>.<tensor>"`.
    pub fn state(&self) -> Vec<(String, Vec<T>)> {
        self.layers
            .iter()
            .enumerate()
            .flat_map(|(i, l)| l.state().into_iter().map(move |(name, t)| (format!("{i}.{name}"), t.to_vec())))
            .collect()
    }

    /// Restores every named tensor; missing, extra or mis-sized entries are rejected.
    pub fn load_state(&mut self, state: &[(String, Vec<T>)]) -> Result<(), Error> {
        let expected: usize = self.layers.iter().map(|l| l.state().len()).sum();
        if state.len() != expected {
            return Err(Error::Checkpoint(format!("expected {expected} tensors, found {}", state.len())));
        }
        for (i, layer) in self.layers.iter_mut().enumerate() {
            for (name, slot) in layer.state_mut() {
                let key = format!("{i}.{name}");
                let (_, values) = state
                    .iter()
                    .find(|(k, _)| *k == key)
                    .ok_or_else(|| Error::Checkpoint(format!("missing tensor {key}")))?;
                if values.len() != slot.len() {
                    return Err(Error::Checkpoint(format!(
                        "tensor {key}: expected {} values, found {}",
                        slot.len(),
                        values.len()
                    )));
                }
                slot.copy_from_slice(values);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn probe_net(rng: &mut ChaCha8Rng) -> Sequential<f64> {
        Sequential::new(alloc::vec![
            Layer::Conv(Conv2d::new(2, 3, rng)),
            Layer::BatchNorm(BatchNorm::new(3)),
            Layer::Relu(Relu::default()),
            Layer::MaxPool(MaxPool2::default()),
            Layer::ConvTranspose(ConvTranspose2d::new(3, 2, rng)),
            Layer::BatchNorm(BatchNorm::new(2)),
            Layer::Sigmoid(Sigmoid::default()),
            Layer::Reshape(Reshape::new(&[2 * 4 * 4])),
            Layer::Linear(Linear::new(32, 3, rng)),
        ])
    }

    fn loss(y: &Tensor<f64>) -> f64 {
        y.data().iter().enumerate().map(|(i, v)| v * ((i % 5) as f64 - 2.0) + 0.5 * v * v).sum()
    }

    fn loss_grad(y: &Tensor<f64>) -> Tensor<f64> {
        let g = y.data().iter().enumerate().map(|(i, v)| (i % 5) as f64 - 2.0 + v).collect();
        Tensor::from_vec(y.shape(), g)
    }

    /// Central differences against the analytic input gradient, in both modes.
    #[test]
    fn sequential_input_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let mut net = probe_net(&mut rng);
        let x = Tensor::from_vec(&[2, 2, 4, 4], (0..64).map(|i| ((i * 37 % 17) as f64 / 17.0) - 0.4).collect());
        for mode in [Mode::Train, Mode::Eval] {
            let y = net.forward(x.clone(), mode, &mut rng);
            let analytic = net.backward(loss_grad(&y), false);
            let h = 1e-6;
            for idx in [0usize, 5, 17, 33, 40, 63] {
                let mut plus = x.clone();
                plus.data_mut()[idx] += h;
                let mut minus = x.clone();
                minus.data_mut()[idx] -= h;
                let mut a = net.clone();
                let mut b = net.clone();
                let fd = (loss(&a.forward(plus, mode, &mut rng)) - loss(&b.forward(minus, mode, &mut rng))) / (2.0 * h);
                let an = analytic.data()[idx];
                assert!((fd - an).abs() <= 1e-6 * (1.0 + fd.abs()), "{mode:?} idx {idx}: fd {fd} vs {an}");
            }
        }
    }

    #[test]
    fn parameter_gradient_matches_finite_differences() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut net = probe_net(&mut rng);
        let x = Tensor::from_vec(&[2, 2, 4, 4], (0..64).map(|i| ((i * 13 % 7) as f64 / 7.0) - 0.5).collect());
        net.zero_grad();
        let y = net.forward(x.clone(), Mode::Train, &mut rng);
        net.backward(loss_grad(&y), true);
        let analytic: Vec<Vec<f64>> = net.params_mut().into_iter().map(|(_, g)| g.to_vec()).collect();
        let h = 1e-6;
        for (p, grads) in analytic.iter().enumerate() {
            for idx in [0, grads.len() / 2, grads.len() - 1] {
                let eval = |delta: f64| {
                    let mut n = net.clone();
                    n.params_mut()[p].0[idx] += delta;
                    let mut r = ChaCha8Rng::seed_from_u64(0);
                    loss(&n.forward(x.clone(), Mode::Train, &mut r))
                };
                let fd = (eval(h) - eval(-h)) / (2.0 * h);
                assert!((fd - grads[idx]).abs() <= 1e-5 * (1.0 + fd.abs()), "param {p}[{idx}]: fd {fd} vs {}", grads[idx]);
            }
        }
    }

    #[test]
    fn state_round_trips_and_rejects_partial() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = probe_net(&mut rng);
        let mut other = probe_net(&mut rng);
        other.load_state(&net.state()).unwrap();
        assert_eq!(other.state(), net.state());
        let partial = &net.state()[1..];
        assert!(other.load_state(partial).is_err());
    }
}
