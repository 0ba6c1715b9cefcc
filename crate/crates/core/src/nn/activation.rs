use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::tensor::{Real, Tensor};

#[derive(Debug, Clone, Default)]
pub struct Relu {
    mask: Vec<bool>,
}

impl Relu {
    pub fn forward<T: Real>(&mut self, x: Tensor<T>) -> Tensor<T> {
        self.mask = x.data().iter().map(|v| *v > T::zero()).collect();
        x.map(|v| if v > T::zero() { v } else { T::zero() })
    }

    pub fn backward<T: Real>(&self, mut grad: Tensor<T>) -> Tensor<T> {
        for (g, keep) in grad.data_mut().iter_mut().zip(&self.mask) {
            if !keep {
                *g = T::zero();
            }
        }
        grad
    }
}

#[derive(Debug, Clone)]
pub struct Sigmoid<T> {
    output: Option<Tensor<T>>,
}

impl<T: Real> Default for Sigmoid<T> {
    fn default() -> Self {
        Self { output: None }
    }
}

impl<T: Real> Sigmoid<T> {
    pub fn forward(&mut self, x: Tensor<T>) -> Tensor<T> {
        let y = x.map(|v| T::one() / (T::one() + (-v).exp()));
        self.output = Some(y.clone());
        y
    }

    pub fn backward(&self, mut grad: Tensor<T>) -> Tensor<T> {
        let y = self.output.as_ref().expect("sigmoid: backward before forward");
        for (g, s) in grad.data_mut().iter_mut().zip(y.data()) {
            *g *= *s * (T::one() - *s);
        }
        grad
    }
}

/// Inverted dropout; identity outside training.
#[derive(Debug, Clone)]
pub struct Dropout<T> {
    pub(crate) rate: f64,
    scale: Vec<T>,
}

impl<T: Real> Dropout<T> {
    pub fn new(rate: f64) -> Self {
        assert!((0.0..1.0).contains(&rate), "dropout rate must lie in [0, 1)");
        Self { rate, scale: Vec::new() }
    }

    pub fn forward(&mut self, mut x: Tensor<T>, train: bool, rng: &mut dyn RngCore) -> Tensor<T> {
        if !train || self.rate == 0.0 {
            self.scale.clear();
            return x;
        }
        let keep = T::lit(1.0 / (1.0 - self.rate));
        self.scale = (0..x.len()).map(|_| if rng.random::<f64>() < self.rate { T::zero() } else { keep }).collect();
        for (v, s) in x.data_mut().iter_mut().zip(&self.scale) {
            *v *= *s;
        }
        x
    }

    pub fn backward(&self, mut grad: Tensor<T>) -> Tensor<T> {
        if !self.scale.is_empty() {
            for (g, s) in grad.data_mut().iter_mut().zip(&self.scale) {
                *g *= *s;
            }
        }
        grad
    }
}

/// 2x2 max pooling with stride 2 over `[B, C, H, W]` (H and W even).
#[derive(Debug, Clone, Default)]
pub struct MaxPool2 {
    argmax: Vec<usize>,
    input_shape: Vec<usize>,
}

impl MaxPool2 {
    pub fn forward<T: Real>(&mut self, x: Tensor<T>) -> Tensor<T> {
        let &[batch, c, h, w] = x.shape() else { panic!("maxpool expects [B, C, H, W]") };
        assert!(h % 2 == 0 && w % 2 == 0, "maxpool needs even spatial dims");
        let (oh, ow) = (h / 2, w / 2);
        let mut y = Tensor::zeros(&[batch, c, oh, ow]);
        self.argmax.clear();
        self.argmax.reserve(y.len());
        let src = x.data();
        for (plane, out) in y.data_mut().chunks_mut(oh * ow).enumerate() {
            let base = plane * h * w;
            for oy in 0..oh {
                for ox in 0..ow {
                    let mut best = base + 2 * oy * w + 2 * ox;
                    for (dy, dx) in [(0, 1), (1, 0), (1, 1)] {
                        let idx = base + (2 * oy + dy) * w + 2 * ox + dx;
                        if src[idx] > src[best] {
                            best = idx;
                        }
                    }
                    out[oy * ow + ox] = src[best];
                    self.argmax.push(best);
                }
            }
        }
        self.input_shape = x.shape().to_vec();
        y
    }

    pub fn backward<T: Real>(&self, grad: Tensor<T>) -> Tensor<T> {
        let mut dx = Tensor::zeros(&self.input_shape);
        let d = dx.data_mut();
        for (g, &idx) in grad.data().iter().zip(&self.argmax) {
            d[idx] += *g;
        }
        dx
    }
}

/// Reinterprets each sample as `tail` (e.g. flatten, or dense-to-feature-map).
#[derive(Debug, Clone)]
pub struct Reshape {
    pub(crate) tail: Vec<usize>,
    input_shape: Vec<usize>,
}

impl Reshape {
    pub fn new(tail: &[usize]) -> Self {
        Self { tail: tail.to_vec(), input_shape: Vec::new() }
    }

    pub fn forward<T: Real>(&mut self, x: Tensor<T>) -> Tensor<T> {
        self.input_shape = x.shape().to_vec();
        let mut shape = Vec::with_capacity(self.tail.len() + 1);
        shape.push(x.batch());
        shape.extend_from_slice(&self.tail);
        x.reshape(&shape)
    }

    pub fn backward<T: Real>(&self, grad: Tensor<T>) -> Tensor<T> {
        grad.reshape(&self.input_shape)
    }
}
