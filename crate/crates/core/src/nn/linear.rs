use alloc::vec;
use alloc::vec::Vec;
#[cfg(not(feature = "std"))]
use num_traits::Float as _;

use rand::{Rng, RngCore};

use crate::tensor::{Real, Tensor};

/// Fully connected layer, `y = x W^T + b`, weight stored `[out, in]`.
#[derive(Debug, Clone)]
pub struct Linear<T> {
    pub(crate) in_features: usize,
    pub(crate) out_features: usize,
    pub(crate) weight: Vec<T>,
    pub(crate) bias: Vec<T>,
    pub(crate) grad_weight: Vec<T>,
    pub(crate) grad_bias: Vec<T>,
    input: Option<Tensor<T>>,
}

impl<T: Real> Linear<T> {
    pub fn new(in_features: usize, out_features: usize, rng: &mut dyn RngCore) -> Self {
        let bound = 1.0 / (in_features as f64).sqrt();
        let mut draw = || T::lit(rng.random_range(-bound..bound));
        let weight = (0..in_features * out_features).map(|_| draw()).collect();
        let bias = (0..out_features).map(|_| draw()).collect();
        Self {
            in_features,
            out_features,
            weight,
            bias,
            grad_weight: vec![T::zero(); in_features * out_features],
            grad_bias: vec![T::zero(); out_features],
            input: None,
        }
    }

    pub fn forward(&mut self, x: Tensor<T>) -> Tensor<T> {
        let batch = x.batch();
        assert_eq!(x.row_len(), self.in_features, "linear: input width mismatch");
        let mut y = Tensor::zeros(&[batch, self.out_features]);
        for b in 0..batch {
            y.row_mut(b).copy_from_slice(&self.bias);
        }
        let (i, o) = (self.in_features as isize, self.out_features as isize);
        T::gemm(
            batch,
            self.in_features,
            self.out_features,
            T::one(),
            x.data(),
            (i, 1),
            &self.weight,
            (1, i),
            T::one(),
            y.data_mut(),
            (o, 1),
        );
        self.input = Some(x);
        y
    }

    pub fn backward(&mut self, grad: Tensor<T>, param_grads: bool) -> Tensor<T> {
        let x = self.input.as_ref().expect("linear: backward before forward");
        let batch = x.batch();
        let (i, o) = (self.in_features as isize, self.out_features as isize);
        if param_grads {
            T::gemm(
                self.out_features,
                batch,
                self.in_features,
                T::one(),
                grad.data(),
                (1, o),
                x.data(),
                (i, 1),
                T::one(),
                &mut self.grad_weight,
                (i, 1),
            );
            for b in 0..batch {
                for (gb, g) in self.grad_bias.iter_mut().zip(grad.row(b)) {
                    *gb += *g;
                }
            }
        }
        let mut dx = Tensor::zeros(x.shape());
        T::gemm(
            batch,
            self.out_features,
            self.in_features,
            T::one(),
            grad.data(),
            (o, 1),
            &self.weight,
            (i, 1),
            T::zero(),
            dx.data_mut(),
            (i, 1),
        );
        dx
    }
}
