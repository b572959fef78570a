use rand::Rng;

use super::{Scalar, Tensor};

/// Trainable tensor with its accumulated gradient.
#[derive(Debug, Clone)]
pub struct Param<T> {
    pub name: String,
    pub value: Tensor<T>,
    pub grad: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn zeros(name: impl Into<String>, dims: &[usize]) -> Self {
        Self { name: name.into(), value: Tensor::zeros(dims), grad: Tensor::zeros(dims) }
    }

    /// He-style uniform init: `U(-b, b)` with `b = sqrt(6 / fan_in)`.
    pub fn he_uniform(name: impl Into<String>, dims: &[usize], fan_in: usize, rng: &mut impl Rng) -> Self {
        let bound = (6.0 / fan_in as f64).sqrt();
        let mut p = Self::zeros(name, dims);
        for v in p.value.data_mut() {
            *v = T::from_f64_lossy(rng.gen_range(-bound..bound));
        }
        p
    }

    pub fn zero_grad(&mut self) {
        self.grad.fill(T::zero());
    }
}

/// Anything that owns parameters, in a fixed registration order.
pub trait Module<T: Scalar> {
    fn params(&self) -> Vec<&Param<T>>;
    fn params_mut(&mut self) -> Vec<&mut Param<T>>;

    fn zero_grad(&mut self) {
        for p in self.params_mut() {
            p.zero_grad();
        }
    }

    fn param_count(&self) -> usize {
        self.params().iter().map(|p| p.value.len()).sum()
    }
}
