use super::{Module, Param, Scalar};
use crate::error::{Error, Result};

pub const DEFAULT_LR: f64 = 1e-4;

/// Adam moments for one parameter tensor.
#[derive(Debug, Clone)]
pub struct AdamState<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(len: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, t: 0, m: vec![T::zero(); len], v: vec![T::zero(); len] }
    }

    /// Bias-corrected Adam update, then zero the gradient.
    pub fn step(&mut self, p: &mut Param<T>) -> Result<()> {
        if let Some(i) = p.grad.data().iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(format!("gradient of {} at index {i} is {:?}", p.name, p.grad.data()[i])));
        }
        self.apply(p);
        Ok(())
    }

    fn apply(&mut self, p: &mut Param<T>) {
        self.t += 1;
        let t = self.t as i32;
        let (b1, b2) = (T::from_f64_lossy(self.beta1), T::from_f64_lossy(self.beta2));
        let one = T::one();
        let c1 = T::from_f64_lossy(1.0 - self.beta1.powi(t));
        let c2 = T::from_f64_lossy(1.0 - self.beta2.powi(t));
        let lr = T::from_f64_lossy(self.lr);
        let eps = T::from_f64_lossy(self.eps);
        let values = p.value.data_mut();
        let grads = p.grad.data_mut();
        for i in 0..values.len() {
            let g = grads[i];
            self.m[i] = b1 * self.m[i] + (one - b1) * g;
            self.v[i] = b2 * self.v[i] + (one - b2) * g * g;
            let mhat = self.m[i] / c1;
            let vhat = self.v[i] / c2;
            values[i] -= lr * mhat / (vhat.sqrt() + eps);
            grads[i] = T::zero();
        }
    }
}

/// One `AdamState` per parameter of a module, in registration order.
#[derive(Debug, Clone)]
pub struct Adam<T> {
    states: Vec<AdamState<T>>,
}

impl<T: Scalar> Adam<T> {
    pub fn new<M: Module<T> + ?Sized>(module: &M, lr: f64) -> Self {
        Self { states: module.params().iter().map(|p| AdamState::new(p.value.len(), lr)).collect() }
    }

    /// Update every parameter. Nothing is modified if any gradient is
    /// non-finite.
    pub fn step<M: Module<T> + ?Sized>(&mut self, module: &mut M) -> Result<()> {
        let mut params = module.params_mut();
        for p in params.iter() {
            if let Some(i) = p.grad.data().iter().position(|g| !g.is_finite()) {
                return Err(Error::NonFinite(format!("gradient of {} at index {i}", p.name)));
            }
        }
        for (s, p) in self.states.iter_mut().zip(params.iter_mut()) {
            s.apply(p);
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::Tensor;

    fn scalar_param(v: f64, g: f64) -> Param<f64> {
        let mut p = Param::zeros("x", &[1]);
        p.value.data_mut()[0] = v;
        p.grad.data_mut()[0] = g;
        p
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [0.5, -3.0, 1e-3] {
            let mut p = scalar_param(1.0, g);
            let mut s = AdamState::new(1, 1e-4);
            s.step(&mut p).unwrap();
            let delta = (p.value.data()[0] - 1.0).abs();
            // bias-corrected first step: m_hat = g, v_hat = g^2
            let closed = 1e-4 * g.abs() / (g.abs() + 1e-8);
            assert!((delta - closed).abs() < 1e-12);
            assert!((delta - 1e-4).abs() < 1e-6);
            assert_eq!(p.grad.data()[0], 0.0);
        }
    }

    #[test]
    fn zero_grad_leaves_value() {
        let mut p = scalar_param(2.0, 0.0);
        let mut s = AdamState::new(1, 1e-4);
        s.step(&mut p).unwrap();
        assert_eq!(p.value.data()[0], 2.0);
        assert_eq!(s.t, 1);
    }

    #[test]
    fn non_finite_grad_rejected() {
        let mut p = scalar_param(2.0, f64::NAN);
        let mut s = AdamState::new(1, 1e-4);
        assert_eq!(s.step(&mut p).unwrap_err().kind(), "non_finite");
        assert_eq!(p.value.data()[0], 2.0);
    }

    #[test]
    fn two_steps_reduce_quadratic() {
        // loss x^2 / 2, gradient x; scalar simulation of the same recurrence
        let lr = 1e-2;
        let mut p = scalar_param(1.0, 1.0);
        let mut s = AdamState::new(1, lr);
        let (mut x, mut m, mut v) = (1.0f64, 0.0f64, 0.0f64);
        for t in 1..=2 {
            p.grad = Tensor::from_vec(&[1], vec![p.value.data()[0]]).unwrap();
            s.step(&mut p).unwrap();
            let g = x;
            m = 0.9 * m + 0.1 * g;
            v = 0.999 * v + 0.001 * g * g;
            x -= lr * (m / (1.0 - 0.9f64.powi(t))) / ((v / (1.0 - 0.999f64.powi(t))).sqrt() + 1e-8);
        }
        let got = p.value.data()[0];
        assert!((got - x).abs() < 1e-12);
        assert!(got * got / 2.0 < 0.5);
    }
}
