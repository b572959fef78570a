//! Multi-term autoencoder loss and the discriminator loss.
//!
//! `l_AE = a1 * l_MSE + a2 * l_adv + a3 * l_reg`, with `l_adv = 1 - D(G(x))`,
//! `l_reg` the per-pixel mean TV magnitude, and `l_DIS = 1 - D(gt) + D(G(x))`.
//! Batched inputs are averaged over batch items.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{Scalar, Tensor};
use crate::tv::{tv_sum, tv_sum_grad, TV_EPS};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LossWeights {
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        Self { alpha1: 1.0, alpha2: 1e-3, alpha3: 2e-8 }
    }
}

impl LossWeights {
    pub fn validate(&self) -> Result<()> {
        for (n, v) in [("alpha1", self.alpha1), ("alpha2", self.alpha2), ("alpha3", self.alpha3)] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidArgument(format!("{n} = {v} must be finite and >= 0")));
            }
        }
        Ok(())
    }
}

/// Mean squared error over every element; returns `(loss, dL/dpred)`.
pub fn loss_mse<T: Scalar>(pred: &Tensor<T>, gt: &Tensor<T>) -> Result<(T, Tensor<T>)> {
    if pred.dims() != gt.dims() {
        return Err(Error::ShapeMismatch(format!("mse {:?} vs {:?}", pred.dims(), gt.dims())));
    }
    let n = T::from_usize(pred.len()).unwrap();
    let two = T::from_f64_lossy(2.0);
    let mut grad = Tensor::zeros(pred.dims());
    let mut acc = T::zero();
    for ((g, &p), &t) in grad.data_mut().iter_mut().zip(pred.data()).zip(gt.data()) {
        let d = t - p;
        acc += d * d;
        *g = -two * d / n;
    }
    Ok((acc / n, grad))
}

/// `1 - d`; the derivative w.r.t. `d` is `-1`.
pub fn loss_adv<T: Scalar>(d_out: T) -> (T, T) {
    (T::one() - d_out, -T::one())
}

/// Mean smoothed TV magnitude per pixel, averaged over batch and channels;
/// returns `(loss, dL/dpred)`.
pub fn loss_tv<T: Scalar>(pred: &Tensor<T>) -> (T, Tensor<T>) {
    let (n, c, h, w) = pred.nchw();
    let planes = n * c;
    let per = T::one() / T::from_usize(planes * h * w).unwrap();
    let eps = T::from_f64_lossy(TV_EPS);
    let mut grad = Tensor::zeros(pred.dims());
    let mut acc = T::zero();
    for p in 0..planes {
        let x = &pred.data()[p * h * w..(p + 1) * h * w];
        acc += tv_sum(x, w, h, eps);
        tv_sum_grad(x, w, h, eps, per, &mut grad.data_mut()[p * h * w..(p + 1) * h * w]);
    }
    (acc * per, grad)
}

/// Gradients of `loss_ae` w.r.t. the prediction and the discriminator outputs.
#[derive(Debug, Clone)]
pub struct AeLoss<T> {
    pub total: T,
    pub mse: T,
    pub adv: T,
    pub reg: T,
    pub d_pred: Tensor<T>,
    /// `dL/dD(G(x))` for each batch item.
    pub d_dout: Vec<T>,
}

/// Weighted multi-loss. `d_out` holds `D(G(x))` per batch item; the
/// adversarial term is their mean.
pub fn loss_ae<T: Scalar>(pred: &Tensor<T>, gt: &Tensor<T>, d_out: &[T], w: &LossWeights) -> Result<AeLoss<T>> {
    w.validate()?;
    let (a1, a2, a3) = (T::from_f64_lossy(w.alpha1), T::from_f64_lossy(w.alpha2), T::from_f64_lossy(w.alpha3));
    let (mse, mut d_pred) = loss_mse(pred, gt)?;
    d_pred.data_mut().iter_mut().for_each(|g| *g *= a1);
    let mut total = a1 * mse;

    let (mut adv, mut d_dout) = (T::zero(), Vec::new());
    if !d_out.is_empty() {
        let nb = T::from_usize(d_out.len()).unwrap();
        for &d in d_out {
            let (l, g) = loss_adv(d);
            adv += l / nb;
            d_dout.push(a2 * g / nb);
        }
        total += a2 * adv;
    }

    let mut reg = T::zero();
    if w.alpha3 != 0.0 {
        let (r, g) = loss_tv(pred);
        reg = r;
        for (dst, &src) in d_pred.data_mut().iter_mut().zip(g.data()) {
            *dst += a3 * src;
        }
        total += a3 * r;
    }
    Ok(AeLoss { total, mse, adv, reg, d_pred, d_dout })
}

/// `1 - D(gt) + D(G(x))`, averaged over batch items. Returns the loss and the
/// per-item derivatives w.r.t. `d_real` and `d_fake`.
pub fn loss_dis<T: Scalar>(d_real: &[T], d_fake: &[T]) -> Result<(T, Vec<T>, Vec<T>)> {
    if d_real.len() != d_fake.len() || d_real.is_empty() {
        return Err(Error::ShapeMismatch(format!("discriminator batches {} and {}", d_real.len(), d_fake.len())));
    }
    let nb = T::from_usize(d_real.len()).unwrap();
    let loss = d_real.iter().zip(d_fake).map(|(&r, &f)| T::one() - r + f).sum::<T>() / nb;
    Ok((loss, vec![-T::one() / nb; d_real.len()], vec![T::one() / nb; d_fake.len()]))
}
