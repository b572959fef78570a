//! U-Net autoencoder and the encoder-based discriminator.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::netspec::NetSpec;
use crate::error::{Error, Result};
use crate::nn::{
    concat_channels, global_mean, global_mean_backward, sigmoid, split_channels, Conv3x3, LeakyRelu, MaxPool2, Module,
    Param, Scalar, Tensor, UpConv2x2, DEFAULT_LEAKY_SLOPE,
};

/// Spatial dims must be multiples of this (four 2x2 pools).
pub const SIZE_MULTIPLE: usize = 16;

/// Conv1_1 .. Conv5_2 with LeakyReLU after every conv and four max pools.
#[derive(Debug, Clone)]
pub struct Encoder<T> {
    convs: Vec<Conv3x3<T>>,
    acts: Vec<LeakyRelu<T>>,
    pools: Vec<MaxPool2>,
}

impl<T: Scalar> Encoder<T> {
    pub fn new(spec: &NetSpec, prefix: &str, rng: &mut ChaCha8Rng) -> Self {
        let mut convs = Vec::new();
        let mut c = spec.in_channels;
        for (lvl, &w) in spec.widths().iter().enumerate() {
            convs.push(Conv3x3::new(&format!("{prefix}conv{}_1", lvl + 1), c, w, rng));
            convs.push(Conv3x3::new(&format!("{prefix}conv{}_2", lvl + 1), w, w, rng));
            c = w;
        }
        Self {
            acts: (0..10).map(|_| LeakyRelu::new(DEFAULT_LEAKY_SLOPE)).collect(),
            pools: (0..4).map(|_| MaxPool2::new()).collect(),
            convs,
        }
    }

    /// Returns the four skip tensors (outputs of levels 1..4) and the bottom.
    pub fn forward(&mut self, x: &Tensor<T>) -> Result<(Vec<Tensor<T>>, Tensor<T>)> {
        let (_, _, h, w) = x.nchw();
        if h % SIZE_MULTIPLE != 0 || w % SIZE_MULTIPLE != 0 {
            return Err(Error::ShapeMismatch(format!("network input {h}x{w} is not a multiple of {SIZE_MULTIPLE}")));
        }
        let mut skips = Vec::with_capacity(4);
        let mut cur = x.clone();
        for lvl in 0..5 {
            if lvl > 0 {
                cur = self.pools[lvl - 1].forward(&cur)?;
            }
            for k in 0..2 {
                let i = 2 * lvl + k;
                let y = self.convs[i].forward(&cur)?;
                cur = self.acts[i].forward_owned(y);
            }
            if lvl < 4 {
                skips.push(cur.clone());
            }
        }
        Ok((skips, cur))
    }

    /// `d_skips[l]` is the gradient arriving at skip `l` from the decoder.
    pub fn backward(&mut self, d_bottom: Tensor<T>, mut d_skips: Option<Vec<Tensor<T>>>) -> Tensor<T> {
        let mut g = d_bottom;
        for lvl in (0..5).rev() {
            if lvl < 4 {
                if let Some(ds) = d_skips.as_mut() {
                    for (a, &b) in g.data_mut().iter_mut().zip(ds[lvl].data()) {
                        *a += b;
                    }
                }
            }
            for k in (0..2).rev() {
                let i = 2 * lvl + k;
                g = self.acts[i].backward(g);
                g = self.convs[i].backward(&g);
            }
            if lvl > 0 {
                g = self.pools[lvl - 1].backward(&g);
            }
        }
        g
    }

    pub fn params(&self) -> Vec<&Param<T>> {
        self.convs.iter().flat_map(|c| c.params()).collect()
    }

    pub fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        self.convs.iter_mut().flat_map(|c| c.params_mut()).collect()
    }
}

/// Full-width autoencoder with a residual skip from the centre input channel:
/// `y = x[skip] + r(x)`. Conv9_3 starts at zero, so a fresh network is the
/// identity on its skip channel.
#[derive(Debug, Clone)]
pub struct Autoencoder<T> {
    spec: NetSpec,
    enc: Encoder<T>,
    ups: Vec<UpConv2x2<T>>,
    up_acts: Vec<LeakyRelu<T>>,
    /// conv6_1, conv6_2, .., conv9_1, conv9_2, conv9_3
    convs: Vec<Conv3x3<T>>,
    acts: Vec<LeakyRelu<T>>,
    in_dims: Vec<usize>,
}

impl<T: Scalar> Autoencoder<T> {
    pub fn new(spec: NetSpec, seed: u64) -> Result<Self> {
        Self::named(spec, seed, "")
    }

    /// Parameter names get `prefix` prepended, e.g. `"g1."`.
    pub fn named(spec: NetSpec, seed: u64, prefix: &str) -> Result<Self> {
        spec.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let enc = Encoder::new(&spec, prefix, &mut rng);
        let w = spec.widths();
        let mut ups = Vec::new();
        let mut convs = Vec::new();
        for (i, l) in (6..=9).enumerate() {
            let (from, to) = (w[4 - i], w[3 - i]);
            ups.push(UpConv2x2::new(&format!("{prefix}upconv{l}"), from, to, &mut rng));
            convs.push(Conv3x3::new(&format!("{prefix}conv{l}_1"), 2 * to, to, &mut rng));
            if l < 9 {
                convs.push(Conv3x3::new(&format!("{prefix}conv{l}_2"), to, to, &mut rng));
            }
        }
        convs.push(Conv3x3::new(&format!("{prefix}conv9_2"), w[0], spec.penultimate(), &mut rng));
        let mut last = Conv3x3::new(&format!("{prefix}conv9_3"), spec.penultimate(), 1, &mut rng);
        last.w.value.fill(T::zero());
        convs.push(last);
        Ok(Self {
            spec,
            enc,
            ups,
            up_acts: (0..4).map(|_| LeakyRelu::new(DEFAULT_LEAKY_SLOPE)).collect(),
            convs,
            acts: (0..8).map(|_| LeakyRelu::new(DEFAULT_LEAKY_SLOPE)).collect(),
            in_dims: Vec::new(),
        })
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    /// Residual branch only, `(n, 1, h, w)`.
    pub fn forward_residual(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, c, _, _) = x.nchw();
        if c != self.spec.in_channels {
            return Err(Error::ShapeMismatch(format!("network expects {} channels, got {c}", self.spec.in_channels)));
        }
        self.in_dims = x.dims().to_vec();
        let (skips, mut cur) = self.enc.forward(x)?;
        for i in 0..4 {
            let u = self.ups[i].forward(&cur)?;
            let u = self.up_acts[i].forward_owned(u);
            cur = concat_channels(&u, &skips[3 - i])?;
            for k in 0..2 {
                let j = 2 * i + k;
                let y = self.convs[j].forward(&cur)?;
                cur = self.acts[j].forward_owned(y);
            }
        }
        self.convs[8].forward(&cur)
    }

    /// `x[skip] + r(x)`.
    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let mut r = self.forward_residual(x)?;
        let skip = x.channel(self.spec.skip_channel());
        for (a, &b) in r.data_mut().iter_mut().zip(skip.data()) {
            *a += b;
        }
        Ok(r)
    }

    /// Backward of `forward_residual`; returns the input gradient.
    pub fn backward_residual(&mut self, dr: &Tensor<T>) -> Tensor<T> {
        let mut g = self.convs[8].backward(dr);
        let mut d_skips: Vec<Tensor<T>> = Vec::with_capacity(4);
        for i in (0..4).rev() {
            for k in (0..2).rev() {
                let j = 2 * i + k;
                g = self.acts[j].backward(g);
                g = self.convs[j].backward(&g);
            }
            let ca = self.ups[i].out_channels();
            let (du, ds) = split_channels(&g, ca);
            d_skips.push(ds);
            let du = self.up_acts[i].backward(du);
            g = self.ups[i].backward(&du);
        }
        self.enc.backward(g, Some(d_skips))
    }

    /// Backward of `forward`.
    pub fn backward(&mut self, dy: &Tensor<T>) -> Tensor<T> {
        let mut dx = self.backward_residual(dy);
        let (n, c, h, w) = dx.nchw();
        let plane = h * w;
        let s = self.spec.skip_channel();
        for b in 0..n {
            let dst = &mut dx.data_mut()[(b * c + s) * plane..(b * c + s + 1) * plane];
            for (a, &g) in dst.iter_mut().zip(&dy.data()[b * plane..(b + 1) * plane]) {
                *a += g;
            }
        }
        dx
    }

    pub fn input_dims(&self) -> &[usize] {
        &self.in_dims
    }

    #[cfg(test)]
    pub(crate) fn params_mut_last(&mut self) -> &mut [T] {
        self.convs[8].w.value.data_mut()
    }
}

impl<T: Scalar> Module<T> for Autoencoder<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut p = self.enc.params();
        for i in 0..4 {
            p.extend(self.ups[i].params());
            p.extend(self.convs[2 * i].params());
            p.extend(self.convs[2 * i + 1].params());
        }
        p.extend(self.convs[8].params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut p = self.enc.params_mut();
        let (ups, convs) = (&mut self.ups, &mut self.convs);
        let mut convs_iter = convs.iter_mut();
        for up in ups.iter_mut() {
            p.extend(up.params_mut());
            p.extend(convs_iter.next().unwrap().params_mut());
            p.extend(convs_iter.next().unwrap().params_mut());
        }
        p.extend(convs_iter.next().unwrap().params_mut());
        p
    }
}

/// Encoder (single-channel input) -> global mean -> affine -> sigmoid.
#[derive(Debug, Clone)]
pub struct Discriminator<T> {
    spec: NetSpec,
    enc: Encoder<T>,
    pub head_w: Param<T>,
    pub head_b: Param<T>,
    cache: Option<(Vec<usize>, Vec<T>, Vec<T>)>,
}

impl<T: Scalar> Discriminator<T> {
    pub fn new(base: usize, seed: u64) -> Result<Self> {
        let spec = NetSpec::new(1, base)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let enc = Encoder::new(&spec, "", &mut rng);
        let mut head_w = Param::zeros("head.weight", &[1]);
        head_w.value.fill(T::one());
        Ok(Self { spec, enc, head_w, head_b: Param::zeros("head.bias", &[1]), cache: None })
    }

    pub fn spec(&self) -> &NetSpec {
        &self.spec
    }

    /// One probability per batch item.
    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Vec<T>> {
        let (_, c, _, _) = x.nchw();
        if c != 1 {
            return Err(Error::ShapeMismatch(format!("discriminator expects 1 channel, got {c}")));
        }
        let (_, bottom) = self.enc.forward(x)?;
        let m = global_mean(&bottom);
        let (w, b) = (self.head_w.value.data()[0], self.head_b.value.data()[0]);
        let s: Vec<T> = m.iter().map(|&v| sigmoid(w * v + b)).collect();
        self.cache = Some((bottom.dims().to_vec(), m, s.clone()));
        Ok(s)
    }

    /// `d_out[i] = dL/dD(x_i)`; returns the input gradient.
    pub fn backward(&mut self, d_out: &[T]) -> Tensor<T> {
        let (dims, m, s) = self.cache.take().expect("discriminator backward without forward");
        let w = self.head_w.value.data()[0];
        let mut dm = Vec::with_capacity(m.len());
        for i in 0..m.len() {
            let dz = d_out[i] * s[i] * (T::one() - s[i]);
            self.head_w.grad.data_mut()[0] += dz * m[i];
            self.head_b.grad.data_mut()[0] += dz;
            dm.push(dz * w);
        }
        let d_bottom = global_mean_backward(&dims, &dm);
        self.enc.backward(d_bottom, None)
    }
}

impl<T: Scalar> Module<T> for Discriminator<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut p = self.enc.params();
        p.push(&self.head_w);
        p.push(&self.head_b);
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut p = self.enc.params_mut();
        p.push(&mut self.head_w);
        p.push(&mut self.head_b);
        p
    }
}

/// Autoencoder and discriminator pair for one stage.
pub fn build_aae<T: Scalar>(spec: NetSpec, seed: u64) -> Result<(Autoencoder<T>, Discriminator<T>)> {
    Ok((Autoencoder::new(spec, seed)?, Discriminator::new(spec.base, seed ^ 0x9e37_79b9_7f4a_7c15)?))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    fn random(dims: &[usize], seed: u64) -> Tensor<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = dims.iter().product();
        Tensor::from_vec(dims, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap()
    }

    #[test]
    fn published_param_count() {
        let ae: Autoencoder<f32> = Autoencoder::new(NetSpec::full(1), 0).unwrap();
        assert_eq!(ae.param_count(), 7_753_817);
        assert_eq!(ae.param_count(), NetSpec::full(1).param_count());
        let d: Discriminator<f32> = Discriminator::new(32, 0).unwrap();
        assert_eq!(d.param_count(), 4_711_648 + 2);
        let names: Vec<_> = ae.params().iter().map(|p| p.name.clone()).collect();
        assert_eq!(names[0], "conv1_1.weight");
        assert_eq!(names[20], "upconv6.weight");
        assert_eq!(names.last().unwrap(), "conv9_3.bias");
    }

    #[test]
    fn fresh_network_is_identity_on_skip_channel() {
        let mut ae: Autoencoder<f64> = Autoencoder::new(NetSpec::new(3, 4).unwrap(), 1).unwrap();
        let x = random(&[2, 3, 16, 32], 2);
        let y = ae.forward(&x).unwrap();
        assert_eq!(y.dims(), &[2, 1, 16, 32]);
        assert_eq!(y, x.channel(1));
        assert!(ae.forward_residual(&x).unwrap().data().iter().all(|&v| v == 0.0));
        assert!(ae.forward(&random(&[1, 3, 16, 24], 3)).is_err());
    }

    #[test]
    fn discriminator_output_in_unit_interval() {
        let mut d: Discriminator<f64> = Discriminator::new(4, 5).unwrap();
        let s = d.forward(&random(&[3, 1, 16, 16], 6)).unwrap();
        assert_eq!(s.len(), 3);
        assert!(s.iter().all(|&v| v > 0.0 && v < 1.0));
    }
}
