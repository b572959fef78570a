//! Finite-difference gradient suite over every layer, every loss and the
//! published encoder, in float64. Shared by the unit tests and `lvct gradcheck`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::losses::{loss_adv, loss_ae, loss_dis, loss_mse, loss_tv, LossWeights};
use crate::models::{Autoencoder, Discriminator, Encoder, NetSpec};
use crate::nn::{
    concat_channels, global_mean, global_mean_backward, grad_check, sigmoid_backward, sigmoid_forward, split_channels,
    Conv3x3, GradCheckOptions, GradCheckReport, LeakyRelu, MaxPool2, Module, Param, Tensor, UpConv2x2,
};

/// Layer and loss tolerance.
pub const LAYER_TOL: f64 = 1e-4;
/// Tolerance for the full published encoder at 32x32.
pub const ENCODER_TOL: f64 = 1e-3;

#[derive(Debug, Clone)]
pub struct SuiteResult {
    pub name: &'static str,
    pub tolerance: f64,
    pub report: GradCheckReport,
}

impl SuiteResult {
    pub fn passed(&self) -> bool {
        self.report.max_rel_error <= self.tolerance
    }
}

type Case = (&'static str, f64, fn() -> Result<GradCheckReport>);

pub const CASES: [Case; 13] = [
    ("conv3x3", LAYER_TOL, conv3x3),
    ("upconv2x2", LAYER_TOL, upconv2x2),
    ("maxpool2", LAYER_TOL, maxpool2),
    ("leaky_relu", LAYER_TOL, leaky_relu),
    ("sigmoid_global_mean", LAYER_TOL, sigmoid_global_mean),
    ("concat_split", LAYER_TOL, concat_split),
    ("loss_mse", LAYER_TOL, mse),
    ("loss_adv", LAYER_TOL, adv),
    ("loss_tv", LAYER_TOL, tv),
    ("loss_ae", LAYER_TOL, ae_loss),
    ("loss_dis", LAYER_TOL, dis),
    ("autoencoder_discriminator", LAYER_TOL, ae_through_d),
    ("encoder_full_32", ENCODER_TOL, encoder_32),
];

/// Run every case in order.
pub fn run_suite() -> Result<Vec<SuiteResult>> {
    CASES.iter().map(|&(name, tolerance, f)| Ok(SuiteResult { name, tolerance, report: f()? })).collect()
}

fn random(dims: &[usize], rng: &mut ChaCha8Rng) -> Tensor<f64> {
    let n = dims.iter().product();
    Tensor::from_vec(dims, (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()).expect("dims match")
}

fn seeded(dims: &[usize], seed: u64) -> Tensor<f64> {
    random(dims, &mut ChaCha8Rng::seed_from_u64(seed))
}

/// A layer plus its input registered as a parameter, so the check
/// covers the input gradient as well.
struct Probe<L> {
    layer: L,
    input: Param<f64>,
    weights: Vec<f64>,
}

fn probe<L>(layer: L, in_dims: &[usize], out_len: usize, seed: u64) -> Probe<L> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut input = Param::zeros("input", in_dims);
    input.value = random(in_dims, &mut rng);
    let weights = (0..out_len).map(|_| rng.gen_range(-1.0..1.0)).collect();
    Probe { layer, input, weights }
}

/// `loss = sum(w * y)`; returns the loss and `dL/dy`.
fn weighted_sum(y: &Tensor<f64>, w: &[f64]) -> (f64, Tensor<f64>) {
    let loss = y.data().iter().zip(w).map(|(a, b)| a * b).sum();
    (loss, Tensor::from_vec(y.dims(), w.to_vec()).expect("dims match"))
}

impl Module<f64> for Probe<Conv3x3<f64>> {
    fn params(&self) -> Vec<&Param<f64>> {
        vec![&self.layer.w, &self.layer.b, &self.input]
    }
    fn params_mut(&mut self) -> Vec<&mut Param<f64>> {
        vec![&mut self.layer.w, &mut self.layer.b, &mut self.input]
    }
}

impl Module<f64> for Probe<UpConv2x2<f64>> {
    fn params(&self) -> Vec<&Param<f64>> {
        vec![&self.layer.w, &self.layer.b, &self.input]
    }
    fn params_mut(&mut self) -> Vec<&mut Param<f64>> {
        vec![&mut self.layer.w, &mut self.layer.b, &mut self.input]
    }
}

macro_rules! input_only_module {
    ($t:ty) => {
        impl Module<f64> for Probe<$t> {
            fn params(&self) -> Vec<&Param<f64>> {
                vec![&self.input]
            }
            fn params_mut(&mut self) -> Vec<&mut Param<f64>> {
                vec![&mut self.input]
            }
        }
    };
}
input_only_module!(MaxPool2);
input_only_module!(LeakyRelu<f64>);
input_only_module!(());

fn opts(samples: usize) -> GradCheckOptions {
    GradCheckOptions { samples_per_param: samples, ..Default::default() }
}

fn conv3x3() -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let conv = Conv3x3::new("conv", 3, 4, &mut rng);
    let mut p = probe(conv, &[2, 3, 5, 6], 2 * 4 * 30, 2);
    p.layer.b.value = random(&[4], &mut rng);
    grad_check(
        &mut p,
        |m, back| {
            let y = m.layer.forward(&m.input.value)?;
            let (loss, dy) = weighted_sum(&y, &m.weights);
            if back {
                m.input.grad = m.layer.backward(&dy);
            }
            Ok(loss)
        },
        opts(1000),
    )
}

fn upconv2x2() -> Result<GradCheckReport> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let up = UpConv2x2::new("up", 3, 2, &mut rng);
    let mut p = probe(up, &[2, 3, 3, 4], 2 * 2 * 6 * 8, 4);
    p.layer.b.value = random(&[2], &mut rng);
    grad_check(
        &mut p,
        |m, back| {
            let y = m.layer.forward(&m.input.value)?;
            let (loss, dy) = weighted_sum(&y, &m.weights);
            if back {
                m.input.grad = m.layer.backward(&dy);
            }
            Ok(loss)
        },
        opts(1000),
    )
}

fn maxpool2() -> Result<GradCheckReport> {
    let mut p = probe(MaxPool2::new(), &[2, 2, 4, 6], 2 * 2 * 2 * 3, 5);
    grad_check(
        &mut p,
        |m, back| {
            let y = m.layer.forward(&m.input.value)?;
            let (loss, dy) = weighted_sum(&y, &m.weights);
            if back {
                m.input.grad = m.layer.backward(&dy);
            }
            Ok(loss)
        },
        opts(1000),
    )
}

fn leaky_relu() -> Result<GradCheckReport> {
    let mut p = probe(LeakyRelu::new(0.01), &[1, 2, 4, 4], 32, 6);
    // keep inputs away from the kink at zero
    for v in p.input.value.data_mut() {
        if v.abs() < 0.05 {
            *v += 0.1;
        }
    }
    grad_check(
        &mut p,
        |m, back| {
            let y = m.layer.forward(&m.input.value);
            let (loss, dy) = weighted_sum(&y, &m.weights);
            if back {
                m.input.grad = m.layer.backward(dy);
            }
            Ok(loss)
        },
        opts(1000),
    )
}

fn sigmoid_global_mean() -> Result<GradCheckReport> {
    let mut p = probe((), &[3, 2, 3, 3], 3, 7);
    grad_check(
        &mut p,
        |m, back| {
            let s = sigmoid_forward(&m.input.value);
            let g = global_mean(&s);
            let loss: f64 = g.iter().zip(&m.weights).map(|(a, b)| a * b).sum();
            if back {
                let ds = global_mean_backward(s.dims(), &m.weights);
                m.input.grad = sigmoid_backward(&s, &ds);
            }
            Ok(loss)
        },
        opts(1000),
    )
}

fn concat_split() -> Result<GradCheckReport> {
    let mut p = probe((), &[1, 3, 2, 2], 20, 8);
    let other = seeded(&[1, 2, 2, 2], 9);
    grad_check(
        &mut p,
        |m, back| {
            let y = concat_channels(&m.input.value, &other)?;
            let (loss, dy) = weighted_sum(&y, &m.weights);
            if back {
                m.input.grad = split_channels(&dy, 3).0;
            }
            Ok(loss)
        },
        opts(1000),
    )
}

struct Pred(Param<f64>);

impl Module<f64> for Pred {
    fn params(&self) -> Vec<&Param<f64>> {
        vec![&self.0]
    }
    fn params_mut(&mut self) -> Vec<&mut Param<f64>> {
        vec![&mut self.0]
    }
}

fn pred(dims: &[usize], seed: u64) -> Pred {
    let mut p = Param::zeros("pred", dims);
    p.value = seeded(dims, seed);
    p.value.data_mut().iter_mut().for_each(|v| *v = 0.5 * (*v + 1.0));
    Pred(p)
}

fn mse() -> Result<GradCheckReport> {
    let gt = seeded(&[2, 1, 6, 5], 9);
    grad_check(
        &mut pred(&[2, 1, 6, 5], 10),
        |m, back| {
            let (l, g) = loss_mse(&m.0.value, &gt)?;
            if back {
                m.0.grad = g;
            }
            Ok(l)
        },
        opts(100),
    )
}

fn adv() -> Result<GradCheckReport> {
    grad_check(
        &mut pred(&[4], 11),
        |m, back| {
            let mut loss = 0.0;
            let mut g = Tensor::zeros(&[4]);
            for (d, gd) in m.0.value.data().iter().zip(g.data_mut()) {
                let (l, dl) = loss_adv(*d);
                loss += l;
                *gd = dl;
            }
            if back {
                m.0.grad = g;
            }
            Ok(loss)
        },
        opts(100),
    )
}

fn tv() -> Result<GradCheckReport> {
    // ramps plus jitter keep every forward difference away from the kink
    let mut m = pred(&[2, 1, 6, 5], 12);
    let (h, w) = (6, 5);
    for (i, v) in m.0.value.data_mut().iter_mut().enumerate() {
        let (r, c) = ((i / w) % h, i % w);
        *v = 0.1 * (r * r) as f64 + 0.13 * c as f64 + 0.05 * *v;
    }
    grad_check(
        &mut m,
        |m, back| {
            let (l, g) = loss_tv(&m.0.value);
            if back {
                m.0.grad = g;
            }
            Ok(l)
        },
        opts(100),
    )
}

fn ae_loss() -> Result<GradCheckReport> {
    let gt = seeded(&[2, 1, 6, 5], 13);
    let w = LossWeights { alpha1: 1.0, alpha2: 0.5, alpha3: 0.3 };
    grad_check(
        &mut pred(&[2, 1, 6, 5], 14),
        |m, back| {
            let l = loss_ae(&m.0.value, &gt, &[0.4, 0.6], &w)?;
            if back {
                m.0.grad = l.d_pred;
            }
            Ok(l.total)
        },
        opts(100),
    )
}

fn dis() -> Result<GradCheckReport> {
    grad_check(
        &mut pred(&[6], 15),
        |m, back| {
            let v = m.0.value.data();
            let (l, gr, gf) = loss_dis(&v[..3], &v[3..])?;
            if back {
                m.0.grad = Tensor::from_vec(&[6], gr.into_iter().chain(gf).collect())?;
            }
            Ok(l)
        },
        opts(100),
    )
}

struct AeProbe {
    ae: Autoencoder<f64>,
    d: Discriminator<f64>,
}

impl Module<f64> for AeProbe {
    fn params(&self) -> Vec<&Param<f64>> {
        let mut p = self.ae.params();
        p.extend(self.d.params());
        p
    }
    fn params_mut(&mut self) -> Vec<&mut Param<f64>> {
        let mut p = self.ae.params_mut();
        p.extend(self.d.params_mut());
        p
    }
}

/// Small autoencoder feeding the discriminator, MSE plus mean D score.
fn ae_through_d() -> Result<GradCheckReport> {
    let mut ae = Autoencoder::new(NetSpec::new(2, 2)?, 3)?;
    // make the zero-initialised last layer non-trivial
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    for p in ae.params_mut() {
        if p.name == "conv9_3.weight" {
            p.value.data_mut().iter_mut().for_each(|v| *v = rng.gen_range(-0.5..0.5));
        }
    }
    let mut probe = AeProbe { ae, d: Discriminator::new(2, 5)? };
    let x = seeded(&[2, 2, 16, 16], 6);
    let target = seeded(&[2, 1, 16, 16], 7);
    grad_check(
        &mut probe,
        |m, back| {
            let y = m.ae.forward(&x)?;
            let d = m.d.forward(&y)?;
            let (mse, dmse) = loss_mse(&y, &target)?;
            let loss = mse + 0.5 * (d[0] + d[1]);
            if back {
                let mut dy = m.d.backward(&[0.5, 0.5]);
                for (g, e) in dy.data_mut().iter_mut().zip(dmse.data()) {
                    *g += e;
                }
                m.ae.backward(&dy);
            }
            Ok(loss)
        },
        GradCheckOptions { step: 1e-7, floor_ratio: 1e-3, samples_per_param: 4, ..Default::default() },
    )
}

struct EncoderProbe {
    enc: Encoder<f64>,
    input: Param<f64>,
    weights: Vec<Tensor<f64>>,
}

impl Module<f64> for EncoderProbe {
    fn params(&self) -> Vec<&Param<f64>> {
        let mut p = self.enc.params();
        p.push(&self.input);
        p
    }
    fn params_mut(&mut self) -> Vec<&mut Param<f64>> {
        let mut p = self.enc.params_mut();
        p.push(&mut self.input);
        p
    }
}

/// Published encoder widths on a 32x32 input, weighted sum over every skip
/// and the bottleneck.
fn encoder_32() -> Result<GradCheckReport> {
    let spec = NetSpec::full(1);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut input = Param::zeros("input", &[1, 1, 32, 32]);
    input.value = seeded(&[1, 1, 32, 32], 12);
    let enc = Encoder::new(&spec, "", &mut rng);
    let w = spec.widths();
    let mut weights: Vec<Tensor<f64>> = (0..4).map(|l| seeded(&[1, w[l], 32 >> l, 32 >> l], 20 + l as u64)).collect();
    weights.push(seeded(&[1, w[4], 2, 2], 30));
    let mut probe = EncoderProbe { enc, input, weights };
    grad_check(
        &mut probe,
        |m, back| {
            let (skips, bottom) = m.enc.forward(&m.input.value)?;
            let mut loss = 0.0;
            for (t, wt) in skips.iter().chain(std::iter::once(&bottom)).zip(&m.weights) {
                loss += t.data().iter().zip(wt.data()).map(|(a, b)| a * b).sum::<f64>();
            }
            if back {
                let ds = m.weights[..4].to_vec();
                m.input.grad = m.enc.backward(m.weights[4].clone(), Some(ds));
            }
            Ok(loss)
        },
        GradCheckOptions { step: 1e-7, floor_ratio: 1e-4, samples_per_param: 6, ..Default::default() },
    )
}
