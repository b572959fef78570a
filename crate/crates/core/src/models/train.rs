//! Adversarial training loop shared by all stages.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::{Autoencoder, Discriminator};
use super::spatial::SpatialAae;
use crate::error::{Error, Result};
use crate::losses::{loss_ae, loss_dis, LossWeights};
use crate::metrics::{psnr_values, ssim};
use crate::nn::{Adam, Module, Tensor, DEFAULT_LR};
use crate::tomo::ImageSlice;

/// A generator the loop can train: normalised input to `(n, 1, h, w)`.
pub trait Trainable: Module<f32> {
    fn train_forward(&mut self, x: &Tensor<f32>) -> Result<Tensor<f32>>;
    fn train_backward(&mut self, dy: &Tensor<f32>) -> Result<()>;
}

impl Trainable for Autoencoder<f32> {
    fn train_forward(&mut self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.forward(x)
    }

    fn train_backward(&mut self, dy: &Tensor<f32>) -> Result<()> {
        self.backward(dy);
        Ok(())
    }
}

impl Trainable for SpatialAae<f32> {
    fn train_forward(&mut self, x: &Tensor<f32>) -> Result<Tensor<f32>> {
        self.forward(x)
    }

    fn train_backward(&mut self, dy: &Tensor<f32>) -> Result<()> {
        self.backward(dy)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr: f64,
    #[serde(flatten)]
    pub weights: LossWeights,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub d_steps_per_g: usize,
    /// Train against the discriminator; false gives the plain autoencoder.
    pub adversarial: bool,
    /// Conv1_1 width; 32 is the published network.
    pub base_width: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr: DEFAULT_LR,
            weights: LossWeights::default(),
            epochs: 10,
            batch_size: 4,
            seed: 0,
            d_steps_per_g: 1,
            adversarial: true,
            base_width: 32,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        self.weights.validate()?;
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::Config(format!("lr {} must be > 0", self.lr)));
        }
        if self.epochs == 0 || self.batch_size == 0 || self.d_steps_per_g == 0 || self.base_width == 0 {
            return Err(Error::Config("epochs, batch_size, d_steps_per_g and base_width must be >= 1".into()));
        }
        Ok(())
    }
}

/// One normalised training example: `(n, c, h, w)` input, `(n, 1, h, w)` target.
///
/// With `known_cols` set, the output takes the centre input channel in those
/// columns, matching the column splicing done at stage-1 inference.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainPair {
    pub input: Tensor<f32>,
    pub target: Tensor<f32>,
    pub known_cols: Option<Vec<bool>>,
}

impl TrainPair {
    pub fn new(input: Tensor<f32>, target: Tensor<f32>) -> Self {
        Self { input, target, known_cols: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EpochLog {
    pub epoch: usize,
    pub mse: f64,
    pub adv: f64,
    pub reg: f64,
    pub ae: f64,
    pub dis: f64,
    pub val_psnr: f64,
    pub val_ssim: f64,
}

pub const LOG_HEADER: &str = "epoch,l_MSE,l_adv,l_reg,l_AE,l_DIS,val_PSNR,val_SSIM";

impl EpochLog {
    pub fn csv_row(&self) -> String {
        format!(
            "{},{:.8e},{:.8e},{:.8e},{:.8e},{:.8e},{:.6},{:.6}",
            self.epoch, self.mse, self.adv, self.reg, self.ae, self.dis, self.val_psnr, self.val_ssim
        )
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    pub epochs: Vec<EpochLog>,
    /// Mean training-set MSE before the first and after the last update.
    pub mse_before: f64,
    pub mse_after: f64,
    pub iterations: usize,
}

fn stack(items: &[&Tensor<f32>]) -> Result<Tensor<f32>> {
    let d = items[0].dims();
    if items.iter().any(|t| t.dims() != d) {
        return Err(Error::ShapeMismatch("training pairs differ in shape".into()));
    }
    let mut dims = d.to_vec();
    dims[0] = items.iter().map(|t| t.dims()[0]).sum();
    let data = items.iter().flat_map(|t| t.data().iter().copied()).collect();
    Tensor::from_vec(&dims, data)
}

fn batch(pairs: &[&TrainPair]) -> Result<(Tensor<f32>, Tensor<f32>)> {
    let inputs: Vec<_> = pairs.iter().map(|p| &p.input).collect();
    let targets: Vec<_> = pairs.iter().map(|p| &p.target).collect();
    Ok((stack(&inputs)?, stack(&targets)?))
}

/// Calls `f(item, column)` for every known column of every batch item.
fn for_known(pairs: &[&TrainPair], w: usize, mut f: impl FnMut(usize, usize)) {
    let mut item = 0;
    for p in pairs {
        let n = p.input.dims()[0];
        if let Some(k) = &p.known_cols {
            for b in item..item + n {
                for c in (0..w).filter(|&c| k.get(c).copied().unwrap_or(false)) {
                    f(b, c);
                }
            }
        }
        item += n;
    }
}

/// Copy the centre input channel into the known columns of `y`.
fn splice_known(y: &mut Tensor<f32>, x: &Tensor<f32>, pairs: &[&TrainPair]) {
    let (_, c, h, w) = x.nchw();
    let s = c / 2;
    let (xd, yd) = (x.data(), y.data_mut());
    for_known(pairs, w, |b, col| {
        for r in 0..h {
            yd[b * h * w + r * w + col] = xd[((b * c + s) * h + r) * w + col];
        }
    });
}

fn zero_known(g: &mut Tensor<f32>, pairs: &[&TrainPair]) {
    let (_, _, h, w) = g.nchw();
    let gd = g.data_mut();
    for_known(pairs, w, |b, col| {
        for r in 0..h {
            gd[b * h * w + r * w + col] = 0.0;
        }
    });
}

fn predict<G: Trainable>(gen: &mut G, x: &Tensor<f32>, pairs: &[&TrainPair]) -> Result<Tensor<f32>> {
    let mut y = gen.train_forward(x)?;
    splice_known(&mut y, x, pairs);
    Ok(y)
}

fn mse_f64(a: &[f32], b: &[f32]) -> f64 {
    a.iter().zip(b).map(|(&x, &y)| (x as f64 - y as f64).powi(2)).sum::<f64>() / a.len() as f64
}

/// Mean per-pair MSE of the generator over `pairs`.
pub fn evaluate_mse<G: Trainable>(gen: &mut G, pairs: &[TrainPair], batch_size: usize) -> Result<f64> {
    if pairs.is_empty() {
        return Ok(f64::NAN);
    }
    let mut total = 0.0;
    for chunk in pairs.chunks(batch_size.max(1)) {
        let refs: Vec<_> = chunk.iter().collect();
        let (x, t) = batch(&refs)?;
        let y = predict(gen, &x, &refs)?;
        total += mse_f64(y.data(), t.data()) * chunk.len() as f64;
    }
    Ok(total / pairs.len() as f64)
}

/// Mean PSNR (peak 1) and SSIM of the generator's outputs on `pairs`.
pub fn evaluate_metrics<G: Trainable>(gen: &mut G, pairs: &[TrainPair]) -> Result<(f64, f64)> {
    if pairs.is_empty() {
        return Ok((f64::NAN, f64::NAN));
    }
    let (mut p, mut s, mut n_s) = (0.0, 0.0, 0usize);
    for pair in pairs {
        let y = predict(gen, &pair.input, &[pair])?;
        let a: Vec<f64> = y.data().iter().map(|&v| v as f64).collect();
        let b: Vec<f64> = pair.target.data().iter().map(|&v| v as f64).collect();
        p += psnr_values(&a, &b, 1.0)?;
        let (_, _, h, w) = y.nchw();
        if h >= 11 && w >= 11 {
            for (pa, pb) in a.chunks(h * w).zip(b.chunks(h * w)) {
                s += ssim(&ImageSlice::new(w, h, pa.to_vec())?, &ImageSlice::new(w, h, pb.to_vec())?)?;
                n_s += 1;
            }
        }
    }
    Ok((p / pairs.len() as f64, if n_s > 0 { s / n_s as f64 } else { f64::NAN }))
}

fn append_log(path: &Path, row: &EpochLog) -> Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = OpenOptions::new().create(true).append(true).open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    if fresh {
        text.push_str(LOG_HEADER);
        text.push('\n');
    }
    text.push_str(&row.csv_row());
    text.push('\n');
    f.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))
}

fn diverged(epoch: usize, iter: usize, what: &str, value: f64) -> Error {
    Error::Diverged(format!("epoch {epoch} iteration {iter}: {what} = {value}"))
}

/// Per batch: discriminator step(s) on the loss `1 - D(gt) + D(G(x))`, then a
/// generator step on `a1 MSE + a2 (1 - D(G(x))) + a3 TV`. With
/// `cfg.adversarial == false` or no discriminator only the generator is
/// trained, on `a1 MSE + a3 TV`.
pub fn train<G: Trainable>(
    gen: &mut G,
    mut disc: Option<&mut Discriminator<f32>>,
    train_set: &[TrainPair],
    val_set: &[TrainPair],
    cfg: &TrainConfig,
    log_path: Option<&Path>,
) -> Result<TrainReport> {
    cfg.validate()?;
    if train_set.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    if !cfg.adversarial {
        disc = None;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x5eed);
    let mut opt_g = Adam::new(gen, cfg.lr);
    let mut opt_d = disc.as_deref().map(|d| Adam::new(d, cfg.lr));
    let mse_before = evaluate_mse(gen, train_set, cfg.batch_size)?;
    let mut order: Vec<usize> = (0..train_set.len()).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    let mut iter = 0usize;
    for epoch in 1..=cfg.epochs {
        order.shuffle(&mut rng);
        let mut sums = [0.0f64; 5];
        let mut n_batches = 0usize;
        for chunk in order.chunks(cfg.batch_size) {
            iter += 1;
            let refs: Vec<&TrainPair> = chunk.iter().map(|&i| &train_set[i]).collect();
            let (x, target) = batch(&refs)?;
            let fake = predict(gen, &x, &refs)?;
            let mut dis = f64::NAN;
            let mut d_fake = Vec::new();
            if let (Some(d), Some(opt)) = (disc.as_deref_mut(), opt_d.as_mut()) {
                for _ in 0..cfg.d_steps_per_g {
                    d.zero_grad();
                    let real_p = d.forward(&target)?;
                    let (_, g_real, _) = loss_dis(&real_p, &vec![0.0; real_p.len()])?;
                    d.backward(&g_real);
                    let fake_p = d.forward(&fake)?;
                    let (l, _, g_fake) = loss_dis(&real_p, &fake_p)?;
                    d.backward(&g_fake);
                    if !l.is_finite() {
                        return Err(diverged(epoch, iter, "l_DIS", l as f64));
                    }
                    opt.step(d).map_err(|e| Error::Diverged(format!("epoch {epoch} iteration {iter}: {e}")))?;
                    dis = l as f64;
                }
                d_fake = d.forward(&fake)?;
            }
            let l = loss_ae(&fake, &target, &d_fake, &cfg.weights)?;
            for (name, v) in [("l_AE", l.total), ("l_MSE", l.mse), ("l_reg", l.reg)] {
                if !v.is_finite() {
                    return Err(diverged(epoch, iter, name, v as f64));
                }
            }
            let mut d_pred = l.d_pred;
            if let Some(d) = disc.as_deref_mut() {
                let through_d = d.backward(&l.d_dout);
                for (a, &b) in d_pred.data_mut().iter_mut().zip(through_d.data()) {
                    *a += b;
                }
                d.zero_grad();
            }
            zero_known(&mut d_pred, &refs);
            gen.train_backward(&d_pred)?;
            opt_g.step(gen).map_err(|e| Error::Diverged(format!("epoch {epoch} iteration {iter}: {e}")))?;
            for (s, v) in sums.iter_mut().zip([l.mse as f64, l.adv as f64, l.reg as f64, l.total as f64, dis]) {
                *s += v;
            }
            n_batches += 1;
        }
        let nb = n_batches as f64;
        let (val_psnr, val_ssim) = evaluate_metrics(gen, val_set)?;
        let row = EpochLog {
            epoch,
            mse: sums[0] / nb,
            adv: sums[1] / nb,
            reg: sums[2] / nb,
            ae: sums[3] / nb,
            dis: sums[4] / nb,
            val_psnr,
            val_ssim,
        };
        if let Some(p) = log_path {
            append_log(p, &row)?;
        }
        epochs.push(row);
    }
    let mse_after = evaluate_mse(gen, train_set, cfg.batch_size)?;
    Ok(TrainReport { epochs, mse_before, mse_after, iterations: iter })
}
