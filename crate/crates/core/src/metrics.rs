//! PSNR and single-scale SSIM.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tomo::{ImageSlice, Sinogram};

/// Reported in place of +inf when the two inputs are identical.
pub const PSNR_CAP_DB: f64 = 200.0;

pub const SSIM_WINDOW: usize = 11;
pub const SSIM_SIGMA: f64 = 1.5;
const K1: f64 = 0.01;
const K2: f64 = 0.03;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricReport {
    pub psnr: f64,
    pub ssim: f64,
}

impl MetricReport {
    /// PSNR at peak 1.0 and SSIM.
    pub fn compare(a: &ImageSlice, b: &ImageSlice) -> Result<Self> {
        Ok(Self { psnr: psnr(a, b, 1.0)?, ssim: ssim(a, b)? })
    }

    pub fn mean(reports: &[MetricReport]) -> Option<MetricReport> {
        if reports.is_empty() {
            return None;
        }
        let n = reports.len() as f64;
        Some(MetricReport {
            psnr: reports.iter().map(|r| r.psnr).sum::<f64>() / n,
            ssim: reports.iter().map(|r| r.ssim).sum::<f64>() / n,
        })
    }
}

/// PSNR of two equally long buffers.
pub fn psnr_values(a: &[f64], b: &[f64], peak: f64) -> Result<f64> {
    if a.len() != b.len() || a.is_empty() {
        return Err(Error::ShapeMismatch(format!("psnr over {} and {} values", a.len(), b.len())));
    }
    if !(peak.is_finite() && peak > 0.0) {
        return Err(Error::InvalidArgument(format!("psnr peak {peak} must be > 0")));
    }
    let mse = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>() / a.len() as f64;
    if mse == 0.0 {
        return Ok(PSNR_CAP_DB);
    }
    Ok((20.0 * peak.log10() - 10.0 * mse.log10()).min(PSNR_CAP_DB))
}

pub fn psnr(a: &ImageSlice, b: &ImageSlice, peak: f64) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(Error::ShapeMismatch(format!(
            "psnr of {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    psnr_values(a.data(), b.data(), peak)
}

/// Sinogram PSNR with the ground truth's dynamic range as peak.
pub fn sinogram_psnr(test: &Sinogram, truth: &Sinogram) -> Result<f64> {
    if test.n_detectors() != truth.n_detectors() || test.angles() != truth.angles() {
        return Err(Error::ShapeMismatch("sinogram psnr on different geometries".into()));
    }
    let (lo, hi) = truth.min_max();
    let peak = if hi > lo { hi - lo } else { 1.0 };
    psnr_values(test.data(), truth.data(), peak)
}

fn gaussian_kernel() -> [f64; SSIM_WINDOW] {
    let mut k = [0.0; SSIM_WINDOW];
    let c = (SSIM_WINDOW / 2) as f64;
    for (i, v) in k.iter_mut().enumerate() {
        let d = i as f64 - c;
        *v = (-d * d / (2.0 * SSIM_SIGMA * SSIM_SIGMA)).exp();
    }
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    k
}

/// Separable "valid" Gaussian filtering; output is (h-10) x (w-10).
fn blur_valid(x: &[f64], w: usize, h: usize, k: &[f64; SSIM_WINDOW]) -> Vec<f64> {
    let ow = w - SSIM_WINDOW + 1;
    let oh = h - SSIM_WINDOW + 1;
    let mut rows = vec![0.0; h * ow];
    for r in 0..h {
        for c in 0..ow {
            let src = &x[r * w + c..r * w + c + SSIM_WINDOW];
            rows[r * ow + c] = src.iter().zip(k).map(|(a, b)| a * b).sum();
        }
    }
    let mut out = vec![0.0; oh * ow];
    for r in 0..oh {
        for c in 0..ow {
            let mut acc = 0.0;
            for (i, kv) in k.iter().enumerate() {
                acc += kv * rows[(r + i) * ow + c];
            }
            out[r * ow + c] = acc;
        }
    }
    out
}

/// Mean SSIM over all valid 11x11 window positions (Gaussian sigma 1.5,
/// dynamic range 1).
pub fn ssim(a: &ImageSlice, b: &ImageSlice) -> Result<f64> {
    if !a.same_dims(b) {
        return Err(Error::ShapeMismatch(format!(
            "ssim of {}x{} and {}x{}",
            a.width(),
            a.height(),
            b.width(),
            b.height()
        )));
    }
    let (w, h) = (a.width(), a.height());
    if w < SSIM_WINDOW || h < SSIM_WINDOW {
        return Err(Error::InvalidArgument(format!("ssim needs at least 11x11 pixels, got {w}x{h}")));
    }
    let k = gaussian_kernel();
    let (x, y) = (a.data(), b.data());
    let xx: Vec<f64> = x.iter().map(|v| v * v).collect();
    let yy: Vec<f64> = y.iter().map(|v| v * v).collect();
    let xy: Vec<f64> = x.iter().zip(y).map(|(p, q)| p * q).collect();
    let mx = blur_valid(x, w, h, &k);
    let my = blur_valid(y, w, h, &k);
    let sxx = blur_valid(&xx, w, h, &k);
    let syy = blur_valid(&yy, w, h, &k);
    let sxy = blur_valid(&xy, w, h, &k);
    let c1 = (K1 * 1.0f64).powi(2);
    let c2 = (K2 * 1.0f64).powi(2);
    let mut total = 0.0;
    for i in 0..mx.len() {
        let (ux, uy) = (mx[i], my[i]);
        let vx = sxx[i] - ux * ux;
        let vy = syy[i] - uy * uy;
        let cxy = sxy[i] - ux * uy;
        total += ((2.0 * ux * uy + c1) * (2.0 * cxy + c2)) / ((ux * ux + uy * uy + c1) * (vx + vy + c2));
    }
    Ok(total / mx.len() as f64)
}
