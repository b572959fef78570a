#![allow(dead_code)]

use lvct_core::metrics::PSNR_CAP_DB;
use lvct_core::tomo::ImageSlice;

pub const PAIRS: usize = 50;

/// 64-bit LCG shared with tests/fixtures/metrics_reference.py.
pub struct Lcg(u64);

impl Lcg {
    pub fn next(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}

pub fn pair(k: usize) -> (ImageSlice, ImageSlice) {
    let mut g = Lcg(1000 + k as u64);
    let (w, h) = (11 + (7 * k) % 23, 11 + (5 * k) % 19);
    let t = k as f64 / 49.0;
    let a: Vec<f64> = (0..w * h).map(|_| g.next()).collect();
    let u: Vec<f64> = (0..w * h).map(|_| g.next()).collect();
    let b = a.iter().zip(&u).map(|(x, y)| (1.0 - t) * x + t * y).collect();
    (ImageSlice::new(w, h, a).unwrap(), ImageSlice::new(w, h, b).unwrap())
}

pub fn reference() -> Vec<(f64, f64)> {
    let text = include_str!("../fixtures/metrics_reference.csv");
    text.lines()
        .skip(1)
        .map(|l| {
            let f: Vec<f64> = l.split(',').map(|v| v.parse().unwrap()).collect();
            (f[1], f[2])
        })
        .collect()
}

/// Direct 2-D window SSIM: for every valid 11x11 position, weighted
/// moments with the outer-product Gaussian.
pub fn ssim_direct(a: &ImageSlice, b: &ImageSlice) -> f64 {
    let (w, h) = (a.width(), a.height());
    let g: Vec<f64> = (0..11).map(|i| (-((i as f64 - 5.0).powi(2)) / 4.5).exp()).collect();
    let gs: f64 = g.iter().sum();
    let (c1, c2) = (0.01f64.powi(2), 0.03f64.powi(2));
    let mut total = 0.0;
    let mut n = 0;
    for r in 0..=h - 11 {
        for c in 0..=w - 11 {
            let (mut mx, mut my, mut xx, mut yy, mut xy) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..11 {
                for j in 0..11 {
                    let wt = g[i] * g[j] / (gs * gs);
                    let (x, y) = (a.get(r + i, c + j), b.get(r + i, c + j));
                    mx += wt * x;
                    my += wt * y;
                    xx += wt * x * x;
                    yy += wt * y * y;
                    xy += wt * x * y;
                }
            }
            let (vx, vy, cxy) = (xx - mx * mx, yy - my * my, xy - mx * my);
            total += (2.0 * mx * my + c1) * (2.0 * cxy + c2) / ((mx * mx + my * my + c1) * (vx + vy + c2));
            n += 1;
        }
    }
    total / n as f64
}

pub fn psnr_direct(a: &ImageSlice, b: &ImageSlice) -> f64 {
    let mse: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).powi(2)).sum::<f64>() / a.data().len() as f64;
    if mse == 0.0 {
        PSNR_CAP_DB
    } else {
        10.0 * (1.0 / mse).log10()
    }
}
