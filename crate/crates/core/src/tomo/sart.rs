use serde::{Deserialize, Serialize};

use super::{ImageSlice, RayProjector, Sinogram};
use crate::error::{Error, Result};
use crate::tv::{tv_sum_grad, TV_EPS};

/// SART-TV parameters.
///
/// After every SART sweep, `tv_inner_steps` gradient steps of size
/// `tv_step_size * tv_weight` are taken on the smoothed total variation,
/// scaled down by the ratio of the sweep's update norm to the first sweep's.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SartTvConfig {
    pub n_iterations: usize,
    pub relaxation: f64,
    pub tv_weight: f64,
    pub tv_inner_steps: usize,
    pub tv_step_size: f64,
}

impl Default for SartTvConfig {
    fn default() -> Self {
        Self { n_iterations: 50, relaxation: 1.0, tv_weight: 1.0, tv_inner_steps: 10, tv_step_size: 1e-3 }
    }
}

impl SartTvConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_iterations == 0 {
            return Err(Error::InvalidArgument("n_iterations must be positive".into()));
        }
        if !(self.relaxation > 0.0 && self.relaxation <= 2.0) {
            return Err(Error::InvalidArgument(format!("relaxation {} outside (0, 2]", self.relaxation)));
        }
        if !(self.tv_weight >= 0.0 && self.tv_weight.is_finite()) {
            return Err(Error::InvalidArgument("tv_weight must be >= 0".into()));
        }
        if !(self.tv_step_size > 0.0 && self.tv_step_size.is_finite()) {
            return Err(Error::InvalidArgument("tv_step_size must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct SartTvOutput {
    pub image: ImageSlice,
    /// Data-term RMSE over valid rays, one entry per completed iteration.
    pub residuals: Vec<f64>,
}

/// SART with interleaved TV descent and a non-negativity clamp.
///
/// `valid` restricts the data term to a subset of angles (limited-view
/// input); `None` uses every angle.
pub fn sart_tv_reconstruct(
    sino: &Sinogram,
    valid: Option<&[bool]>,
    cfg: &SartTvConfig,
    out_w: usize,
    out_h: usize,
) -> Result<SartTvOutput> {
    cfg.validate()?;
    let na = sino.n_angles();
    let nd = sino.n_detectors();
    if let Some(v) = valid {
        if v.len() != na {
            return Err(Error::ShapeMismatch(format!("mask has {} angles, sinogram {na}", v.len())));
        }
    }
    let active: Vec<usize> = (0..na).filter(|&a| valid.is_none_or(|v| v[a])).collect();
    if active.is_empty() {
        return Err(Error::InvalidArgument("no valid angles".into()));
    }

    let proj = RayProjector::new(out_w, out_h, nd, sino.angles());
    let columns: Vec<Vec<f64>> = (0..na).map(|a| sino.column(a)).collect();
    let npix = out_w * out_h;
    let mut x = vec![0.0; npix];
    let mut fx = vec![0.0; nd];
    let mut row_sums = vec![0.0; nd];
    let mut back = vec![0.0; npix];
    let mut col_sums = vec![0.0; npix];
    let mut tv_grad = vec![0.0; npix];
    let mut residuals = Vec::with_capacity(cfg.n_iterations);

    let mut before = vec![0.0; npix];
    let mut first_change = None;
    for _ in 0..cfg.n_iterations {
        before.copy_from_slice(&x);
        for &a in &active {
            proj.project_angle(&x, a, &mut fx, Some(&mut row_sums));
            for k in 0..nd {
                fx[k] = if row_sums[k] > 0.0 { (columns[a][k] - fx[k]) / row_sums[k] } else { 0.0 };
            }
            back.iter_mut().for_each(|v| *v = 0.0);
            col_sums.iter_mut().for_each(|v| *v = 0.0);
            proj.adjoint_angle(&fx, a, &mut back, Some(&mut col_sums));
            for i in 0..npix {
                if col_sums[i] > 0.0 {
                    x[i] += cfg.relaxation * back[i] / col_sums[i];
                }
            }
        }
        // TV strength follows the size of the data-consistency update, so the
        // smoothing fades as the sweeps converge.
        let change = x.iter().zip(&before).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let first = *first_change.get_or_insert(change);
        let ratio = if first > 0.0 { (change / first).min(1.0) } else { 0.0 };
        let step = cfg.tv_step_size * cfg.tv_weight * ratio;
        if step > 0.0 {
            for _ in 0..cfg.tv_inner_steps {
                tv_grad.iter_mut().for_each(|v| *v = 0.0);
                tv_sum_grad(&x, out_w, out_h, TV_EPS, 1.0, &mut tv_grad);
                for (xi, g) in x.iter_mut().zip(&tv_grad) {
                    *xi -= step * g;
                }
            }
        }
        for xi in x.iter_mut() {
            if *xi < 0.0 {
                *xi = 0.0;
            }
        }
        residuals.push(data_rmse(&proj, &x, &columns, &active, &mut fx));
    }

    Ok(SartTvOutput { image: ImageSlice::new(out_w, out_h, x)?, residuals })
}

fn data_rmse(proj: &RayProjector, x: &[f64], columns: &[Vec<f64>], active: &[usize], scratch: &mut [f64]) -> f64 {
    let mut acc = 0.0;
    let mut n = 0usize;
    for &a in active {
        proj.project_angle(x, a, scratch, None);
        for (p, m) in scratch.iter().zip(&columns[a]) {
            acc += (m - p) * (m - p);
            n += 1;
        }
    }
    (acc / n as f64).sqrt()
}
