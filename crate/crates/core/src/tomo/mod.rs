//! Parallel-beam tomography: forward projection, filtered backprojection and
//! SART with total-variation smoothing.
//!
//! Geometry conventions shared by every routine in this module:
//!
//! * pixel `(row, col)` sits at `x = col - (width - 1) / 2`, `y = row - (height - 1) / 2`;
//! * a projection at angle `θ` measures `s = x cos θ + y sin θ`;
//! * detector `k` sits at `s = k - (n_detectors - 1) / 2`, unit spacing.

mod fbp;
mod filter;
mod projector;
mod sart;

pub use fbp::fbp_reconstruct;
pub use filter::{apply_filter, FilterKind};
pub use projector::{radon_forward, RayProjector};
pub use sart::{sart_tv_reconstruct, SartTvConfig, SartTvOutput};

use crate::error::{Error, Result};

/// A single reconstructed (or ground-truth) slice, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageSlice {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ImageSlice {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!("image dims must be positive, got {width}x{height}")));
        }
        if data.len() != width * height {
            return Err(Error::ShapeMismatch(format!(
                "image {}x{} needs {} values, got {}",
                width,
                height,
                width * height,
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("image pixel {i} is {}", data[i])));
        }
        Ok(Self { width, height, data })
    }

    pub fn zeros(width: usize, height: usize) -> Self {
        Self { width, height, data: vec![0.0; width * height] }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    pub fn same_dims(&self, other: &ImageSlice) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub fn min_max(&self) -> (f64, f64) {
        min_max(&self.data)
    }
}

/// Line integrals indexed by detector (rows) and projection angle (columns).
#[derive(Debug, Clone, PartialEq)]
pub struct Sinogram {
    n_detectors: usize,
    angles: Vec<f64>,
    data: Vec<f64>,
}

impl Sinogram {
    pub fn new(n_detectors: usize, angles: Vec<f64>, data: Vec<f64>) -> Result<Self> {
        if n_detectors == 0 {
            return Err(Error::InvalidArgument("sinogram needs at least one detector".into()));
        }
        validate_angles(&angles)?;
        if data.len() != n_detectors * angles.len() {
            return Err(Error::ShapeMismatch(format!(
                "sinogram {}x{} needs {} values, got {}",
                n_detectors,
                angles.len(),
                n_detectors * angles.len(),
                data.len()
            )));
        }
        if let Some(i) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("sinogram entry {i} is {}", data[i])));
        }
        Ok(Self { n_detectors, angles, data })
    }

    pub fn zeros(n_detectors: usize, angles: Vec<f64>) -> Result<Self> {
        let n = n_detectors * angles.len();
        Self::new(n_detectors, angles, vec![0.0; n])
    }

    pub fn n_detectors(&self) -> usize {
        self.n_detectors
    }

    pub fn n_angles(&self) -> usize {
        self.angles.len()
    }

    pub fn angles(&self) -> &[f64] {
        &self.angles
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    #[inline]
    pub fn get(&self, detector: usize, angle: usize) -> f64 {
        self.data[detector * self.angles.len() + angle]
    }

    /// Copy of one projection (all detectors at angle index `angle`).
    pub fn column(&self, angle: usize) -> Vec<f64> {
        let na = self.angles.len();
        (0..self.n_detectors).map(|d| self.data[d * na + angle]).collect()
    }

    pub fn set_column(&mut self, angle: usize, values: &[f64]) {
        let na = self.angles.len();
        for (d, &v) in values.iter().enumerate().take(self.n_detectors) {
            self.data[d * na + angle] = v;
        }
    }

    pub fn min_max(&self) -> (f64, f64) {
        min_max(&self.data)
    }

    /// View the sinogram as an image with detectors as rows.
    pub fn to_image(&self) -> ImageSlice {
        ImageSlice { width: self.angles.len(), height: self.n_detectors, data: self.data.clone() }
    }
}

/// One angle per degree over `[0, n)`: the default full-view grid.
pub fn degree_grid(n_angles: usize) -> Vec<f64> {
    (0..n_angles).map(|a| a as f64 * 180.0 / n_angles as f64).collect()
}

fn validate_angles(angles: &[f64]) -> Result<()> {
    if angles.is_empty() {
        return Err(Error::InvalidArgument("angle list is empty".into()));
    }
    for (i, &a) in angles.iter().enumerate() {
        if !a.is_finite() || !(0.0..180.0).contains(&a) {
            return Err(Error::InvalidArgument(format!("angle {i} = {a} outside [0, 180)")));
        }
        if i > 0 && a <= angles[i - 1] {
            return Err(Error::InvalidArgument("angles must be strictly increasing".into()));
        }
    }
    Ok(())
}

pub(crate) fn min_max(data: &[f64]) -> (f64, f64) {
    data.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_bad_angles() {
        assert!(Sinogram::zeros(4, vec![]).is_err());
        assert!(Sinogram::zeros(4, vec![0.0, 0.0]).is_err());
        assert!(Sinogram::zeros(4, vec![10.0, 5.0]).is_err());
        assert!(Sinogram::zeros(4, vec![180.0]).is_err());
        assert!(Sinogram::zeros(4, degree_grid(180)).is_ok());
    }

    #[test]
    fn rejects_non_finite_pixels() {
        let err = ImageSlice::new(2, 1, vec![0.0, f64::NAN]).unwrap_err();
        assert_eq!(err.kind(), "non_finite");
        assert!(ImageSlice::new(2, 2, vec![0.0; 3]).is_err());
    }

    #[test]
    fn column_roundtrip() {
        let mut s = Sinogram::zeros(3, degree_grid(4)).unwrap();
        s.set_column(2, &[1.0, 2.0, 3.0]);
        assert_eq!(s.column(2), vec![1.0, 2.0, 3.0]);
        assert_eq!(s.get(1, 2), 2.0);
        assert_eq!(s.column(1), vec![0.0; 3]);
    }
}
