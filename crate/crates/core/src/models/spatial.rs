use super::netspec::NetSpec;
use super::network::Autoencoder;
use super::stages::{spatial_forward, triplet_batch, SliceWindow};
use crate::error::Result;
use crate::nn::{Module, Param, Scalar, Tensor};
use crate::tomo::ImageSlice;

/// Two-level cascade: a shared first-level block over the three triplets,
/// then a second block over their stacked outputs.
#[derive(Debug, Clone)]
pub struct SpatialAae<T> {
    pub g1: Autoencoder<T>,
    pub g2: Autoencoder<T>,
    batch: usize,
}

impl<T: Scalar> SpatialAae<T> {
    pub fn new(base: usize, seed: u64) -> Result<Self> {
        let spec = NetSpec::new(3, base)?;
        Ok(Self {
            g1: Autoencoder::named(spec, seed, "g1.")?,
            g2: Autoencoder::named(spec, seed.wrapping_add(1), "g2.")?,
            batch: 0,
        })
    }

    /// Normalised `(n, 5, h, w)` -> `(n, 1, h, w)`.
    pub fn forward(&mut self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let n = x.nchw().0;
        self.batch = n;
        let first = self.g1.forward(&triplet_batch(x)?)?;
        let (_, _, h, w) = first.nchw();
        self.g2.forward(&first.reshape(&[n, 3, h, w])?)
    }

    pub fn backward(&mut self, dy: &Tensor<T>) -> Result<()> {
        let d_first = self.g2.backward(dy);
        let (_, _, h, w) = d_first.nchw();
        self.g1.backward(&d_first.reshape(&[3 * self.batch, 1, h, w])?);
        Ok(())
    }

    /// Inference normalised over the window itself.
    pub fn infer(&mut self, window: &SliceWindow) -> Result<ImageSlice> {
        spatial_forward(&mut self.g1, &mut self.g2, window, window.norm())
    }
}

impl<T: Scalar> Module<T> for SpatialAae<T> {
    fn params(&self) -> Vec<&Param<T>> {
        let mut p = self.g1.params();
        p.extend(self.g2.params());
        p
    }

    fn params_mut(&mut self) -> Vec<&mut Param<T>> {
        let mut p = self.g1.params_mut();
        p.extend(self.g2.params_mut());
        p
    }
}
