//! Inference for the three stages, written against `AeBlock` so stub
//! blocks can stand in for trained networks.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::network::{Autoencoder, SIZE_MULTIPLE};
use super::padding::{pad_reflect, unpad};
use crate::error::{Error, Result};
use crate::limited_view::{splice_columns, AngularMask};
use crate::nn::{Scalar, Tensor};
use crate::tomo::{ImageSlice, Sinogram};

/// Affine map of physical values onto [0,1]: `(v - lo) / range`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Norm {
    pub lo: f64,
    pub range: f64,
}

impl Norm {
    pub fn from_values<'a>(values: impl IntoIterator<Item = &'a f64>) -> Self {
        let (lo, hi) = values.into_iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(l, h), &v| (l.min(v), h.max(v)));
        if !lo.is_finite() || hi <= lo {
            return Self { lo: if lo.is_finite() { lo } else { 0.0 }, range: 1.0 };
        }
        Self { lo, range: hi - lo }
    }

    pub fn apply(&self, v: f64) -> f64 {
        (v - self.lo) / self.range
    }

    pub fn tensor<T: Scalar>(&self, x: &Tensor<f64>) -> Tensor<T> {
        let data = x.data().iter().map(|&v| T::from_f64_lossy(self.apply(v))).collect();
        Tensor::from_vec(x.dims(), data).expect("same dims")
    }
}

/// One autoencoder block in the physical domain: maps `(n, c, h, w)` to
/// `(n, 1, h, w)`. `norm` is the normalisation shared by the whole call.
pub trait AeBlock {
    fn apply(&mut self, x: &Tensor<f64>, norm: Norm) -> Result<Tensor<f64>>;
}

/// Passes the centre input channel through unchanged.
#[derive(Debug, Clone, Copy, Default)]
pub struct IdentityBlock;

impl AeBlock for IdentityBlock {
    fn apply(&mut self, x: &Tensor<f64>, _: Norm) -> Result<Tensor<f64>> {
        let (_, c, _, _) = x.nchw();
        Ok(x.channel(c / 2))
    }
}

/// Mean over input channels.
#[derive(Debug, Clone, Copy, Default)]
pub struct ChannelMeanBlock;

impl AeBlock for ChannelMeanBlock {
    fn apply(&mut self, x: &Tensor<f64>, _: Norm) -> Result<Tensor<f64>> {
        let (n, c, h, w) = x.nchw();
        let plane = h * w;
        let mut out = vec![0.0; n * plane];
        for b in 0..n {
            for (i, o) in out[b * plane..(b + 1) * plane].iter_mut().enumerate() {
                let s: f64 = (0..c).map(|ch| x.data()[(b * c + ch) * plane + i]).sum();
                *o = s / c as f64;
            }
        }
        Tensor::from_vec(&[n, 1, h, w], out)
    }
}

/// Runs the network on normalised input; the result is `x[skip] + range * r`
/// so a zero residual reproduces the skip channel exactly.
impl<T: Scalar> AeBlock for Autoencoder<T> {
    fn apply(&mut self, x: &Tensor<f64>, norm: Norm) -> Result<Tensor<f64>> {
        let (padded, rec) = pad_reflect(x, SIZE_MULTIPLE)?;
        let r = self.forward_residual(&norm.tensor::<T>(&padded))?;
        let r = unpad(&r, &rec)?;
        let mut out = x.channel(self.spec().skip_channel());
        for (o, &v) in out.data_mut().iter_mut().zip(r.data()) {
            *o += norm.range * v.as_f64();
        }
        Ok(out)
    }
}

pub fn image_tensor(slices: &[&ImageSlice]) -> Result<Tensor<f64>> {
    let first = slices.first().ok_or_else(|| Error::InvalidArgument("no slices".into()))?;
    if slices.iter().any(|s| !s.same_dims(first)) {
        return Err(Error::ShapeMismatch("slices differ in size".into()));
    }
    let data = slices.iter().flat_map(|s| s.data().iter().copied()).collect();
    Tensor::from_vec(&[1, slices.len(), first.height(), first.width()], data)
}

pub fn tensor_image(t: &Tensor<f64>) -> Result<ImageSlice> {
    let (n, c, h, w) = t.nchw();
    if n * c != 1 {
        return Err(Error::ShapeMismatch(format!("expected a single plane, got {:?}", t.dims())));
    }
    ImageSlice::new(w, h, t.data().to_vec())
}

/// Stage 1: complete a merged sinogram. Valid columns are copied from the
/// input; only masked columns come from the network.
pub fn stage1_forward<B: AeBlock + ?Sized>(
    block: &mut B,
    merged: &Sinogram,
    mask: &AngularMask,
    norm: Norm,
) -> Result<Sinogram> {
    if mask.len() != merged.n_angles() {
        return Err(Error::ShapeMismatch(format!("mask {} vs {} angles", mask.len(), merged.n_angles())));
    }
    let x = Tensor::from_vec(&[1, 1, merged.n_detectors(), merged.n_angles()], merged.data().to_vec())?;
    let y = block.apply(&x, norm)?;
    let pred = Sinogram::new(merged.n_detectors(), merged.angles().to_vec(), y.into_data())?;
    Ok(splice_columns(merged, &pred, mask.valid()))
}

/// Five consecutive slices `s_{i-2} .. s_{i+2}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SliceWindow {
    slices: Vec<ImageSlice>,
    center: usize,
}

impl SliceWindow {
    pub fn new(slices: Vec<ImageSlice>, center: usize) -> Result<Self> {
        if slices.len() != 5 {
            return Err(Error::InvalidArgument(format!("slice window needs 5 slices, got {}", slices.len())));
        }
        if slices.iter().any(|s| !s.same_dims(&slices[0])) {
            return Err(Error::ShapeMismatch("window slices differ in size".into()));
        }
        Ok(Self { slices, center })
    }

    /// Window around `i`, replicating the first/last slice past the ends.
    pub fn clamped(slices: &[ImageSlice], i: usize) -> Result<Self> {
        if slices.is_empty() || i >= slices.len() {
            return Err(Error::InvalidArgument(format!("window centre {i} outside {} slices", slices.len())));
        }
        let last = slices.len() as isize - 1;
        let picks = (-2..=2).map(|d| slices[(i as isize + d).clamp(0, last) as usize].clone()).collect();
        Self::new(picks, i)
    }

    pub fn slices(&self) -> &[ImageSlice] {
        &self.slices
    }

    pub fn center(&self) -> usize {
        self.center
    }

    /// `(s_{i-2}, s_{i-1}, s_i)`, `(s_{i-1}, s_i, s_{i+1})`, `(s_i, s_{i+1}, s_{i+2})`.
    pub fn triplets(&self) -> [[&ImageSlice; 3]; 3] {
        let s = &self.slices;
        [[&s[0], &s[1], &s[2]], [&s[1], &s[2], &s[3]], [&s[2], &s[3], &s[4]]]
    }

    pub fn norm(&self) -> Norm {
        Norm::from_values(self.slices.iter().flat_map(|s| s.data()))
    }

    /// `(1, 5, h, w)`.
    pub fn tensor(&self) -> Result<Tensor<f64>> {
        image_tensor(&self.slices.iter().collect::<Vec<_>>())
    }
}

/// The three triplets of a `(n, 5, h, w)` tensor as a `(3n, 3, h, w)` batch.
pub fn triplet_batch<T: Scalar>(x: &Tensor<T>) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.nchw();
    if c != 5 {
        return Err(Error::ShapeMismatch(format!("spatial input needs 5 channels, got {c}")));
    }
    let plane = h * w;
    let mut out = Vec::with_capacity(n * 9 * plane);
    for b in 0..n {
        for t in 0..3 {
            out.extend_from_slice(&x.data()[(b * 5 + t) * plane..(b * 5 + t + 3) * plane]);
        }
    }
    Tensor::from_vec(&[3 * n, 3, h, w], out)
}

/// `s''_i = G2(G1(S1), G1(S2), G1(S3))` with one shared first-level block.
pub fn spatial_forward<B1: AeBlock + ?Sized, B2: AeBlock + ?Sized>(
    g1: &mut B1,
    g2: &mut B2,
    window: &SliceWindow,
    norm: Norm,
) -> Result<ImageSlice> {
    let first = g1.apply(&triplet_batch(&window.tensor()?)?, norm)?;
    let (n3, _, h, w) = first.nchw();
    let stacked = first.reshape(&[n3 / 3, 3, h, w])?;
    tensor_image(&g2.apply(&stacked, norm)?)
}

/// How the four half-size patches are taken from an image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CropMethod {
    RandomCrop,
    #[default]
    CornerCrop,
    CornerCropFlip,
}

impl FromStr for CropMethod {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "random" | "random-crop" => Ok(Self::RandomCrop),
            "corner" | "corner-crop" => Ok(Self::CornerCrop),
            "corner-flip" | "corner-crop-flip" => Ok(Self::CornerCropFlip),
            other => Err(Error::InvalidArgument(format!("unknown crop method {other:?}"))),
        }
    }
}

impl fmt::Display for CropMethod {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::RandomCrop => "random-crop",
            Self::CornerCrop => "corner-crop",
            Self::CornerCropFlip => "corner-crop-flip",
        })
    }
}

/// A half-size patch: top-left corner and flips applied after cropping.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Patch {
    pub row: usize,
    pub col: usize,
    pub flip_h: bool,
    pub flip_v: bool,
}

/// Patch placements for `method`. Random placements need `rng`; corner
/// placements tile the image exactly.
pub fn patch_layout(method: CropMethod, h: usize, w: usize, rng: Option<&mut dyn rand::RngCore>) -> Result<[Patch; 4]> {
    if !h.is_multiple_of(2) || !w.is_multiple_of(2) {
        return Err(Error::ShapeMismatch(format!("refinement needs even dims, got {h}x{w}")));
    }
    let (ph, pw) = (h / 2, w / 2);
    let corner = |flip: bool| {
        [(0, 0, false, false), (0, pw, flip, false), (ph, 0, false, flip), (ph, pw, flip, flip)]
            .map(|(row, col, flip_h, flip_v)| Patch { row, col, flip_h, flip_v })
    };
    Ok(match (method, rng) {
        (CropMethod::CornerCrop, _) => corner(false),
        (CropMethod::CornerCropFlip, _) => corner(true),
        (CropMethod::RandomCrop, Some(rng)) => [(); 4].map(|_| Patch {
            row: rng.gen_range(0..=ph),
            col: rng.gen_range(0..=pw),
            flip_h: false,
            flip_v: false,
        }),
        (CropMethod::RandomCrop, None) => corner(false),
    })
}

/// Cut the patches of every plane of `(n, c, h, w)` into `(4n, c, h/2, w/2)`.
pub fn crop_patches<T: Scalar>(x: &Tensor<T>, layout: &[Patch; 4]) -> Result<Tensor<T>> {
    let (n, c, h, w) = x.nchw();
    let (ph, pw) = (h / 2, w / 2);
    let mut out = Vec::with_capacity(x.len());
    for b in 0..n {
        for p in layout {
            for ch in 0..c {
                let plane = &x.data()[(b * c + ch) * h * w..(b * c + ch + 1) * h * w];
                for r in 0..ph {
                    let sr = p.row + if p.flip_v { ph - 1 - r } else { r };
                    for cc in 0..pw {
                        let sc = p.col + if p.flip_h { pw - 1 - cc } else { cc };
                        out.push(plane[sr * w + sc]);
                    }
                }
            }
        }
    }
    Tensor::from_vec(&[4 * n, c, ph, pw], out)
}

/// Inverse of `crop_patches` for a tiling layout.
pub fn assemble_patches<T: Scalar>(patches: &Tensor<T>, layout: &[Patch; 4], h: usize, w: usize) -> Result<Tensor<T>> {
    let (n4, c, ph, pw) = patches.nchw();
    if n4 % 4 != 0 || 2 * ph != h || 2 * pw != w {
        return Err(Error::ShapeMismatch(format!("cannot assemble {:?} into {h}x{w}", patches.dims())));
    }
    let n = n4 / 4;
    let mut out = Tensor::zeros(&[n, c, h, w]);
    for b in 0..n {
        for (k, p) in layout.iter().enumerate() {
            for ch in 0..c {
                let src = &patches.data()[((b * 4 + k) * c + ch) * ph * pw..((b * 4 + k) * c + ch + 1) * ph * pw];
                let dst = &mut out.data_mut()[(b * c + ch) * h * w..(b * c + ch + 1) * h * w];
                for r in 0..ph {
                    let sr = p.row + if p.flip_v { ph - 1 - r } else { r };
                    for cc in 0..pw {
                        let sc = p.col + if p.flip_h { pw - 1 - cc } else { cc };
                        dst[sr * w + sc] = src[r * pw + cc];
                    }
                }
            }
        }
    }
    Ok(out)
}

/// Stage 3: refine four half-size patches and reassemble. Random crops do
/// not tile, so inference with `RandomCrop` uses the corner layout.
pub fn refine_forward<B: AeBlock + ?Sized>(
    block: &mut B,
    img: &ImageSlice,
    method: CropMethod,
    norm: Norm,
) -> Result<ImageSlice> {
    let (h, w) = (img.height(), img.width());
    let layout = patch_layout(method, h, w, None)?;
    let x = image_tensor(&[img])?;
    let patches = crop_patches(&x, &layout)?;
    let y = block.apply(&patches, norm)?;
    tensor_image(&assemble_patches(&y, &layout, h, w)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::NetSpec;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn random_image(w: usize, h: usize, seed: u64) -> ImageSlice {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        ImageSlice::new(w, h, (0..w * h).map(|_| rng.gen_range(-0.5..2.0)).collect()).unwrap()
    }

    #[test]
    fn triplet_grouping() {
        let slices: Vec<_> = (0..5).map(|k| ImageSlice::new(2, 1, vec![k as f64; 2]).unwrap()).collect();
        let w = SliceWindow::new(slices, 2).unwrap();
        let t = w.triplets();
        let ids: Vec<Vec<f64>> = t.iter().map(|g| g.iter().map(|s| s.data()[0]).collect()).collect();
        assert_eq!(ids, vec![vec![0.0, 1.0, 2.0], vec![1.0, 2.0, 3.0], vec![2.0, 3.0, 4.0]]);
        let batch = triplet_batch(&w.tensor().unwrap()).unwrap();
        assert_eq!(batch.dims(), &[3, 3, 1, 2]);
        assert_eq!(
            batch.data().iter().step_by(2).copied().collect::<Vec<_>>(),
            vec![0., 1., 2., 1., 2., 3., 2., 3., 4.]
        );
    }

    #[test]
    fn channel_mean_stub_formula() {
        let s: Vec<_> = (0..5).map(|k| random_image(12, 8, k)).collect();
        let w = SliceWindow::new(s.clone(), 2).unwrap();
        let out = spatial_forward(&mut ChannelMeanBlock, &mut ChannelMeanBlock, &w, w.norm()).unwrap();
        for i in 0..out.data().len() {
            let v: Vec<f64> = s.iter().map(|x| x.data()[i]).collect();
            let m1 = (v[0] + v[1] + v[2]) / 3.0;
            let m2 = (v[1] + v[2] + v[3]) / 3.0;
            let m3 = (v[2] + v[3] + v[4]) / 3.0;
            assert_eq!(out.data()[i], (m1 + m2 + m3) / 3.0);
        }
    }

    #[test]
    fn identity_stub_and_fresh_network_keep_centre() {
        let s: Vec<_> = (0..5).map(|k| random_image(20, 12, k + 10)).collect();
        let w = SliceWindow::new(s.clone(), 2).unwrap();
        assert_eq!(spatial_forward(&mut IdentityBlock, &mut IdentityBlock, &w, w.norm()).unwrap(), s[2]);
        let mut g1 = Autoencoder::<f32>::named(NetSpec::new(3, 2).unwrap(), 1, "g1.").unwrap();
        let mut g2 = Autoencoder::<f32>::named(NetSpec::new(3, 2).unwrap(), 2, "g2.").unwrap();
        assert_eq!(spatial_forward(&mut g1, &mut g2, &w, w.norm()).unwrap(), s[2]);
    }

    #[test]
    fn clamped_window_at_edges() {
        let s: Vec<_> = (0..6).map(|k| ImageSlice::new(1, 1, vec![k as f64]).unwrap()).collect();
        let ids = |w: SliceWindow| w.slices().iter().map(|x| x.data()[0]).collect::<Vec<_>>();
        assert_eq!(ids(SliceWindow::clamped(&s, 0).unwrap()), vec![0., 0., 0., 1., 2.]);
        assert_eq!(ids(SliceWindow::clamped(&s, 5).unwrap()), vec![3., 4., 5., 5., 5.]);
    }

    #[test]
    fn refine_identity_is_exact() {
        let img = random_image(24, 16, 3);
        for m in [CropMethod::CornerCrop, CropMethod::CornerCropFlip, CropMethod::RandomCrop] {
            assert_eq!(refine_forward(&mut IdentityBlock, &img, m, Norm::from_values(img.data())).unwrap(), img);
        }
        let mut ae = Autoencoder::<f32>::new(NetSpec::new(1, 2).unwrap(), 0).unwrap();
        assert_eq!(
            refine_forward(&mut ae, &img, CropMethod::CornerCropFlip, Norm::from_values(img.data())).unwrap(),
            img
        );
        assert!(refine_forward(
            &mut IdentityBlock,
            &random_image(5, 4, 1),
            CropMethod::CornerCrop,
            Norm { lo: 0.0, range: 1.0 }
        )
        .is_err());
    }

    #[test]
    fn flipped_patches_share_the_centre_corner() {
        let (h, w) = (8, 6);
        // pixel value encodes distance-to-centre ordering: mark the four centre pixels
        let mut data = vec![0.0; h * w];
        for (r, c) in [(3, 2), (3, 3), (4, 2), (4, 3)] {
            data[r * w + c] = 1.0;
        }
        let x = Tensor::from_vec(&[1, 1, h, w], data).unwrap();
        let layout = patch_layout(CropMethod::CornerCropFlip, h, w, None).unwrap();
        let p = crop_patches(&x, &layout).unwrap();
        let (ph, pw) = (h / 2, w / 2);
        for k in 0..4 {
            let plane = &p.data()[k * ph * pw..(k + 1) * ph * pw];
            assert_eq!(plane[ph * pw - 1], 1.0, "patch {k}");
            assert_eq!(plane.iter().sum::<f64>(), 1.0);
        }
        assert_eq!(assemble_patches(&p, &layout, h, w).unwrap(), x);
    }

    #[test]
    fn stage1_keeps_valid_columns() {
        let angles = crate::tomo::degree_grid(20);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let sino = Sinogram::new(16, angles, (0..16 * 20).map(|_| rng.gen_range(0.0..3.0)).collect()).unwrap();
        let mask = AngularMask::new((0..20).map(|a| a < 14).collect()).unwrap();
        let mut ae = Autoencoder::<f32>::new(NetSpec::new(1, 2).unwrap(), 9).unwrap();
        // perturb the last layer so the network is no longer the identity
        for v in ae.params_mut_last() {
            *v = 0.05;
        }
        let out = stage1_forward(&mut ae, &sino, &mask, Norm::from_values(sino.data())).unwrap();
        assert_eq!(out.n_angles(), 20);
        for d in 0..16 {
            for a in 0..20 {
                if a < 14 {
                    assert_eq!(out.get(d, a), sino.get(d, a));
                }
            }
        }
        assert!((14..20).any(|a| out.get(0, a) != sino.get(0, a)));
        let fresh = stage1_forward(
            &mut Autoencoder::<f32>::new(NetSpec::new(1, 2).unwrap(), 9).unwrap(),
            &sino,
            &mask,
            Norm::from_values(sino.data()),
        );
        assert_eq!(fresh.unwrap(), sino);
    }
}
