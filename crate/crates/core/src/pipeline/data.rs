use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::config::{CutSpec, DataConfig, Geometry, PipelineConfig};
use crate::error::{Error, Result};
use crate::io::load_grid;
use crate::limited_view::{cut, merge_radon, AngularMask, MaskedSinogram};
use crate::models::{
    crop_patches, image_tensor, pad_reflect, patch_layout, CropMethod, Norm, SliceWindow, TrainPair, SIZE_MULTIPLE,
};
use crate::nn::Tensor;
use crate::phantom::{volume_phantom, DatasetSplit, SliceVolume};
use crate::tomo::{radon_forward, FilterKind, ImageSlice, Sinogram};

/// One volume with its full, cut and merged sinograms (one per slice).
#[derive(Debug, Clone)]
pub struct Case {
    pub gt: SliceVolume,
    pub full: Vec<Sinogram>,
    pub masked: Vec<MaskedSinogram>,
    pub merged: Vec<Sinogram>,
}

impl Case {
    pub fn new(gt: SliceVolume, geom: &Geometry, cut_spec: &CutSpec, filter: FilterKind) -> Result<Self> {
        if gt.width() != geom.size || gt.height() != geom.size {
            return Err(Error::GeometryMismatch(format!(
                "volume {} is {}x{}, config size is {}",
                gt.case_id(),
                gt.width(),
                gt.height(),
                geom.size
            )));
        }
        let angles = geom.angles();
        let mut full = Vec::with_capacity(gt.len());
        let mut masked = Vec::with_capacity(gt.len());
        let mut merged = Vec::with_capacity(gt.len());
        for s in gt.slices() {
            let sino = radon_forward(s, &angles, geom.n_detectors)?;
            let m = cut(&sino, cut_spec.mode, cut_spec.degrees)?;
            merged.push(merge_radon(&m, filter)?);
            masked.push(m);
            full.push(sino);
        }
        Ok(Self { gt, full, masked, merged })
    }

    pub fn id(&self) -> &str {
        self.gt.case_id()
    }

    /// Zero-filled cut sinograms.
    pub fn cut_sinos(&self) -> Vec<Sinogram> {
        self.masked.iter().map(|m| m.sino().clone()).collect()
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub split: DatasetSplit,
    pub train: Vec<Case>,
    pub val: Vec<Case>,
    pub test: Vec<Case>,
}

/// Seeded phantom volumes; seeds that give a discontinuous volume are skipped.
pub fn phantom_volumes(data: &DataConfig, size: usize, count: usize) -> Result<Vec<SliceVolume>> {
    let mut out = Vec::with_capacity(count);
    let mut seed = data.seed;
    while out.len() < count {
        match volume_phantom(data.n_slices, size, data.n_ellipsoids, seed) {
            Ok(v) => out.push(v),
            Err(Error::InvalidArgument(m)) if m.contains("discontinuous") => {}
            Err(e) => return Err(e),
        }
        seed += 1;
    }
    Ok(out)
}

/// Train / val / test cases. When `data.volumes` is set the test split is
/// read from those grid files.
pub fn build_dataset(cfg: &PipelineConfig) -> Result<Dataset> {
    let d = &cfg.data;
    let from_files = !d.volumes.is_empty();
    let n_gen = d.n_train + d.n_val + if from_files { 0 } else { d.n_test };
    let mut vols = phantom_volumes(d, cfg.geometry.size, n_gen)?;
    if from_files {
        for p in &d.volumes {
            let id = p.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "volume".into());
            vols.push(load_grid(p)?.to_volume(&id)?);
        }
    }
    let ids: Vec<String> = vols.iter().map(|v| v.case_id().to_string()).collect();
    let split = DatasetSplit::sequential(&ids, d.n_train, d.n_val)?;
    let mut cases =
        vols.into_iter().map(|v| Case::new(v, &cfg.geometry, &cfg.cut, cfg.filter)).collect::<Result<Vec<_>>>()?;
    let test = cases.split_off(d.n_train + d.n_val);
    let val = cases.split_off(d.n_train);
    Ok(Dataset { split, train: cases, val, test })
}

pub fn sino_norm(sinos: &[Sinogram]) -> Norm {
    Norm::from_values(sinos.iter().flat_map(|s| s.data()))
}

pub fn image_norm(imgs: &[ImageSlice]) -> Norm {
    Norm::from_values(imgs.iter().flat_map(|s| s.data()))
}

fn sino_tensor(s: &Sinogram) -> Result<Tensor<f64>> {
    Tensor::from_vec(&[1, 1, s.n_detectors(), s.n_angles()], s.data().to_vec())
}

fn prepared(x: &Tensor<f64>, norm: Norm) -> Result<Tensor<f32>> {
    Ok(pad_reflect(&norm.tensor::<f32>(x), SIZE_MULTIPLE)?.0)
}

fn pair(input: &Tensor<f64>, target: &Tensor<f64>, norm: Norm) -> Result<TrainPair> {
    Ok(TrainPair::new(prepared(input, norm)?, prepared(target, norm)?))
}

fn check_len(a: usize, b: usize) -> Result<()> {
    if a != b {
        return Err(Error::ShapeMismatch(format!("{a} inputs for {b} targets")));
    }
    Ok(())
}

/// Sinogram-domain pairs of one volume, normalised by the inputs' range.
/// Valid angles are marked known; padding columns mirror their source column.
pub fn sino_pairs(inputs: &[Sinogram], targets: &[Sinogram], mask: &AngularMask) -> Result<Vec<TrainPair>> {
    check_len(inputs.len(), targets.len())?;
    let norm = sino_norm(inputs);
    let known = padded_known(mask.valid());
    inputs
        .iter()
        .zip(targets)
        .map(|(i, t)| {
            let mut p = pair(&sino_tensor(i)?, &sino_tensor(t)?, norm)?;
            p.known_cols = Some(known.clone());
            Ok(p)
        })
        .collect()
}

fn padded_known(valid: &[bool]) -> Vec<bool> {
    let row = Tensor::from_vec(&[1, 1, 1, valid.len()], valid.iter().map(|&v| if v { 1.0f32 } else { 0.0 }).collect())
        .expect("row dims");
    let (padded, _) = pad_reflect(&row, SIZE_MULTIPLE).expect("non-zero multiple");
    let w = padded.dims()[3];
    padded.data()[..w].iter().map(|&v| v == 1.0).collect()
}

/// Single-slice image pairs of one volume.
pub fn image_pairs(inputs: &[ImageSlice], targets: &[ImageSlice]) -> Result<Vec<TrainPair>> {
    check_len(inputs.len(), targets.len())?;
    let norm = image_norm(inputs);
    inputs.iter().zip(targets).map(|(i, t)| pair(&image_tensor(&[i])?, &image_tensor(&[t])?, norm)).collect()
}

/// Five-slice windows (clamped at the ends) against the centre target.
pub fn window_pairs(inputs: &[ImageSlice], targets: &[ImageSlice]) -> Result<Vec<TrainPair>> {
    check_len(inputs.len(), targets.len())?;
    let norm = image_norm(inputs);
    (0..inputs.len())
        .map(|i| pair(&SliceWindow::clamped(inputs, i)?.tensor()?, &image_tensor(&[&targets[i]])?, norm))
        .collect()
}

/// Four patches per slice, cropped identically from input and target.
pub fn patch_pairs(
    inputs: &[ImageSlice],
    targets: &[ImageSlice],
    method: CropMethod,
    seed: u64,
) -> Result<Vec<TrainPair>> {
    check_len(inputs.len(), targets.len())?;
    let norm = image_norm(inputs);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    inputs
        .iter()
        .zip(targets)
        .map(|(i, t)| {
            let layout = patch_layout(method, i.height(), i.width(), Some(&mut rng))?;
            let x = crop_patches(&image_tensor(&[i])?, &layout)?;
            let y = crop_patches(&image_tensor(&[t])?, &layout)?;
            pair(&x, &y, norm)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::limited_view::CutMode;

    fn small_cfg() -> PipelineConfig {
        let mut cfg = PipelineConfig::default();
        cfg.geometry = Geometry { size: 32, n_angles: 36, n_detectors: 32 };
        cfg.data = DataConfig { n_train: 2, n_val: 1, n_test: 1, n_slices: 5, n_ellipsoids: 3, ..Default::default() };
        cfg
    }

    #[test]
    fn dataset_split_and_shapes() {
        let ds = build_dataset(&small_cfg()).unwrap();
        assert_eq!((ds.train.len(), ds.val.len(), ds.test.len()), (2, 1, 1));
        assert_eq!(ds.split.train, vec![ds.train[0].id().to_string(), ds.train[1].id().to_string()]);
        let c = &ds.test[0];
        assert_eq!(c.full.len(), 5);
        assert_eq!((c.full[0].n_detectors(), c.full[0].n_angles()), (32, 36));
        assert_eq!(c.masked[0].mask().n_valid(), 24);
        let pairs = sino_pairs(&c.merged, &c.full, c.masked[0].mask()).unwrap();
        assert_eq!(pairs[0].input.dims(), &[1, 1, 32, 48]);
        let known = pairs[0].known_cols.as_ref().unwrap();
        assert_eq!(known.len(), 48);
        assert!(known[..24].iter().all(|&k| k) && !known[24..47].iter().any(|&k| k));
        // reflect padding: column 47 mirrors column 23
        assert!(known[47]);
        let w = window_pairs(c.gt.slices(), c.gt.slices()).unwrap();
        assert_eq!(w[0].input.dims(), &[1, 5, 32, 32]);
        let p = patch_pairs(c.gt.slices(), c.gt.slices(), CropMethod::RandomCrop, 1).unwrap();
        assert_eq!(p[0].input.dims(), &[4, 1, 16, 16]);
        assert_eq!(p[0].input, p[0].target);
    }

    #[test]
    fn wrong_volume_size_is_geometry_mismatch() {
        let vol = phantom_volumes(&DataConfig::default(), 48, 1).unwrap().pop().unwrap();
        let err = Case::new(vol, &Geometry::default(), &CutSpec::new(CutMode::Rear, 60.0), FilterKind::RamLak);
        assert_eq!(err.unwrap_err().kind(), "geometry_mismatch");
    }
}
