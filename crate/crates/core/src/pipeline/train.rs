use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use super::config::PipelineConfig;
use super::data::{build_dataset, image_pairs, patch_pairs, sino_pairs, window_pairs, Case, Dataset};
use super::run::{fbp_all, run_stage1, run_stage2, PipelineModels};
use crate::error::{Error, Result};
use crate::models::{
    expect_channels, load_autoencoder, load_spatial, save_module, train, Autoencoder, CropMethod, Discriminator,
    NetSpec, SpatialAae, TrainConfig, TrainPair, TrainReport,
};
use crate::tomo::{FilterKind, ImageSlice};

const DISC_SEED_MIX: u64 = 0x9e37_79b9_7f4a_7c15;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StageId {
    One,
    Two,
    Three,
}

impl FromStr for StageId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "1" | "one" | "stage1" => Ok(Self::One),
            "2" | "two" | "stage2" => Ok(Self::Two),
            "3" | "three" | "stage3" => Ok(Self::Three),
            other => Err(Error::InvalidArgument(format!("unknown stage {other:?}"))),
        }
    }
}

impl fmt::Display for StageId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::One => "stage1",
            Self::Two => "stage2",
            Self::Three => "stage3",
        })
    }
}

fn collect<F>(cases: &[Case], mut f: F) -> Result<Vec<TrainPair>>
where
    F: FnMut(&Case) -> Result<Vec<TrainPair>>,
{
    let mut out = Vec::new();
    for c in cases {
        out.extend(f(c)?);
    }
    Ok(out)
}

/// Train a single autoencoder with `in_channels` inputs, adversarially when
/// `tc.adversarial` is set.
pub fn fit_autoencoder(
    in_channels: usize,
    tc: &TrainConfig,
    train_set: &[TrainPair],
    val_set: &[TrainPair],
    log: Option<&Path>,
) -> Result<(Autoencoder<f32>, TrainReport)> {
    let mut g = Autoencoder::new(NetSpec::new(in_channels, tc.base_width)?, tc.seed)?;
    let mut d = Discriminator::new(tc.base_width, tc.seed ^ DISC_SEED_MIX)?;
    let report = train(&mut g, Some(&mut d), train_set, val_set, tc, log)?;
    Ok((g, report))
}

pub fn fit_spatial(
    tc: &TrainConfig,
    train_set: &[TrainPair],
    val_set: &[TrainPair],
    log: Option<&Path>,
) -> Result<(SpatialAae<f32>, TrainReport)> {
    let mut g = SpatialAae::new(tc.base_width, tc.seed)?;
    let mut d = Discriminator::new(tc.base_width, tc.seed ^ DISC_SEED_MIX)?;
    let report = train(&mut g, Some(&mut d), train_set, val_set, tc, log)?;
    Ok((g, report))
}

/// Stage-1 pairs: merged sinogram against the full-view sinogram.
pub fn stage1_pairs(cases: &[Case]) -> Result<Vec<TrainPair>> {
    collect(cases, |c| sino_pairs(&c.merged, &c.full, c.masked[0].mask()))
}

/// FBP of the stage-1 output for every slice of `case`.
pub fn stage1_images(s1: &mut Autoencoder<f32>, case: &Case, filter: FilterKind) -> Result<Vec<ImageSlice>> {
    fbp_all(&run_stage1(s1, case)?, filter, case.gt.width())
}

pub fn stage2_pairs(s1: &mut Autoencoder<f32>, cases: &[Case], filter: FilterKind) -> Result<Vec<TrainPair>> {
    collect(cases, |c| window_pairs(&stage1_images(s1, c, filter)?, c.gt.slices()))
}

/// Single-slice image pairs on the stage-1 reconstructions (the
/// non-spatial alternative to stage 2).
pub fn single_slice_pairs(s1: &mut Autoencoder<f32>, cases: &[Case], filter: FilterKind) -> Result<Vec<TrainPair>> {
    collect(cases, |c| image_pairs(&stage1_images(s1, c, filter)?, c.gt.slices()))
}

pub fn stage2_images(
    s1: &mut Autoencoder<f32>,
    s2: &mut SpatialAae<f32>,
    case: &Case,
    filter: FilterKind,
) -> Result<Vec<ImageSlice>> {
    run_stage2(&mut s2.g1, &mut s2.g2, &stage1_images(s1, case, filter)?)
}

pub fn stage3_pairs(
    s1: &mut Autoencoder<f32>,
    s2: &mut SpatialAae<f32>,
    cases: &[Case],
    filter: FilterKind,
    method: CropMethod,
    seed: u64,
) -> Result<Vec<TrainPair>> {
    let mut k = 0u64;
    collect(cases, |c| {
        k += 1;
        patch_pairs(&stage2_images(s1, s2, c, filter)?, c.gt.slices(), method, seed.wrapping_add(k))
    })
}

pub fn train_stage1(
    cfg: &PipelineConfig,
    data: &Dataset,
    log: Option<&Path>,
) -> Result<(Autoencoder<f32>, TrainReport)> {
    fit_autoencoder(1, &cfg.train.stage1, &stage1_pairs(&data.train)?, &stage1_pairs(&data.val)?, log)
}

pub fn train_stage2(
    cfg: &PipelineConfig,
    data: &Dataset,
    s1: &mut Autoencoder<f32>,
    log: Option<&Path>,
) -> Result<(SpatialAae<f32>, TrainReport)> {
    let tr = stage2_pairs(s1, &data.train, cfg.filter)?;
    let va = stage2_pairs(s1, &data.val, cfg.filter)?;
    fit_spatial(&cfg.train.stage2, &tr, &va, log)
}

pub fn train_stage3(
    cfg: &PipelineConfig,
    data: &Dataset,
    s1: &mut Autoencoder<f32>,
    s2: &mut SpatialAae<f32>,
    log: Option<&Path>,
) -> Result<(Autoencoder<f32>, TrainReport)> {
    let seed = cfg.train.stage3.seed;
    let tr = stage3_pairs(s1, s2, &data.train, cfg.filter, cfg.crop_method, seed)?;
    // validation always on the tiling layout
    let va = stage3_pairs(s1, s2, &data.val, cfg.filter, CropMethod::CornerCrop, seed)?;
    fit_autoencoder(1, &cfg.train.stage3, &tr, &va, log)
}

/// All three stages in order.
pub fn train_pipeline(cfg: &PipelineConfig, data: &Dataset) -> Result<(PipelineModels, [TrainReport; 3])> {
    let (mut s1, r1) = train_stage1(cfg, data, None)?;
    let (mut s2, r2) = train_stage2(cfg, data, &mut s1, None)?;
    let (s3, r3) = train_stage3(cfg, data, &mut s1, &mut s2, None)?;
    Ok((PipelineModels { stage1: s1, stage2: s2, stage3: s3 }, [r1, r2, r3]))
}

fn prior_stage1(cfg: &PipelineConfig) -> Result<Autoencoder<f32>> {
    let s1 = load_autoencoder(&PipelineConfig::require(&cfg.checkpoints.stage1, "stage1")?)?;
    expect_channels(&s1, 1, "stage 1")?;
    Ok(s1)
}

/// Train one stage on the configured data and write `<output_dir>/<stage>.ckpt`
/// and `<output_dir>/<stage>_log.csv`. Stages 2 and 3 read the earlier
/// stages from the configured checkpoints.
pub fn train_stage(stage: StageId, cfg: &PipelineConfig) -> Result<(PathBuf, TrainReport)> {
    cfg.validate()?;
    let data = build_dataset(cfg)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let ckpt = dir.join(format!("{stage}.ckpt"));
    let log = dir.join(format!("{stage}_log.csv"));
    let report = match stage {
        StageId::One => {
            let (g, r) = train_stage1(cfg, &data, Some(&log))?;
            save_module(&ckpt, &g)?;
            r
        }
        StageId::Two => {
            let mut s1 = prior_stage1(cfg)?;
            let (g, r) = train_stage2(cfg, &data, &mut s1, Some(&log))?;
            save_module(&ckpt, &g)?;
            r
        }
        StageId::Three => {
            let mut s1 = prior_stage1(cfg)?;
            let mut s2 = load_spatial(&PipelineConfig::require(&cfg.checkpoints.stage2, "stage2")?)?;
            let (g, r) = train_stage3(cfg, &data, &mut s1, &mut s2, Some(&log))?;
            save_module(&ckpt, &g)?;
            r
        }
    };
    Ok((ckpt, report))
}
