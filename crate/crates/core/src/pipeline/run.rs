use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;

use super::config::PipelineConfig;
use super::data::{build_dataset, image_norm, sino_norm, Case};
use crate::error::{Error, Result};
use crate::io::{export_pgm, save_grid, Grid};
use crate::metrics::MetricReport;
use crate::models::{
    expect_channels, image_tensor, load_autoencoder, load_spatial, refine_forward, spatial_forward, stage1_forward,
    tensor_image, AeBlock, Autoencoder, CropMethod, SliceWindow, SpatialAae,
};
use crate::tomo::{fbp_reconstruct, FilterKind, ImageSlice, Sinogram};

/// Stage 1 over a volume with one normalisation for all of its sinograms.
pub fn run_stage1(block: &mut dyn AeBlock, case: &Case) -> Result<Vec<Sinogram>> {
    sino_block(block, &case.merged, case)
}

/// A sinogram block applied to `inputs` (one per slice), keeping the valid columns.
pub fn sino_block(block: &mut dyn AeBlock, inputs: &[Sinogram], case: &Case) -> Result<Vec<Sinogram>> {
    let norm = sino_norm(inputs);
    inputs.iter().zip(&case.masked).map(|(s, m)| stage1_forward(block, s, m.mask(), norm)).collect()
}

pub fn fbp_all(sinos: &[Sinogram], filter: FilterKind, size: usize) -> Result<Vec<ImageSlice>> {
    sinos.iter().map(|s| fbp_reconstruct(s, filter, size, size)).collect()
}

/// Stage 2 over a volume, clamping the window at the first and last slices.
pub fn run_stage2(g1: &mut dyn AeBlock, g2: &mut dyn AeBlock, imgs: &[ImageSlice]) -> Result<Vec<ImageSlice>> {
    let norm = image_norm(imgs);
    (0..imgs.len()).map(|i| spatial_forward(g1, g2, &SliceWindow::clamped(imgs, i)?, norm)).collect()
}

pub fn run_stage3(block: &mut dyn AeBlock, imgs: &[ImageSlice], method: CropMethod) -> Result<Vec<ImageSlice>> {
    let norm = image_norm(imgs);
    imgs.iter().map(|img| refine_forward(block, img, method, norm)).collect()
}

/// A single-channel image block applied slice by slice.
pub fn run_image_block(block: &mut dyn AeBlock, imgs: &[ImageSlice]) -> Result<Vec<ImageSlice>> {
    let norm = image_norm(imgs);
    imgs.iter().map(|img| tensor_image(&block.apply(&image_tensor(&[img])?, norm)?)).collect()
}

/// Borrowed blocks for the three stages.
pub struct Stages<'a> {
    pub stage1: &'a mut dyn AeBlock,
    pub g1: &'a mut dyn AeBlock,
    pub g2: &'a mut dyn AeBlock,
    pub stage3: &'a mut dyn AeBlock,
    pub crop: CropMethod,
    pub filter: FilterKind,
}

/// Intermediate and final results for one volume.
#[derive(Debug, Clone)]
pub struct Restored {
    pub stage1: Vec<Sinogram>,
    pub fbp: Vec<ImageSlice>,
    pub stage2: Vec<ImageSlice>,
    pub output: Vec<ImageSlice>,
}

impl Stages<'_> {
    pub fn restore(&mut self, case: &Case) -> Result<Restored> {
        let size = case.gt.width();
        let stage1 = run_stage1(self.stage1, case)?;
        let fbp = fbp_all(&stage1, self.filter, size)?;
        let stage2 = run_stage2(self.g1, self.g2, &fbp)?;
        let output = run_stage3(self.stage3, &stage2, self.crop)?;
        Ok(Restored { stage1, fbp, stage2, output })
    }
}

/// Trained networks of the full pipeline.
#[derive(Debug, Clone)]
pub struct PipelineModels {
    pub stage1: Autoencoder<f32>,
    pub stage2: SpatialAae<f32>,
    pub stage3: Autoencoder<f32>,
}

impl PipelineModels {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let c = &cfg.checkpoints;
        let stage1 = load_autoencoder(&PipelineConfig::require(&c.stage1, "stage1")?)?;
        expect_channels(&stage1, 1, "stage 1")?;
        let stage2 = load_spatial(&PipelineConfig::require(&c.stage2, "stage2")?)?;
        let stage3 = load_autoencoder(&PipelineConfig::require(&c.stage3, "stage3")?)?;
        expect_channels(&stage3, 1, "stage 3")?;
        Ok(Self { stage1, stage2, stage3 })
    }

    pub fn stages(&mut self, crop: CropMethod, filter: FilterKind) -> Stages<'_> {
        Stages {
            stage1: &mut self.stage1,
            g1: &mut self.stage2.g1,
            g2: &mut self.stage2.g2,
            stage3: &mut self.stage3,
            crop,
            filter,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SliceMetric {
    pub case_id: String,
    pub slice: usize,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone)]
pub struct PipelineReport {
    pub volumes: Vec<(String, Vec<ImageSlice>)>,
    pub slices: Vec<SliceMetric>,
    pub mean: MetricReport,
}

pub fn slice_metrics(case_id: &str, out: &[ImageSlice], gt: &[ImageSlice]) -> Result<Vec<SliceMetric>> {
    out.iter()
        .zip(gt)
        .enumerate()
        .map(|(k, (o, g))| {
            let m = MetricReport::compare(o, g)?;
            Ok(SliceMetric { case_id: case_id.to_string(), slice: k, psnr: m.psnr, ssim: m.ssim })
        })
        .collect()
}

pub fn mean_metric(slices: &[SliceMetric]) -> MetricReport {
    let r: Vec<_> = slices.iter().map(|s| MetricReport { psnr: s.psnr, ssim: s.ssim }).collect();
    MetricReport::mean(&r).unwrap_or(MetricReport { psnr: f64::NAN, ssim: f64::NAN })
}

/// Restore every case, scoring against its ground truth. Volumes are
/// independent; slice order within a volume is preserved.
pub fn restore_cases(stages: &mut Stages<'_>, cases: &[Case]) -> Result<PipelineReport> {
    let mut volumes = Vec::with_capacity(cases.len());
    let mut slices = Vec::new();
    for case in cases {
        let r = stages.restore(case)?;
        slices.extend(slice_metrics(case.id(), &r.output, case.gt.slices())?);
        volumes.push((case.id().to_string(), r.output));
    }
    let mean = mean_metric(&slices);
    Ok(PipelineReport { volumes, slices, mean })
}

fn mkdir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Per-slice grids and PGM previews under `dir/<case>/`, plus `dir/metrics.csv`.
pub fn write_report(report: &PipelineReport, dir: &Path) -> Result<Vec<PathBuf>> {
    mkdir(dir)?;
    let mut written = Vec::new();
    for (id, imgs) in &report.volumes {
        let vdir = dir.join(id);
        mkdir(&vdir)?;
        for (k, img) in imgs.iter().enumerate() {
            let g = vdir.join(format!("slice{k:03}.grid"));
            save_grid(&g, &Grid::from_image(img))?;
            let p = vdir.join(format!("slice{k:03}.pgm"));
            export_pgm(img, &p)?;
            written.extend([g, p]);
        }
    }
    let mut csv = String::from("case,slice,psnr,ssim\n");
    for s in &report.slices {
        csv.push_str(&format!("{},{},{:.6},{:.6}\n", s.case_id, s.slice, s.psnr, s.ssim));
    }
    csv.push_str(&format!("mean,,{:.6},{:.6}\n", report.mean.psnr, report.mean.ssim));
    let p = dir.join("metrics.csv");
    write_text(&p, &csv)?;
    written.push(p);
    Ok(written)
}

/// Load the stage checkpoints, restore the test split and write the outputs.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<PipelineReport> {
    cfg.validate()?;
    let mut models = PipelineModels::load(cfg)?;
    let data = build_dataset(cfg)?;
    let report = restore_cases(&mut models.stages(cfg.crop_method, cfg.filter), &data.test)?;
    write_report(&report, &cfg.output_dir)?;
    Ok(report)
}
