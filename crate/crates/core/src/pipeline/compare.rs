use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use super::config::PipelineConfig;
use super::data::{build_dataset, image_pairs, sino_pairs, Case, Dataset};
use super::run::{
    fbp_all, mean_metric, run_image_block, sino_block, slice_metrics, write_text, PipelineModels, SliceMetric,
};
use super::train::{fit_autoencoder, train_pipeline};
use crate::error::{Error, Result};
use crate::metrics::MetricReport;
use crate::models::{expect_channels, load_autoencoder, save_module, Autoencoder, TrainPair};
use crate::nn::Module;
use crate::tomo::{sart_tv_reconstruct, ImageSlice};

/// Row labels of the comparison table, in order.
pub const LABELS: [&str; 9] = ["FBP", "FBP+MR", "SART-TV", "SART-TV+MR", "II", "II+MR", "SI", "SI+MR", "Ours"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComparisonRow {
    pub label: &'static str,
    pub psnr: f64,
    pub ssim: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Comparison {
    pub rows: Vec<ComparisonRow>,
    pub fbp_ms_per_slice: f64,
    pub sart_ms_per_slice: f64,
}

impl Comparison {
    pub fn get(&self, label: &str) -> Option<&ComparisonRow> {
        self.rows.iter().find(|r| r.label == label)
    }

    pub fn psnr(&self, label: &str) -> f64 {
        self.get(label).map_or(f64::NAN, |r| r.psnr)
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("algorithm,psnr,ssim\n");
        for r in &self.rows {
            s.push_str(&format!("{},{:.6},{:.6}\n", r.label, r.psnr, r.ssim));
        }
        s
    }

    pub fn to_table(&self) -> String {
        let mut s = format!("{:<12} {:>10} {:>8}\n", "algorithm", "PSNR", "SSIM");
        for r in &self.rows {
            s.push_str(&format!("{:<12} {:>10.3} {:>8.3}\n", r.label, r.psnr, r.ssim));
        }
        s
    }

    /// Wall-clock line; kept out of the written files so reruns stay byte-identical.
    pub fn timing_line(&self) -> String {
        format!("timing: FBP {:.2} ms/slice, SART-TV {:.2} ms/slice", self.fbp_ms_per_slice, self.sart_ms_per_slice)
    }
}

/// Baseline networks. SI+MR is the stage-1 network followed by FBP, so it
/// comes from the pipeline models.
#[derive(Debug, Clone)]
pub struct BaselineModels {
    pub ii: Autoencoder<f32>,
    pub ii_mr: Autoencoder<f32>,
    pub si: Autoencoder<f32>,
}

impl BaselineModels {
    pub fn load(cfg: &PipelineConfig) -> Result<Self> {
        let c = &cfg.checkpoints;
        let load = |p: &Option<std::path::PathBuf>, what: &str| -> Result<Autoencoder<f32>> {
            let m = load_autoencoder(&PipelineConfig::require(p, what)?)?;
            expect_channels(&m, 1, what)?;
            Ok(m)
        };
        Ok(Self { ii: load(&c.ii, "ii")?, ii_mr: load(&c.ii_mr, "ii_mr")?, si: load(&c.si, "si")? })
    }
}

fn pairs_over<F>(cases: &[Case], mut f: F) -> Result<Vec<TrainPair>>
where
    F: FnMut(&Case) -> Result<Vec<TrainPair>>,
{
    let mut out = Vec::new();
    for c in cases {
        out.extend(f(c)?);
    }
    Ok(out)
}

/// Train II (on FBP of the cut sinogram), II+MR (on FBP of the merged
/// sinogram) and SI (on the zero-filled sinogram).
pub fn train_baselines(cfg: &PipelineConfig, data: &Dataset) -> Result<BaselineModels> {
    let tc = &cfg.train.baseline;
    let (f, n) = (cfg.filter, cfg.geometry.size);
    let ii_set = |cases: &[Case]| pairs_over(cases, |c| image_pairs(&fbp_all(&c.cut_sinos(), f, n)?, c.gt.slices()));
    let ii_mr_set = |cases: &[Case]| pairs_over(cases, |c| image_pairs(&fbp_all(&c.merged, f, n)?, c.gt.slices()));
    let si_set = |cases: &[Case]| pairs_over(cases, |c| sino_pairs(&c.cut_sinos(), &c.full, c.masked[0].mask()));
    let ii = fit_autoencoder(1, tc, &ii_set(&data.train)?, &ii_set(&data.val)?, None)?.0;
    let ii_mr = fit_autoencoder(1, tc, &ii_mr_set(&data.train)?, &ii_mr_set(&data.val)?, None)?.0;
    let si = fit_autoencoder(1, tc, &si_set(&data.train)?, &si_set(&data.val)?, None)?.0;
    Ok(BaselineModels { ii, ii_mr, si })
}

/// All nine algorithms on `cases`, scored slice by slice against ground truth.
pub fn compare_cases(
    cfg: &PipelineConfig,
    cases: &[Case],
    pipeline: &mut PipelineModels,
    baselines: &mut BaselineModels,
) -> Result<Comparison> {
    if cases.is_empty() {
        return Err(Error::InvalidArgument("comparison needs at least one test volume".into()));
    }
    let (f, n) = (cfg.filter, cfg.geometry.size);
    let mut per: Vec<Vec<SliceMetric>> = vec![Vec::new(); LABELS.len()];
    let (mut fbp_s, mut sart_s, mut n_slices) = (0.0, 0.0, 0usize);
    for c in cases {
        let gt = c.gt.slices();
        let cut = c.cut_sinos();
        let t = Instant::now();
        let fbp_cut = fbp_all(&cut, f, n)?;
        fbp_s += t.elapsed().as_secs_f64();
        let fbp_mr = fbp_all(&c.merged, f, n)?;
        let t = Instant::now();
        let sart: Vec<ImageSlice> = c
            .masked
            .iter()
            .map(|m| Ok(sart_tv_reconstruct(m.sino(), Some(m.mask().valid()), &cfg.sart, n, n)?.image))
            .collect::<Result<_>>()?;
        sart_s += t.elapsed().as_secs_f64();
        let sart_mr: Vec<ImageSlice> =
            c.merged.iter().map(|s| Ok(sart_tv_reconstruct(s, None, &cfg.sart, n, n)?.image)).collect::<Result<_>>()?;
        n_slices += gt.len();
        let ii = run_image_block(&mut baselines.ii, &fbp_cut)?;
        let ii_mr = run_image_block(&mut baselines.ii_mr, &fbp_mr)?;
        let si = fbp_all(&sino_block(&mut baselines.si, &cut, c)?, f, n)?;
        let ours = pipeline.stages(cfg.crop_method, f).restore(c)?;
        let si_mr = ours.fbp;
        let outputs = [fbp_cut, fbp_mr, sart, sart_mr, ii, ii_mr, si, si_mr, ours.output];
        for (acc, out) in per.iter_mut().zip(&outputs) {
            acc.extend(slice_metrics(c.id(), out, gt)?);
        }
    }
    let rows = LABELS
        .iter()
        .zip(&per)
        .map(|(&label, m)| {
            let MetricReport { psnr, ssim } = mean_metric(m);
            ComparisonRow { label, psnr, ssim }
        })
        .collect();
    let ms = |s: f64| 1e3 * s / n_slices as f64;
    Ok(Comparison { rows, fbp_ms_per_slice: ms(fbp_s), sart_ms_per_slice: ms(sart_s) })
}

/// Load every checkpoint, compare on the test split and write
/// `comparison.csv` and `comparison.txt` under the output directory.
pub fn run_comparison(cfg: &PipelineConfig) -> Result<Comparison> {
    cfg.validate()?;
    let mut pipeline = PipelineModels::load(cfg)?;
    let mut baselines = BaselineModels::load(cfg)?;
    let data = build_dataset(cfg)?;
    let cmp = compare_cases(cfg, &data.test, &mut pipeline, &mut baselines)?;
    write_comparison(&cmp, &cfg.output_dir)?;
    Ok(cmp)
}

pub fn write_comparison(cmp: &Comparison, dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_text(&dir.join("comparison.csv"), &cmp.to_csv())?;
    write_text(&dir.join("comparison.txt"), &cmp.to_table())
}

/// Train the pipeline and the baselines on the training split, then compare
/// on the test split.
pub fn train_and_compare(cfg: &PipelineConfig, data: &Dataset) -> Result<(Comparison, PipelineModels, BaselineModels)> {
    let (mut pipeline, _) = train_pipeline(cfg, data)?;
    let mut baselines = train_baselines(cfg, data)?;
    let cmp = compare_cases(cfg, &data.test, &mut pipeline, &mut baselines)?;
    Ok((cmp, pipeline, baselines))
}

/// Train everything from scratch, save all six checkpoints and the
/// comparison files under the output directory.
pub fn train_comparison(cfg: &PipelineConfig) -> Result<(Comparison, Vec<PathBuf>)> {
    cfg.validate()?;
    let data = build_dataset(cfg)?;
    let (cmp, p, b) = train_and_compare(cfg, &data)?;
    let dir = &cfg.output_dir;
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut written = Vec::new();
    let mut save = |name: &str, m: &dyn Module<f32>| -> Result<()> {
        let path = dir.join(format!("{name}.ckpt"));
        save_module(&path, m)?;
        written.push(path);
        Ok(())
    };
    save("stage1", &p.stage1)?;
    save("stage2", &p.stage2)?;
    save("stage3", &p.stage3)?;
    save("ii", &b.ii)?;
    save("ii_mr", &b.ii_mr)?;
    save("si", &b.si)?;
    write_comparison(&cmp, dir)?;
    Ok((cmp, written))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::NetSpec;
    use crate::models::SpatialAae;
    use crate::pipeline::{DataConfig, Geometry};

    #[test]
    fn untrained_table_has_nine_rows_and_fresh_networks_match_fbp() {
        let mut cfg = PipelineConfig::default();
        cfg.geometry = Geometry { size: 32, n_angles: 30, n_detectors: 32 };
        cfg.data = DataConfig { n_train: 0, n_val: 0, n_test: 1, n_slices: 5, n_ellipsoids: 3, ..Default::default() };
        cfg.sart.n_iterations = 3;
        let data = build_dataset(&cfg).unwrap();
        let ae = |s| Autoencoder::new(NetSpec::new(1, 2).unwrap(), s).unwrap();
        let mut p = PipelineModels { stage1: ae(1), stage2: SpatialAae::new(2, 2).unwrap(), stage3: ae(3) };
        let mut b = BaselineModels { ii: ae(4), ii_mr: ae(5), si: ae(6) };
        let cmp = compare_cases(&cfg, &data.test, &mut p, &mut b).unwrap();
        let labels: Vec<_> = cmp.rows.iter().map(|r| r.label).collect();
        assert_eq!(labels, LABELS);
        // identity-initialised networks reproduce their inputs
        assert_eq!(cmp.psnr("II"), cmp.psnr("FBP"));
        assert_eq!(cmp.psnr("II+MR"), cmp.psnr("FBP+MR"));
        assert_eq!(cmp.psnr("SI"), cmp.psnr("FBP"));
        assert_eq!(cmp.psnr("Ours"), cmp.psnr("FBP+MR"));
        assert_eq!(cmp.to_csv().lines().count(), 10);
        assert_eq!(cmp.to_table().lines().count(), 10);
        assert!(cmp.timing_line().contains("ms/slice"));
    }
}
