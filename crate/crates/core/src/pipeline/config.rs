use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::limited_view::{CutMode, ANGULAR_SPAN};
use crate::models::{CropMethod, TrainConfig};
use crate::phantom::MIN_SLICES;
use crate::tomo::{degree_grid, FilterKind, SartTvConfig};

/// Environment variable that overrides every seed in a config.
pub const SEED_ENV: &str = "LVCT_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Geometry {
    /// Square image side.
    pub size: usize,
    /// Views on the uniform grid `k * 180 / n_angles` degrees.
    pub n_angles: usize,
    pub n_detectors: usize,
}

impl Default for Geometry {
    fn default() -> Self {
        Self { size: 128, n_angles: 180, n_detectors: 128 }
    }
}

impl Geometry {
    pub fn validate(&self) -> Result<()> {
        if self.size < 16 || self.n_angles < 2 || self.n_detectors == 0 {
            return Err(Error::Config(format!(
                "geometry {}x{} image, {} angles, {} detectors: need size >= 16, >= 2 angles, >= 1 detector",
                self.size, self.size, self.n_angles, self.n_detectors
            )));
        }
        Ok(())
    }

    pub fn angles(&self) -> Vec<f64> {
        degree_grid(self.n_angles)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CutSpec {
    pub mode: CutMode,
    pub degrees: f64,
}

impl Default for CutSpec {
    fn default() -> Self {
        Self { mode: CutMode::Rear, degrees: 60.0 }
    }
}

impl CutSpec {
    pub fn new(mode: CutMode, degrees: f64) -> Self {
        Self { mode, degrees }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.degrees.is_finite() && self.degrees >= 0.0 && self.degrees < ANGULAR_SPAN) {
            return Err(Error::Config(format!("cut of {} degrees outside [0, {ANGULAR_SPAN})", self.degrees)));
        }
        Ok(())
    }

    /// e.g. `rear-60`, `middle-90`.
    pub fn label(&self) -> String {
        format!("{}-{}", self.mode, self.degrees)
    }
}

/// Phantom volumes generated from consecutive seeds, or grid files for testing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub n_test: usize,
    pub n_slices: usize,
    pub n_ellipsoids: usize,
    pub seed: u64,
    /// Volume grid files used as the test split instead of phantoms.
    pub volumes: Vec<PathBuf>,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self { n_train: 4, n_val: 1, n_test: 3, n_slices: 8, n_ellipsoids: 6, seed: 1000, volumes: Vec::new() }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_slices < MIN_SLICES {
            return Err(Error::Config(format!("n_slices {} < {MIN_SLICES}", self.n_slices)));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Checkpoints {
    pub stage1: Option<PathBuf>,
    pub stage2: Option<PathBuf>,
    pub stage3: Option<PathBuf>,
    /// Image-domain baseline on the cut / merged reconstruction.
    pub ii: Option<PathBuf>,
    pub ii_mr: Option<PathBuf>,
    /// Sinogram-domain baseline on the zero-filled sinogram.
    pub si: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StageTraining {
    pub stage1: TrainConfig,
    pub stage2: TrainConfig,
    pub stage3: TrainConfig,
    /// Shared by the II / II+MR / SI baselines.
    pub baseline: TrainConfig,
}

impl Default for StageTraining {
    fn default() -> Self {
        let tc = TrainConfig::default();
        Self { stage1: tc.clone(), stage2: tc.clone(), stage3: tc.clone(), baseline: tc }
    }
}

impl StageTraining {
    fn all_mut(&mut self) -> [&mut TrainConfig; 4] {
        [&mut self.stage1, &mut self.stage2, &mut self.stage3, &mut self.baseline]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub filter: FilterKind,
    pub crop_method: CropMethod,
    pub geometry: Geometry,
    pub cut: CutSpec,
    pub data: DataConfig,
    pub checkpoints: Checkpoints,
    pub train: StageTraining,
    pub sart: SartTvConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            output_dir: PathBuf::from("out"),
            filter: FilterKind::RamLak,
            crop_method: CropMethod::CornerCrop,
            geometry: Geometry::default(),
            cut: CutSpec::default(),
            data: DataConfig::default(),
            checkpoints: Checkpoints::default(),
            train: StageTraining::default(),
            sart: SartTvConfig::default(),
        }
        .with_seed(0)
    }
}

impl PipelineConfig {
    /// Parse and validate; stage seeds always follow the top-level `seed`.
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        let seed = cfg.seed;
        Ok(cfg.with_seed(seed))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn validate(&self) -> Result<()> {
        self.geometry.validate()?;
        self.cut.validate()?;
        self.data.validate()?;
        for tc in [&self.train.stage1, &self.train.stage2, &self.train.stage3, &self.train.baseline] {
            tc.validate()?;
        }
        self.sart.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Set the master seed; stage `k` trains with `seed + k`.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        for (k, tc) in self.train.all_mut().into_iter().enumerate() {
            tc.seed = seed.wrapping_add(k as u64 + 1);
        }
        self
    }

    /// Apply `LVCT_SEED` when set.
    pub fn with_env_seed(self) -> Result<Self> {
        match std::env::var(SEED_ENV) {
            Ok(v) => {
                let seed =
                    v.trim().parse().map_err(|_| Error::Config(format!("{SEED_ENV}={v:?} is not an integer")))?;
                Ok(self.with_seed(seed))
            }
            Err(_) => Ok(self),
        }
    }

    pub fn require(path: &Option<PathBuf>, what: &str) -> Result<PathBuf> {
        path.clone().ok_or_else(|| Error::Config(format!("no checkpoint configured for {what}")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_roundtrip_and_sections() {
        let text = r#"
seed = 7
output_dir = "run"
crop_method = "corner-crop-flip"

[geometry]
size = 32
n_angles = 90

[cut]
mode = "middle"
degrees = 90

[train.stage1]
epochs = 3
alpha2 = 0.0

[checkpoints]
stage1 = "s1.ckpt"
"#;
        let cfg = PipelineConfig::from_toml_str(text).unwrap();
        assert_eq!(cfg.geometry, Geometry { size: 32, n_angles: 90, n_detectors: 128 });
        assert_eq!(cfg.cut, CutSpec::new(CutMode::Middle, 90.0));
        assert_eq!(cfg.crop_method, CropMethod::CornerCropFlip);
        assert_eq!(cfg.train.stage1.epochs, 3);
        assert_eq!(cfg.train.stage1.weights.alpha2, 0.0);
        assert_eq!(cfg.train.stage2, TrainConfig { seed: 9, ..TrainConfig::default() });
        assert_eq!(cfg.checkpoints.stage1.as_deref(), Some(Path::new("s1.ckpt")));
        assert_eq!(PipelineConfig::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }

    #[test]
    fn rejects_bad_values() {
        for bad in [
            "[cut]\ndegrees = 180",
            "[geometry]\nsize = 8",
            "unknown = 1",
            "[train.stage2]\nlr = 0.0",
            "[data]\nn_slices = 3",
        ] {
            assert_eq!(PipelineConfig::from_toml_str(bad).unwrap_err().kind(), "config", "{bad}");
        }
    }

    #[test]
    fn seed_override_reaches_every_stage() {
        let cfg = PipelineConfig::default().with_seed(40);
        assert_eq!(cfg.seed, 40);
        assert_eq!(
            [cfg.train.stage1.seed, cfg.train.stage2.seed, cfg.train.stage3.seed, cfg.train.baseline.seed],
            [41, 42, 43, 44]
        );
    }
}
