//! Configuration, orchestration of the three-stage pipeline, baselines and reports.

mod compare;
mod config;
mod data;
mod run;
mod train;

pub use compare::{
    compare_cases, run_comparison, train_and_compare, train_baselines, train_comparison, write_comparison,
    BaselineModels, Comparison, ComparisonRow, LABELS,
};
pub use config::{Checkpoints, CutSpec, DataConfig, Geometry, PipelineConfig, StageTraining, SEED_ENV};
pub use data::{
    build_dataset, image_norm, image_pairs, patch_pairs, phantom_volumes, sino_norm, sino_pairs, window_pairs, Case,
    Dataset,
};
pub use run::{
    fbp_all, mean_metric, restore_cases, run_image_block, run_pipeline, run_stage1, run_stage2, run_stage3, sino_block,
    slice_metrics, write_report, PipelineModels, PipelineReport, Restored, SliceMetric, Stages,
};
pub use train::{
    fit_autoencoder, fit_spatial, single_slice_pairs, stage1_images, stage1_pairs, stage2_images, stage2_pairs,
    stage3_pairs, train_pipeline, train_stage, train_stage1, train_stage2, train_stage3, StageId,
};
