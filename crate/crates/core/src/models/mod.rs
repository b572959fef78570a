//! Network definitions, the three reconstruction stages and training.

mod checkpoint;
mod netspec;
mod network;
mod padding;
mod spatial;
mod stages;
mod train;

pub use checkpoint::{expect_channels, load_autoencoder, load_spatial, save_module};
pub use netspec::{LayerRow, NetSpec, RowKind, FULL_BASE};
pub use network::{build_aae, Autoencoder, Discriminator, Encoder, SIZE_MULTIPLE};
pub use padding::{pad_reflect, unpad, PadRecord};
pub use spatial::SpatialAae;
pub use stages::{
    assemble_patches, crop_patches, image_tensor, patch_layout, refine_forward, spatial_forward, stage1_forward,
    tensor_image, triplet_batch, AeBlock, ChannelMeanBlock, CropMethod, IdentityBlock, Norm, Patch, SliceWindow,
};
pub use train::{
    evaluate_metrics, evaluate_mse, train, EpochLog, TrainConfig, TrainPair, TrainReport, Trainable, LOG_HEADER,
};
