//! Small deterministic CNN engine: tensors, layers with manual backward,
//! Adam, finite-difference gradient checking and weight checkpoints.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod layers;
mod param;
mod tensor;

pub use adam::{Adam, AdamState, DEFAULT_LR};
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport};
pub use layers::{
    concat_channels, global_mean, global_mean_backward, sigmoid, sigmoid_backward, sigmoid_forward, split_channels,
    Conv3x3, LeakyRelu, MaxPool2, UpConv2x2, DEFAULT_LEAKY_SLOPE,
};
pub use param::{Module, Param};
pub use tensor::{Scalar, Tensor};
