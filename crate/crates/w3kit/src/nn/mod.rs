//! Differentiable building blocks: pooling, convolutions, dense stacks,
//! activations, temporal shift and finite-difference gradient checking.

pub mod activations;
pub mod conv;
pub mod gradcheck;
pub mod linear;
pub mod pool;
pub mod shift;

pub use activations::{relu, sigmoid, sigmoid_grad_from_output, softmax, softmax_in_place};
pub use conv::{
    conv1d_same, conv1d_same_backward, conv2d_same, conv2d_same_backward, conv3d_same,
    conv3d_same_backward, Conv2dLayer, Conv3dLayer, TimeDepthwiseConv1d,
};
pub use gradcheck::{grad_check, GradCheckReport};
pub use linear::{context_stream_spec, LayerSpec, Linear, Mlp, MlpCache};
pub use pool::{
    channel_pool, channel_pool_backward, channel_pool_cached, global_avg_pool,
    global_avg_pool_backward, max_pool_2x2, max_pool_2x2_backward, spatial_pool,
    spatial_pool_backward, spatial_pool_cached, PoolMode,
};
pub use shift::{temporal_shift, temporal_shift_backward};
