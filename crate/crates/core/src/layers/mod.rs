//! Forward and backward computation for every layer kind in the pipeline:
//! 2-D convolution, 2x2 max pooling, dense, tanh, dropout and softmax.

mod activation;
mod conv;
mod dense;
mod dropout;
mod pool;

pub use activation::{softmax, tanh_backward, tanh_forward};
pub use conv::{conv2d_backward, conv2d_forward, ConvParams, KERNEL_SIZE, PADDING};
pub use dense::{dense_backward, dense_forward, DenseParams};
pub use dropout::{dropout_apply, dropout_backward, DropoutMask};
pub use pool::{maxpool_backward, maxpool_forward, PoolMask};
