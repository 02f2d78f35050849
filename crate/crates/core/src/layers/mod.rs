//! Forward and backward passes for each layer type, plus the loss.

mod activation;
mod conv;
mod dense;
mod dropout;
mod loss;
mod pool;

pub use activation::{relu_backward, relu_forward, relu_in_place};
pub use conv::{Conv2d, ConvCache, ConvGrads, KERNEL};
pub use dense::{Dense, DenseCache, DenseGrads};
pub use dropout::{Dropout, DropoutCache};
pub use loss::{argmax_rows, softmax_cross_entropy};
pub use pool::{MaxPool, PoolCache};
