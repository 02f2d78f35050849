//! Handwritten Arabic character recognition built from first principles.
//!
//! The pipeline has four stages:
//!
//! 1. a convolutional network ([`Model`]) trained with momentum SGD
//!    ([`optimizer`]) on 64x64 glyphs ([`dataset`]);
//! 2. a one-vs-rest linear SVM ([`svm`]) trained on the network's
//!    1024-dimensional penultimate features, with input dropout;
//! 3. k-means over per-class feature centroids ([`cluster`]), grouping the
//!    28 letters into 13 master-stroke clusters;
//! 4. CRR/ECR reporting ([`eval`]).
//!
//! ```
//! use ahcr::{Model, ModelConfig, Tensor, Mode};
//!
//! let model = Model::<f32>::init(ModelConfig::with_widths([4, 4, 4]), 0)?;
//! let batch = Tensor::zeros(&[2, 1, 64, 64])?;
//! let out = model.forward(&batch, Mode::Inference)?;
//! assert_eq!(out.logits.shape(), &[2, 28]);
//! assert_eq!(out.features.shape(), &[2, 1024]);
//! # Ok::<(), ahcr::Error>(())
//! ```
//!
//! The guide in `book/` walks through each stage; its code blocks are
//! compiled and run as doc-tests of this crate.

pub mod catalog;
pub mod cluster;
pub mod dataset;
mod error;
pub mod eval;
pub mod gradcheck;
pub mod layers;
pub mod model;
pub mod optimizer;
pub mod persist;
mod scalar;
pub mod svm;
mod tensor;

pub use catalog::{ClassId, ReferencePartition, CLASS_NAMES, NUM_CLASSES, NUM_GROUPS};
pub use error::{Error, Result};
pub use model::{Mode, Model, ModelConfig, CANONICAL_WIDTHS, FEATURE_DIM, INPUT_SIDE};
pub use scalar::Scalar;
pub use tensor::{fold, unfold, Tensor, Window};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/intro.md")]
    mod intro {}
    #[doc = include_str!("../../../book/src/tensors.md")]
    mod tensors {}
    #[doc = include_str!("../../../book/src/network.md")]
    mod network {}
    #[doc = include_str!("../../../book/src/gradients.md")]
    mod gradients {}
    #[doc = include_str!("../../../book/src/training.md")]
    mod training {}
    #[doc = include_str!("../../../book/src/svm.md")]
    mod svm {}
    #[doc = include_str!("../../../book/src/clustering.md")]
    mod clustering {}
    #[doc = include_str!("../../../book/src/evaluation.md")]
    mod evaluation {}
    #[doc = include_str!("../../../book/src/data.md")]
    mod data {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
