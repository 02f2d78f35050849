//! The recognition network: three 7x7 conv + ReLU + max-pool stages, a
//! 1024-unit hidden layer with dropout, and a 28-way output layer.
//!
//! ```text
//! 64x64x1 -> conv -> 64x64xW1 -> pool -> 32x32xW1
//!         -> conv -> 32x32xW2 -> pool -> 16x16xW2
//!         -> conv -> 16x16xW3 -> pool ->  8x8xW3
//!         -> dense 1024 -> relu -> dropout -> dense 28
//! ```
//!
//! The canonical widths are `(128, 256, 512)`; reduced widths keep every
//! spatial size and only shrink channel counts.

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::catalog::{ClassId, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::layers::{
    argmax_rows, relu_backward, relu_in_place, softmax_cross_entropy, Conv2d, ConvCache, Dense, DenseCache,
    Dropout, DropoutCache, MaxPool, PoolCache,
};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Input image side.
pub const INPUT_SIDE: usize = 64;
/// Width of the penultimate feature layer.
pub const FEATURE_DIM: usize = 1024;
/// Channel widths of the full-size network.
pub const CANONICAL_WIDTHS: [usize; 3] = [128, 256, 512];
/// Default dropout rate on the feature layer.
pub const DEFAULT_DROPOUT: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ModelConfig {
    pub widths: [usize; 3],
    pub dropout_rate: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            widths: CANONICAL_WIDTHS,
            dropout_rate: DEFAULT_DROPOUT,
        }
    }
}

impl ModelConfig {
    pub fn with_widths(widths: [usize; 3]) -> Self {
        ModelConfig {
            widths,
            ..Default::default()
        }
    }

    /// Per-sample activation shapes from input to logits, `[C, H, W]` for
    /// image stages and `[D]` for the dense stages.
    pub fn shape_chain(&self) -> Vec<Vec<usize>> {
        let [a, b, c] = self.widths;
        vec![
            vec![1, 64, 64],
            vec![a, 64, 64],
            vec![a, 32, 32],
            vec![b, 32, 32],
            vec![b, 16, 16],
            vec![c, 16, 16],
            vec![c, 8, 8],
            vec![FEATURE_DIM],
            vec![NUM_CLASSES],
        ]
    }

    fn flat_dim(&self) -> usize {
        self.widths[2] * 8 * 8
    }
}

/// Whether a forward pass trains (dropout active) or infers.
pub enum Mode<'a> {
    Inference,
    /// Dropout masks are drawn from the given generator.
    Train(&'a mut dyn RngCore),
}

#[derive(Clone, Debug, PartialEq)]
pub struct Model<T = f32> {
    config: ModelConfig,
    pub conv: [Conv2d<T>; 3],
    pub fc1: Dense<T>,
    pub fc2: Dense<T>,
    pool: MaxPool,
    dropout: Dropout,
}

/// Everything the backward pass needs from one forward pass.
pub struct ForwardCache<T> {
    conv: Vec<ConvCache<T>>,
    conv_out: Vec<Tensor<T>>,
    pool: Vec<PoolCache>,
    fc1: DenseCache<T>,
    hidden: Tensor<T>,
    dropout: DropoutCache<T>,
    fc2: DenseCache<T>,
    stage_shapes: Vec<Vec<usize>>,
}

impl<T> ForwardCache<T> {
    /// Per-sample shapes observed at each stage, in the order of
    /// [`ModelConfig::shape_chain`].
    pub fn stage_shapes(&self) -> &[Vec<usize>] {
        &self.stage_shapes
    }
}

/// Output of [`Model::forward`].
pub struct Forward<T> {
    /// `[N, 28]`
    pub logits: Tensor<T>,
    /// `[N, 1024]` post-ReLU activations of the hidden layer (after dropout
    /// in training mode).
    pub features: Tensor<T>,
    pub cache: ForwardCache<T>,
}

/// Gradients (or any per-parameter tensors) in [`Model::param_names`] order.
pub type ParamTensors<T> = Vec<Tensor<T>>;

/// Mutable view of one parameter.
pub struct ParamMut<'a, T> {
    pub name: &'static str,
    pub tensor: &'a mut Tensor<T>,
    pub is_bias: bool,
}

const PARAM_NAMES: [&str; 10] = [
    "conv1.weight",
    "conv1.bias",
    "conv2.weight",
    "conv2.bias",
    "conv3.weight",
    "conv3.bias",
    "fc1.weight",
    "fc1.bias",
    "fc2.weight",
    "fc2.bias",
];

impl<T: Scalar> Model<T> {
    /// All-zero parameters.
    pub fn zeros(config: ModelConfig) -> Result<Self> {
        if config.widths.contains(&0) {
            return Err(Error::input("channel widths must be positive"));
        }
        let [a, b, c] = config.widths;
        Ok(Model {
            conv: [Conv2d::new(1, a)?, Conv2d::new(a, b)?, Conv2d::new(b, c)?],
            fc1: Dense::new(config.flat_dim(), FEATURE_DIM)?,
            fc2: Dense::new(FEATURE_DIM, NUM_CLASSES)?,
            pool: MaxPool::default(),
            dropout: Dropout::new(config.dropout_rate)?,
            config,
        })
    }

    /// He-normal weights (`std = sqrt(2 / fan_in)`), zero biases.
    pub fn init(config: ModelConfig, seed: u64) -> Result<Self> {
        let mut model = Self::zeros(config)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for p in model.params_mut() {
            if p.is_bias {
                continue;
            }
            let fan_in: usize = p.tensor.shape()[1..].iter().product();
            let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).expect("finite std");
            for v in p.tensor.data_mut() {
                *v = T::from_f64(normal.sample(&mut rng));
            }
        }
        Ok(model)
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn param_names() -> &'static [&'static str] {
        &PARAM_NAMES
    }

    pub fn params(&self) -> Vec<&Tensor<T>> {
        let [c1, c2, c3] = &self.conv;
        vec![
            &c1.weight,
            &c1.bias,
            &c2.weight,
            &c2.bias,
            &c3.weight,
            &c3.bias,
            &self.fc1.weight,
            &self.fc1.bias,
            &self.fc2.weight,
            &self.fc2.bias,
        ]
    }

    pub fn params_mut(&mut self) -> Vec<ParamMut<'_, T>> {
        let [c1, c2, c3] = &mut self.conv;
        let tensors = [
            &mut c1.weight,
            &mut c1.bias,
            &mut c2.weight,
            &mut c2.bias,
            &mut c3.weight,
            &mut c3.bias,
            &mut self.fc1.weight,
            &mut self.fc1.bias,
            &mut self.fc2.weight,
            &mut self.fc2.bias,
        ];
        tensors
            .into_iter()
            .zip(PARAM_NAMES)
            .map(|(tensor, name)| ParamMut {
                name,
                tensor,
                is_bias: name.ends_with(".bias"),
            })
            .collect()
    }

    /// Replaces every parameter, checking shapes.
    pub fn set_params(&mut self, values: ParamTensors<T>) -> Result<()> {
        if values.len() != PARAM_NAMES.len() {
            return Err(Error::shape(format!("expected {} parameter tensors", PARAM_NAMES.len())));
        }
        for (p, v) in self.params_mut().into_iter().zip(values) {
            if p.tensor.shape() != v.shape() {
                return Err(Error::shape(format!(
                    "{}: expected {:?}, got {:?}",
                    p.name,
                    p.tensor.shape(),
                    v.shape()
                )));
            }
            *p.tensor = v;
        }
        Ok(())
    }

    pub fn num_params(&self) -> usize {
        self.params().iter().map(|t| t.len()).sum()
    }

    pub fn cast<U: Scalar>(&self) -> Model<U> {
        let conv = |c: &Conv2d<T>| {
            Conv2d::from_parts(c.weight.cast(), c.bias.cast(), c.window().pad).expect("shapes preserved")
        };
        let dense = |d: &Dense<T>| Dense::from_parts(d.weight.cast(), d.bias.cast()).expect("shapes preserved");
        Model {
            config: self.config,
            conv: [conv(&self.conv[0]), conv(&self.conv[1]), conv(&self.conv[2])],
            fc1: dense(&self.fc1),
            fc2: dense(&self.fc2),
            pool: self.pool,
            dropout: self.dropout,
        }
    }

    /// Runs a `[N, 1, 64, 64]` batch through the network.
    pub fn forward(&self, batch: &Tensor<T>, mode: Mode<'_>) -> Result<Forward<T>> {
        let chain = self.config.shape_chain();
        match batch.shape()[..] {
            [_, 1, INPUT_SIDE, INPUT_SIDE] => {}
            _ => {
                return Err(Error::shape(format!(
                    "model input must be [N, 1, 64, 64], got {:?}",
                    batch.shape()
                )))
            }
        }
        let n = batch.shape()[0];
        let mut stage_shapes = vec![batch.shape()[1..].to_vec()];
        let mut conv_caches = Vec::with_capacity(3);
        let mut conv_out = Vec::with_capacity(3);
        let mut pool_caches = Vec::with_capacity(3);

        let mut x = batch.clone();
        for conv in &self.conv {
            let (mut y, cache) = conv.forward(&x)?;
            relu_in_place(&mut y);
            stage_shapes.push(y.shape()[1..].to_vec());
            let (pooled, pcache) = self.pool.forward(&y)?;
            stage_shapes.push(pooled.shape()[1..].to_vec());
            conv_caches.push(cache);
            conv_out.push(y);
            pool_caches.push(pcache);
            x = pooled;
        }

        let flat = x.reshape(&[n, self.config.flat_dim()])?;
        let (mut hidden, fc1_cache) = self.fc1.forward(&flat)?;
        relu_in_place(&mut hidden);
        stage_shapes.push(hidden.shape()[1..].to_vec());
        let (features, dropout_cache) = match mode {
            Mode::Inference => self.dropout.forward_inference(&hidden),
            Mode::Train(rng) => self.dropout.forward_train(&hidden, rng)?,
        };
        let (logits, fc2_cache) = self.fc2.forward(&features)?;
        stage_shapes.push(logits.shape()[1..].to_vec());

        if stage_shapes != chain {
            return Err(Error::shape(format!(
                "shape pipeline {stage_shapes:?} deviates from {chain:?}"
            )));
        }

        Ok(Forward {
            logits,
            features: features.clone(),
            cache: ForwardCache {
                conv: conv_caches,
                conv_out,
                pool: pool_caches,
                fc1: fc1_cache,
                hidden,
                dropout: dropout_cache,
                fc2: fc2_cache,
                stage_shapes,
            },
        })
    }

    /// Gradients of the loss w.r.t. every parameter given `dlogits`.
    pub fn backward(&self, dlogits: &Tensor<T>, cache: &ForwardCache<T>) -> Result<ParamTensors<T>> {
        let g2 = self.fc2.backward(dlogits, &cache.fc2)?;
        let dhidden = self.dropout.backward(&g2.dx, &cache.dropout)?;
        let dhidden = relu_backward(&dhidden, &cache.hidden)?;
        let g1 = self.fc1.backward(&dhidden, &cache.fc1)?;

        let n = dlogits.shape()[0];
        let [c, h, w] = cache.stage_shapes[6][..] else {
            unreachable!("stage 6 is the last pooled map");
        };
        let mut d = g1.dx.reshape(&[n, c, h, w])?;
        let mut conv_grads = Vec::with_capacity(3);
        for stage in (0..3).rev() {
            let dconv = self.pool.backward(&d, &cache.pool[stage])?;
            let dconv = relu_backward(&dconv, &cache.conv_out[stage])?;
            let g = self.conv[stage].backward(&dconv, &cache.conv[stage], stage > 0)?;
            if let Some(dx) = g.dx.clone() {
                d = dx;
            }
            conv_grads.push(g);
        }
        conv_grads.reverse();

        let mut grads = Vec::with_capacity(PARAM_NAMES.len());
        for g in conv_grads {
            grads.push(g.dw);
            grads.push(g.db);
        }
        grads.extend([g1.dw, g1.db, g2.dw, g2.db]);
        Ok(grads)
    }

    /// Mean cross-entropy on a batch and its parameter gradients.
    pub fn loss_and_grads(
        &self,
        batch: &Tensor<T>,
        labels: &[ClassId],
        mode: Mode<'_>,
    ) -> Result<(T, Tensor<T>, ParamTensors<T>)> {
        let fwd = self.forward(batch, mode)?;
        let (loss, dlogits) = softmax_cross_entropy(&fwd.logits, labels)?;
        let grads = self.backward(&dlogits, &fwd.cache)?;
        Ok((loss, fwd.logits, grads))
    }

    /// Softmax-head predictions in inference mode.
    pub fn predict(&self, batch: &Tensor<T>) -> Result<Vec<ClassId>> {
        argmax_rows(&self.forward(batch, Mode::Inference)?.logits)
    }

    /// Inference-mode penultimate features, `[N, 1024]`.
    pub fn features(&self, batch: &Tensor<T>) -> Result<Tensor<T>> {
        Ok(self.forward(batch, Mode::Inference)?.features)
    }
}
