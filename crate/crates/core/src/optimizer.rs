//! Mini-batch SGD with classical momentum and weight decay, and the epoch
//! loop that trains a [`Model`] on glyph samples.

use std::fmt::Write as _;
use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::catalog::ClassId;
use crate::dataset::{to_batch, GlyphSample};
use crate::error::{Error, Result};
use crate::model::{Mode, Model, ParamMut, ParamTensors};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Optimizer and schedule settings. Defaults are the reference
/// hyper-parameters: learning rate 0.02, momentum 0.8, weight decay 0.001,
/// batch size 32 and 400 epochs.
#[derive(Clone, Debug, PartialEq)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
    pub batch_size: usize,
    /// The reference "400 iterations" budget, read as full passes over the
    /// training set.
    pub max_epochs: usize,
    pub seed: u64,
    /// Apply weight decay to bias vectors too.
    pub decay_biases: bool,
}

impl Default for SgdConfig {
    fn default() -> Self {
        SgdConfig {
            learning_rate: 0.02,
            momentum: 0.8,
            weight_decay: 0.001,
            batch_size: 32,
            max_epochs: 400,
            seed: 0,
            decay_biases: false,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::input("learning_rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::input("momentum must be in [0, 1)"));
        }
        if !(self.weight_decay >= 0.0) {
            return Err(Error::input("weight_decay must be non-negative"));
        }
        if self.batch_size == 0 {
            return Err(Error::input("batch_size must be at least 1"));
        }
        Ok(())
    }
}

/// Zero-initialized velocity buffers shaped like `params`.
pub fn zero_velocity<T: Scalar>(params: &[&Tensor<T>]) -> ParamTensors<T> {
    params
        .iter()
        .map(|p| Tensor::zeros(p.shape()).expect("parameter shapes are valid"))
        .collect()
}

/// One momentum step over every parameter:
///
/// ```text
/// v <- momentum * v - lr * (g + wd * p)
/// p <- p + v
/// ```
///
/// Biases skip the decay term unless `decay_biases` is set.
pub fn sgd_step<T: Scalar>(
    params: Vec<ParamMut<'_, T>>,
    grads: &[Tensor<T>],
    velocity: &mut [Tensor<T>],
    config: &SgdConfig,
) -> Result<()> {
    if params.len() != grads.len() || params.len() != velocity.len() {
        return Err(Error::shape(format!(
            "{} params, {} grads, {} velocity buffers",
            params.len(),
            grads.len(),
            velocity.len()
        )));
    }
    let lr = T::from_f64(config.learning_rate);
    let mu = T::from_f64(config.momentum);
    for ((p, g), v) in params.into_iter().zip(grads).zip(velocity.iter_mut()) {
        p.tensor.expect_same_shape(g)?;
        p.tensor.expect_same_shape(v)?;
        let wd = if p.is_bias && !config.decay_biases {
            T::zero()
        } else {
            T::from_f64(config.weight_decay)
        };
        for ((w, &dg), vel) in p.tensor.data_mut().iter_mut().zip(g.data()).zip(v.data_mut()) {
            *vel = mu * *vel - lr * (dg + wd * *w);
            *w = *w + *vel;
        }
    }
    Ok(())
}

/// One line of training history.
#[derive(Clone, Debug, PartialEq)]
pub struct EpochRecord {
    /// 1-based.
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    /// `None` when no test set was given.
    pub test_acc: Option<f64>,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub epochs: Vec<EpochRecord>,
}

impl TrainHistory {
    pub const CSV_HEADER: &'static str = "epoch,train_loss,train_acc,test_acc";

    /// `epoch,train_loss,train_acc,test_acc` with a header row. A missing
    /// test accuracy is an empty field.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(Self::CSV_HEADER);
        out.push('\n');
        for r in &self.epochs {
            let test = r.test_acc.map(|a| format!("{a:.4}")).unwrap_or_default();
            writeln!(out, "{},{:.6},{:.4},{}", r.epoch, r.train_loss, r.train_acc, test).unwrap();
        }
        out
    }

    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// Inference-mode softmax predictions, in chunks of `chunk` samples.
pub fn predict_samples<T: Scalar>(model: &Model<T>, samples: &[GlyphSample], chunk: usize) -> Result<Vec<ClassId>> {
    let mut out = Vec::with_capacity(samples.len());
    for part in samples.chunks(chunk.max(1)) {
        out.extend(model.predict(&to_batch::<T>(part)?)?);
    }
    Ok(out)
}

/// Percentage of samples the model classifies correctly.
pub fn accuracy<T: Scalar>(model: &Model<T>, samples: &[GlyphSample]) -> Result<f64> {
    if samples.is_empty() {
        return Err(Error::input("accuracy of an empty sample set"));
    }
    let preds = predict_samples(model, samples, 64)?;
    let correct = preds.iter().zip(samples).filter(|(p, s)| **p == s.label).count();
    Ok(100.0 * correct as f64 / samples.len() as f64)
}

/// Trains for `config.max_epochs` epochs. See [`train_with`].
pub fn train<T: Scalar>(
    model: &mut Model<T>,
    train_set: &[GlyphSample],
    test_set: &[GlyphSample],
    config: &SgdConfig,
) -> Result<TrainHistory> {
    train_with(model, train_set, test_set, config, |_| ControlFlow::Continue(()))
}

/// Trains `model` in place.
///
/// Each epoch shuffles the training set with a generator seeded from
/// `config.seed`, runs forward/backward/[`sgd_step`] on consecutive batches
/// (the last one may be short; its loss is averaged over its own size),
/// then records mean loss and inference-mode accuracies. `on_epoch` sees
/// every record and may stop training early.
pub fn train_with<T, F>(
    model: &mut Model<T>,
    train_set: &[GlyphSample],
    test_set: &[GlyphSample],
    config: &SgdConfig,
    mut on_epoch: F,
) -> Result<TrainHistory>
where
    T: Scalar,
    F: FnMut(&EpochRecord) -> ControlFlow<()>,
{
    config.validate()?;
    if train_set.is_empty() {
        return Err(Error::input("training set is empty"));
    }
    let mut history = TrainHistory::default();
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut velocity = zero_velocity(&model.params());
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=config.max_epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        for (b, idx) in order.chunks(config.batch_size).enumerate() {
            let batch = to_batch::<T>(idx.iter().map(|&i| &train_set[i]))?;
            let labels: Vec<ClassId> = idx.iter().map(|&i| train_set[i].label).collect();
            let (loss, _, grads) = model.loss_and_grads(&batch, &labels, Mode::Train(&mut rng))?;
            let loss = loss.as_f64();
            if !loss.is_finite() || grads.iter().any(|g| !g.all_finite()) {
                return Err(Error::Diverged { epoch, batch: b + 1, loss });
            }
            sgd_step(model.params_mut(), &grads, &mut velocity, config)?;
            loss_sum += loss * idx.len() as f64;
        }
        let record = EpochRecord {
            epoch,
            train_loss: loss_sum / train_set.len() as f64,
            train_acc: accuracy(model, train_set)?,
            test_acc: if test_set.is_empty() {
                None
            } else {
                Some(accuracy(model, test_set)?)
            },
        };
        let flow = on_epoch(&record);
        history.epochs.push(record);
        if flow.is_break() {
            break;
        }
    }
    Ok(history)
}
