//! One-vs-rest linear SVM over penultimate CNN features, trained by
//! mini-batch subgradient descent with dropout applied to the inputs.
//!
//! Objective, with `t[n][c] = +1` when `c` is the label of sample `n` and
//! `-1` otherwise, and `s = W x + b`:
//!
//! ```text
//! (1/N) sum_n sum_c max(0, 1 - t[n][c] s[n][c]) + lambda ||W||^2
//! ```
//!
//! The hinge part takes a subgradient step; the ridge part is applied as
//! its exact proximal map, `W <- W / (1 + 2 lr lambda)`, which stays stable
//! for any `lambda`.

use std::ops::ControlFlow;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::catalog::{ClassId, NUM_CLASSES};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

#[derive(Clone, Debug, PartialEq)]
pub struct SvmTrainConfig {
    pub reg_lambda: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    /// Probability of zeroing each input feature per presentation.
    pub dropout_rate: f64,
    pub seed: u64,
    /// Fit a per-dimension mean/std standardizer and store it in the model.
    pub standardize: bool,
    pub num_classes: usize,
}

impl Default for SvmTrainConfig {
    fn default() -> Self {
        SvmTrainConfig {
            reg_lambda: 1e-4,
            learning_rate: 0.01,
            epochs: 50,
            batch_size: 32,
            dropout_rate: 0.5,
            seed: 0,
            standardize: true,
            num_classes: NUM_CLASSES,
        }
    }
}

impl SvmTrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.reg_lambda > 0.0) || !(self.learning_rate > 0.0) {
            return Err(Error::input("reg_lambda and learning_rate must be positive"));
        }
        if self.batch_size == 0 || self.num_classes < 2 {
            return Err(Error::input("batch_size must be >= 1 and num_classes >= 2"));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::input("svm dropout_rate must be in [0, 1)"));
        }
        Ok(())
    }
}

/// Per-dimension affine map `z = (x - mean) * scale`.
#[derive(Clone, Debug, PartialEq)]
pub struct Standardizer<T = f32> {
    pub mean: Tensor<T>,
    /// Reciprocal standard deviation (1 for constant dimensions).
    pub scale: Tensor<T>,
}

impl<T: Scalar> Standardizer<T> {
    pub fn fit(features: &Tensor<T>) -> Result<Self> {
        let (n, d) = matrix_dims(features)?;
        let mut mean = vec![0.0f64; d];
        for row in features.data().chunks_exact(d) {
            for (m, &v) in mean.iter_mut().zip(row) {
                *m += v.as_f64();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n as f64);
        let mut var = vec![0.0f64; d];
        for row in features.data().chunks_exact(d) {
            for ((s, &v), m) in var.iter_mut().zip(row).zip(&mean) {
                let dv = v.as_f64() - m;
                *s += dv * dv;
            }
        }
        let scale = var
            .iter()
            .map(|s| {
                let sd = (s / n as f64).sqrt();
                T::from_f64(if sd > 1e-8 { 1.0 / sd } else { 1.0 })
            })
            .collect();
        Ok(Standardizer {
            mean: Tensor::from_vec(&[d], mean.into_iter().map(T::from_f64).collect())?,
            scale: Tensor::from_vec(&[d], scale)?,
        })
    }

    pub fn apply_row(&self, row: &[T], out: &mut [T]) {
        for (((o, &x), &m), &s) in out.iter_mut().zip(row).zip(self.mean.data()).zip(self.scale.data()) {
            *o = (x - m) * s;
        }
    }

    pub fn apply(&self, features: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, d) = matrix_dims(features)?;
        if d != self.mean.len() {
            return Err(Error::shape(format!("standardizer fitted on {} dims, got {d}", self.mean.len())));
        }
        let mut out = features.clone();
        for (src, dst) in features.data().chunks_exact(d).zip(out.data_mut().chunks_exact_mut(d)) {
            self.apply_row(src, dst);
        }
        Ok(out)
    }
}

/// Linear one-vs-rest classifier: `scores = standardize(x) W^T + b`.
#[derive(Clone, Debug, PartialEq)]
pub struct SvmModel<T = f32> {
    /// `[classes, dim]`
    pub weights: Tensor<T>,
    /// `[classes]`
    pub bias: Tensor<T>,
    pub reg_lambda: f64,
    pub standardizer: Option<Standardizer<T>>,
}

fn matrix_dims<T: Scalar>(t: &Tensor<T>) -> Result<(usize, usize)> {
    match t.shape()[..] {
        [n, d] => Ok((n, d)),
        _ => Err(Error::shape(format!("features must be [N, D], got {:?}", t.shape()))),
    }
}

impl<T: Scalar> SvmModel<T> {
    pub fn zeros(classes: usize, dim: usize, reg_lambda: f64) -> Result<Self> {
        Ok(SvmModel {
            weights: Tensor::zeros(&[classes, dim])?,
            bias: Tensor::zeros(&[classes])?,
            reg_lambda,
            standardizer: None,
        })
    }

    pub fn classes(&self) -> usize {
        self.weights.shape()[0]
    }

    pub fn dim(&self) -> usize {
        self.weights.shape()[1]
    }

    fn check_features(&self, features: &Tensor<T>) -> Result<usize> {
        let (n, d) = matrix_dims(features)?;
        if d != self.dim() {
            return Err(Error::shape(format!("SVM expects {}-dim features, got {d}", self.dim())));
        }
        Ok(n)
    }

    fn score_row(&self, z: &[T], out: &mut [T]) {
        score_row(&self.weights, &self.bias, z, out);
    }

    /// `[N, classes]` decision values.
    pub fn scores(&self, features: &Tensor<T>) -> Result<Tensor<T>> {
        let n = self.check_features(features)?;
        let (d, k) = (self.dim(), self.classes());
        let mut z = vec![T::zero(); d];
        let mut out = vec![T::zero(); n * k];
        for (row, o) in features.data().chunks_exact(d).zip(out.chunks_exact_mut(k)) {
            match &self.standardizer {
                Some(s) => s.apply_row(row, &mut z),
                None => z.copy_from_slice(row),
            }
            self.score_row(&z, o);
        }
        Tensor::from_vec(&[n, k], out)
    }

    /// Argmax of the scores; ties go to the lowest class id.
    pub fn predict(&self, features: &Tensor<T>) -> Result<Vec<ClassId>> {
        crate::layers::argmax_rows(&self.scores(features)?)
    }

    /// Mean summed hinge loss plus `lambda ||W||^2`, without dropout.
    pub fn objective(&self, features: &Tensor<T>, labels: &[ClassId]) -> Result<f64> {
        let n = self.check_features(features)?;
        check_labels(labels, n, self.classes())?;
        let scores = self.scores(features)?;
        let mut hinge = 0.0;
        for (row, y) in scores.data().chunks_exact(self.classes()).zip(labels) {
            for (c, &s) in row.iter().enumerate() {
                let t = if c == y.index() { 1.0 } else { -1.0 };
                hinge += (1.0 - t * s.as_f64()).max(0.0);
            }
        }
        let w2: f64 = self.weights.data().iter().map(|w| w.as_f64().powi(2)).sum();
        Ok(hinge / n as f64 + self.reg_lambda * w2)
    }
}

/// `out[c] = W[c] . z + b[c]`, summed left to right.
fn score_row<T: Scalar>(weights: &Tensor<T>, bias: &Tensor<T>, z: &[T], out: &mut [T]) {
    let d = z.len();
    for ((o, w), &b) in out.iter_mut().zip(weights.data().chunks_exact(d)).zip(bias.data()) {
        let mut acc = T::zero();
        for (&wi, &zi) in w.iter().zip(z) {
            acc = acc + wi * zi;
        }
        *o = acc + b;
    }
}

fn check_labels(labels: &[ClassId], n: usize, classes: usize) -> Result<()> {
    if labels.len() != n {
        return Err(Error::shape(format!("{} labels for {n} feature rows", labels.len())));
    }
    if let Some(bad) = labels.iter().find(|l| l.get() > classes) {
        return Err(Error::input(format!("label {bad} outside 1..={classes}")));
    }
    Ok(())
}

/// Trains with the default per-epoch behaviour. See [`svm_train_with`].
pub fn svm_train<T: Scalar>(features: &Tensor<T>, labels: &[ClassId], config: &SvmTrainConfig) -> Result<SvmModel<T>> {
    svm_train_with(features, labels, config, |_, _| ControlFlow::Continue(()))
}

/// Trains an SVM head. `on_epoch(epoch, model)` runs after every epoch.
///
/// Each presentation of a sample draws a fresh dropout mask over its
/// (standardized) features and rescales survivors by `1 / (1 - rate)`.
pub fn svm_train_with<T, F>(
    features: &Tensor<T>,
    labels: &[ClassId],
    config: &SvmTrainConfig,
    mut on_epoch: F,
) -> Result<SvmModel<T>>
where
    T: Scalar,
    F: FnMut(usize, &SvmModel<T>) -> ControlFlow<()>,
{
    config.validate()?;
    let (n, d) = matrix_dims(features)?;
    if n == 0 {
        return Err(Error::input("no training features"));
    }
    let k = config.num_classes;
    check_labels(labels, n, k)?;

    let mut model = SvmModel::zeros(k, d, config.reg_lambda)?;
    let inputs = if config.standardize {
        let s = Standardizer::fit(features)?;
        let z = s.apply(features)?;
        model.standardizer = Some(s);
        z
    } else {
        features.clone()
    };

    let lr = T::from_f64(config.learning_rate);
    let shrink = T::one() / T::from_f64(1.0 + 2.0 * config.learning_rate * config.reg_lambda);
    let keep = T::from_f64(1.0 / (1.0 - config.dropout_rate));
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut order: Vec<usize> = (0..n).collect();
    let mut z = vec![T::zero(); d];
    let mut scores = vec![T::zero(); k];
    let mut gw = vec![T::zero(); k * d];
    let mut gb = vec![T::zero(); k];

    for epoch in 1..=config.epochs {
        order.shuffle(&mut rng);
        for batch in order.chunks(config.batch_size) {
            gw.fill(T::zero());
            gb.fill(T::zero());
            let inv_b = T::one() / T::from_f64(batch.len() as f64);
            for &i in batch {
                z.copy_from_slice(&inputs.data()[i * d..(i + 1) * d]);
                if config.dropout_rate > 0.0 {
                    for v in z.iter_mut() {
                        *v = if rng.random::<f64>() < config.dropout_rate { T::zero() } else { *v * keep };
                    }
                }
                score_row(&model.weights, &model.bias, &z, &mut scores);
                let y = labels[i].index();
                for c in 0..k {
                    let t = if c == y { T::one() } else { -T::one() };
                    if t * scores[c] < T::one() {
                        let step = t * inv_b;
                        gb[c] = gb[c] - step;
                        for (g, &zi) in gw[c * d..(c + 1) * d].iter_mut().zip(&z) {
                            *g = *g - step * zi;
                        }
                    }
                }
            }
            for (w, &g) in model.weights.data_mut().iter_mut().zip(&gw) {
                *w = (*w - lr * g) * shrink;
            }
            for (b, &g) in model.bias.data_mut().iter_mut().zip(&gb) {
                *b = *b - lr * g;
            }
        }
        if !model.weights.all_finite() || !model.bias.all_finite() {
            return Err(Error::Diverged { epoch, batch: 0, loss: f64::NAN });
        }
        if on_epoch(epoch, &model).is_break() {
            break;
        }
    }
    Ok(model)
}
