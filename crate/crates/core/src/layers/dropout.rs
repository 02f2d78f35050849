use rand::{Rng, RngCore};

use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Inverted dropout: in training each element is zeroed with probability
/// `rate` and survivors are scaled by `1 / (1 - rate)`; inference is the
/// identity.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Dropout {
    rate: f64,
}

/// Per-element multiplier applied in the forward pass (`0` or `1/(1-rate)`).
#[derive(Clone, Debug)]
pub struct DropoutCache<T> {
    scale: Option<Tensor<T>>,
}

impl Dropout {
    pub fn new(rate: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::input(format!("dropout rate {rate} outside [0, 1)")));
        }
        Ok(Dropout { rate })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    /// Draws one uniform per element from `rng`. Rate 0 draws nothing.
    pub fn mask<T: Scalar>(&self, shape: &[usize], rng: &mut dyn RngCore) -> Result<Tensor<T>> {
        let keep = T::from_f64(1.0 / (1.0 - self.rate));
        let mut m = Tensor::full(shape, keep)?;
        if self.rate > 0.0 {
            for v in m.data_mut() {
                if rng.random::<f64>() < self.rate {
                    *v = T::zero();
                }
            }
        }
        Ok(m)
    }

    pub fn forward_train<T: Scalar>(
        &self,
        x: &Tensor<T>,
        rng: &mut dyn RngCore,
    ) -> Result<(Tensor<T>, DropoutCache<T>)> {
        if self.rate == 0.0 {
            return Ok((x.clone(), DropoutCache { scale: None }));
        }
        let mask = self.mask(x.shape(), rng)?;
        let y = x.zip_map(&mask, |a, m| a * m)?;
        Ok((y, DropoutCache { scale: Some(mask) }))
    }

    pub fn forward_inference<T: Scalar>(&self, x: &Tensor<T>) -> (Tensor<T>, DropoutCache<T>) {
        (x.clone(), DropoutCache { scale: None })
    }

    pub fn backward<T: Scalar>(&self, dy: &Tensor<T>, cache: &DropoutCache<T>) -> Result<Tensor<T>> {
        match &cache.scale {
            None => Ok(dy.clone()),
            Some(mask) => dy.zip_map(mask, |g, m| g * m),
        }
    }
}
