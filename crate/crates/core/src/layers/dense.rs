use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{gemm, Tensor};

/// Fully connected layer `y = x W^T + b` over `[N, in]` batches.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense<T> {
    /// `[out, in]`
    pub weight: Tensor<T>,
    /// `[out]`
    pub bias: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct DenseCache<T> {
    input: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct DenseGrads<T> {
    pub dx: Tensor<T>,
    pub dw: Tensor<T>,
    pub db: Tensor<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn new(inputs: usize, outputs: usize) -> Result<Self> {
        Self::from_parts(Tensor::zeros(&[outputs, inputs])?, Tensor::zeros(&[outputs])?)
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        match weight.shape()[..] {
            [o, _] if bias.shape() == [o] => Ok(Dense { weight, bias }),
            _ => Err(Error::shape(format!(
                "dense weight {:?} / bias {:?}: expected [out, in] and [out]",
                weight.shape(),
                bias.shape()
            ))),
        }
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    fn batch_of(&self, x: &Tensor<T>) -> Result<usize> {
        match x.shape()[..] {
            [n, d] if d == self.inputs() => Ok(n),
            _ => Err(Error::shape(format!(
                "dense layer expects [N, {}], got {:?}",
                self.inputs(),
                x.shape()
            ))),
        }
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, DenseCache<T>)> {
        let n = self.batch_of(x)?;
        let (i, o) = (self.inputs(), self.outputs());
        let mut y = Vec::with_capacity(n * o);
        for _ in 0..n {
            y.extend_from_slice(self.bias.data());
        }
        gemm(false, true, n, o, i, T::one(), x.data(), self.weight.data(), T::one(), &mut y);
        Ok((Tensor::from_vec(&[n, o], y)?, DenseCache { input: x.clone() }))
    }

    pub fn backward(&self, dy: &Tensor<T>, cache: &DenseCache<T>) -> Result<DenseGrads<T>> {
        let x = &cache.input;
        let n = self.batch_of(x)?;
        let (i, o) = (self.inputs(), self.outputs());
        dy.expect_shape(&[n, o], "dense backward dy")?;

        let mut dw = vec![T::zero(); o * i];
        gemm(true, false, o, i, n, T::one(), dy.data(), x.data(), T::zero(), &mut dw);
        let mut db = vec![T::zero(); o];
        for row in dy.data().chunks_exact(o) {
            for (acc, &g) in db.iter_mut().zip(row) {
                *acc = *acc + g;
            }
        }
        let mut dx = vec![T::zero(); n * i];
        gemm(false, false, n, i, o, T::one(), dy.data(), self.weight.data(), T::zero(), &mut dx);
        Ok(DenseGrads {
            dx: Tensor::from_vec(&[n, i], dx)?,
            dw: Tensor::from_vec(&[o, i], dw)?,
            db: Tensor::from_vec(&[o], db)?,
        })
    }
}
