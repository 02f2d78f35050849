use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{Tensor, Window};

/// Max pooling. Padding cells count as negative infinity, so they never
/// win a window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct MaxPool {
    pub window: Window,
}

impl Default for MaxPool {
    /// 4x4 windows, stride 2, pad 1: halves every even spatial size.
    fn default() -> Self {
        MaxPool {
            window: Window::new(4, 2, 1),
        }
    }
}

/// Flat input offsets of each output's winning cell.
#[derive(Clone, Debug)]
pub struct PoolCache {
    input_shape: Vec<usize>,
    argmax: Vec<u32>,
}

impl MaxPool {
    pub fn output_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        if h < 2 || w < 2 {
            return Err(Error::shape(format!("max-pool needs spatial dims >= 2, got {h}x{w}")));
        }
        if self.window.pad >= self.window.size {
            return Err(Error::shape("pool padding must be smaller than the window"));
        }
        match (self.window.out_dim(h), self.window.out_dim(w)) {
            (Some(oh), Some(ow)) => Ok((oh, ow)),
            _ => Err(Error::shape(format!(
                "pool window {} does not fit a {h}x{w} input",
                self.window.size
            ))),
        }
    }

    /// Ties go to the first cell in row-major window order.
    pub fn forward<T: Scalar>(&self, x: &Tensor<T>) -> Result<(Tensor<T>, PoolCache)> {
        let [n, c, h, w] = x.shape()[..] else {
            return Err(Error::shape(format!("max-pool input must be [N, C, H, W], got {:?}", x.shape())));
        };
        let (oh, ow) = self.output_dims(h, w)?;
        let Window { size, stride, pad } = self.window;
        let mut y = Vec::with_capacity(n * c * oh * ow);
        let mut argmax = Vec::with_capacity(n * c * oh * ow);
        for (p, plane) in x.data().chunks_exact(h * w).enumerate() {
            let base = p * h * w;
            for i in 0..oh {
                let y0 = (i * stride) as isize - pad as isize;
                let rows = y0.max(0) as usize..((y0 + size as isize) as usize).min(h);
                for j in 0..ow {
                    let x0 = (j * stride) as isize - pad as isize;
                    let cols = x0.max(0) as usize..((x0 + size as isize) as usize).min(w);
                    let mut best = T::neg_infinity();
                    let mut best_at = 0usize;
                    for r in rows.clone() {
                        for col in cols.clone() {
                            let v = plane[r * w + col];
                            if v > best {
                                best = v;
                                best_at = r * w + col;
                            }
                        }
                    }
                    y.push(best);
                    argmax.push((base + best_at) as u32);
                }
            }
        }
        let cache = PoolCache {
            input_shape: x.shape().to_vec(),
            argmax,
        };
        Ok((Tensor::from_vec(&[n, c, oh, ow], y)?, cache))
    }

    /// Routes each upstream gradient to its window's argmax.
    pub fn backward<T: Scalar>(&self, dy: &Tensor<T>, cache: &PoolCache) -> Result<Tensor<T>> {
        if dy.len() != cache.argmax.len() {
            return Err(Error::shape(format!(
                "max-pool backward: dy has {} elements, forward produced {}",
                dy.len(),
                cache.argmax.len()
            )));
        }
        let mut dx = Tensor::zeros(&cache.input_shape)?;
        let d = dx.data_mut();
        for (&g, &at) in dy.data().iter().zip(&cache.argmax) {
            d[at as usize] = d[at as usize] + g;
        }
        Ok(dx)
    }
}
