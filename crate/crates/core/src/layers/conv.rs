use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::tensor::{fold_into, gemm, unfold_into, Tensor, Window};

/// Side of every convolution kernel.
pub const KERNEL: usize = 7;

/// A 7x7, stride-1 convolution over `[N, C, H, W]` batches.
#[derive(Clone, Debug, PartialEq)]
pub struct Conv2d<T> {
    /// `[filters, in_channels, 7, 7]`
    pub weight: Tensor<T>,
    /// `[filters]`
    pub bias: Tensor<T>,
    pad: usize,
}

/// Saved forward input.
#[derive(Clone, Debug)]
pub struct ConvCache<T> {
    input: Tensor<T>,
}

#[derive(Clone, Debug)]
pub struct ConvGrads<T> {
    /// `None` when the caller asked to skip the input gradient.
    pub dx: Option<Tensor<T>>,
    pub dw: Tensor<T>,
    pub db: Tensor<T>,
}

impl<T: Scalar> Conv2d<T> {
    /// Same-padded (pad 3) layer with zero weights.
    pub fn new(in_channels: usize, filters: usize) -> Result<Self> {
        Self::with_pad(in_channels, filters, KERNEL / 2)
    }

    pub fn with_pad(in_channels: usize, filters: usize, pad: usize) -> Result<Self> {
        Self::from_parts(
            Tensor::zeros(&[filters, in_channels, KERNEL, KERNEL])?,
            Tensor::zeros(&[filters])?,
            pad,
        )
    }

    pub fn from_parts(weight: Tensor<T>, bias: Tensor<T>, pad: usize) -> Result<Self> {
        match weight.shape()[..] {
            [f, _, KERNEL, KERNEL] if bias.shape() == [f] => Ok(Conv2d { weight, bias, pad }),
            _ => Err(Error::shape(format!(
                "conv weight {:?} / bias {:?}: expected [F, C, 7, 7] and [F]",
                weight.shape(),
                bias.shape()
            ))),
        }
    }

    pub fn filters(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn window(&self) -> Window {
        Window::new(KERNEL, 1, self.pad)
    }

    fn geometry(&self, x_shape: &[usize]) -> Result<(usize, (usize, usize, usize), (usize, usize))> {
        let [n, c, h, w] = x_shape[..] else {
            return Err(Error::shape(format!("conv input must be [N, C, H, W], got {x_shape:?}")));
        };
        if c != self.in_channels() {
            return Err(Error::shape(format!(
                "conv expects {} input channels, got {c}",
                self.in_channels()
            )));
        }
        let win = self.window();
        match (win.out_dim(h), win.out_dim(w)) {
            (Some(oh), Some(ow)) => Ok((n, (c, h, w), (oh, ow))),
            _ => Err(Error::shape(format!(
                "7x7 kernel with pad {} does not fit a {h}x{w} input",
                self.pad
            ))),
        }
    }

    /// `y[n,f,i,j] = b[f] + sum_{c,u,v} w[f,c,u,v] * xpad[n,c,i+u,j+v]`,
    /// computed per sample as `W[F, C*49] x unfold(x_n)`.
    pub fn forward(&self, x: &Tensor<T>) -> Result<(Tensor<T>, ConvCache<T>)> {
        let (n, chw, (oh, ow)) = self.geometry(x.shape())?;
        let f = self.filters();
        let rows = chw.0 * KERNEL * KERNEL;
        let positions = oh * ow;
        let in_len = chw.0 * chw.1 * chw.2;

        let mut cols = vec![T::zero(); rows * positions];
        let mut y = vec![T::zero(); n * f * positions];
        for (s, out) in y.chunks_exact_mut(f * positions).enumerate() {
            let xs = &x.data()[s * in_len..(s + 1) * in_len];
            unfold_into(xs, chw, self.window(), (oh, ow), &mut cols);
            for (plane, &b) in out.chunks_exact_mut(positions).zip(self.bias.data()) {
                plane.fill(b);
            }
            gemm(false, false, f, positions, rows, T::one(), self.weight.data(), &cols, T::one(), out);
        }
        let y = Tensor::from_vec(&[n, f, oh, ow], y)?;
        Ok((y, ConvCache { input: x.clone() }))
    }

    /// Exact gradients of [`forward`](Self::forward). Parameter gradients are
    /// summed over the batch in sample order.
    pub fn backward(&self, dy: &Tensor<T>, cache: &ConvCache<T>, need_dx: bool) -> Result<ConvGrads<T>> {
        let x = &cache.input;
        let (n, chw, (oh, ow)) = self.geometry(x.shape())?;
        let f = self.filters();
        dy.expect_shape(&[n, f, oh, ow], "conv backward dy")?;
        let rows = chw.0 * KERNEL * KERNEL;
        let positions = oh * ow;
        let in_len = chw.0 * chw.1 * chw.2;

        let mut cols = vec![T::zero(); rows * positions];
        let mut dcols = vec![T::zero(); rows * positions];
        let mut dw = vec![T::zero(); f * rows];
        let mut db = vec![T::zero(); f];
        let mut dx = if need_dx { vec![T::zero(); x.len()] } else { Vec::new() };

        for s in 0..n {
            let xs = &x.data()[s * in_len..(s + 1) * in_len];
            let dys = &dy.data()[s * f * positions..(s + 1) * f * positions];
            unfold_into(xs, chw, self.window(), (oh, ow), &mut cols);
            // dW += dY_s * cols^T
            gemm(false, true, f, rows, positions, T::one(), dys, &cols, T::one(), &mut dw);
            for (acc, plane) in db.iter_mut().zip(dys.chunks_exact(positions)) {
                *acc = *acc + plane.iter().copied().sum::<T>();
            }
            if need_dx {
                // dcols = W^T * dY_s, then scatter back onto the image
                gemm(true, false, rows, positions, f, T::one(), self.weight.data(), dys, T::zero(), &mut dcols);
                fold_into(&dcols, chw, self.window(), (oh, ow), &mut dx[s * in_len..(s + 1) * in_len]);
            }
        }
        Ok(ConvGrads {
            dx: if need_dx { Some(Tensor::from_vec(x.shape(), dx)?) } else { None },
            dw: Tensor::from_vec(self.weight.shape(), dw)?,
            db: Tensor::from_vec(&[f], db)?,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn center_kernel() -> Conv2d<f64> {
        let mut conv = Conv2d::<f64>::new(1, 1).unwrap();
        conv.weight.data_mut()[3 * KERNEL + 3] = 1.0;
        conv
    }

    #[test]
    fn canonical_first_layer_shape() {
        let conv = Conv2d::<f32>::new(1, 128).unwrap();
        let x = Tensor::zeros(&[1, 1, 64, 64]).unwrap();
        let (y, _) = conv.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 128, 64, 64]);
    }

    #[test]
    fn identity_kernel_reproduces_input() {
        let x = Tensor::from_vec(&[1, 1, 9, 8], (0..72).map(|i| (i as f64).cos()).collect()).unwrap();
        let (y, _) = center_kernel().forward(&x).unwrap();
        assert_eq!(y.data(), x.data());
    }

    #[test]
    fn all_ones_kernel_counts_overlap() {
        let mut conv = Conv2d::<f64>::new(1, 1).unwrap();
        conv.weight = conv.weight.map(|_| 1.0);
        let x = Tensor::full(&[1, 1, 3, 3], 1.0).unwrap();
        let (y, _) = conv.forward(&x).unwrap();
        // every output sees the whole 3x3 image through a 7x7 window
        assert_eq!(y.data()[4], 9.0);
        assert!(y.data().iter().all(|&v| v == 9.0));
    }

    #[test]
    fn channel_mismatch_is_shape_error() {
        let conv = Conv2d::<f32>::new(2, 4).unwrap();
        let x = Tensor::zeros(&[1, 1, 8, 8]).unwrap();
        assert!(matches!(conv.forward(&x), Err(Error::Shape(_))));
    }

    #[test]
    fn zero_upstream_gives_zero_gradients() {
        let mut conv = Conv2d::<f64>::new(2, 3).unwrap();
        conv.weight = conv.weight.map(|_| 0.3);
        let x = Tensor::full(&[2, 2, 9, 9], 0.7).unwrap();
        let (y, cache) = conv.forward(&x).unwrap();
        let g = conv.backward(&Tensor::zeros(y.shape()).unwrap(), &cache, true).unwrap();
        assert_eq!(g.dx.unwrap().sum(), 0.0);
        assert_eq!(g.dw.sum(), 0.0);
        assert_eq!(g.db.sum(), 0.0);
    }

    #[test]
    fn single_window_weight_gradient_is_input_times_dy() {
        // 7x7 input, pad 0: exactly one output position whose window is the image
        let conv = Conv2d::<f64>::with_pad(1, 1, 0).unwrap();
        let x = Tensor::from_vec(&[1, 1, 7, 7], (0..49).map(|i| i as f64 - 20.0).collect()).unwrap();
        let (y, cache) = conv.forward(&x).unwrap();
        assert_eq!(y.shape(), &[1, 1, 1, 1]);
        let dy = Tensor::from_vec(&[1, 1, 1, 1], vec![2.5]).unwrap();
        let g = conv.backward(&dy, &cache, false).unwrap();
        assert!(g.dx.is_none());
        assert_eq!(g.dw.data(), x.scale(2.5).data());
        assert_eq!(g.db.data(), &[2.5]);
    }

    #[test]
    fn backward_rejects_wrong_dy() {
        let conv = Conv2d::<f64>::new(1, 2).unwrap();
        let x = Tensor::zeros(&[1, 1, 8, 8]).unwrap();
        let (_, cache) = conv.forward(&x).unwrap();
        let bad = Tensor::zeros(&[1, 2, 7, 8]).unwrap();
        assert!(conv.backward(&bad, &cache, true).is_err());
    }
}
