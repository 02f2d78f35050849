//! Dense row-major tensors and the two kernels everything else is built on:
//! matrix multiplication and windowed patch extraction (`unfold`).

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// A dense row-major array with an explicit shape.
///
/// Image batches use axis order `[batch, channel, height, width]`. There is
/// no broadcasting: every binary operation requires identical shapes.
#[derive(Clone, PartialEq)]
pub struct Tensor<T = f32> {
    shape: Vec<usize>,
    data: Vec<T>,
}

impl<T> std::fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("shape", &self.shape)
            .field("len", &self.data.len())
            .finish()
    }
}

fn checked_numel(shape: &[usize]) -> Result<usize> {
    if shape.is_empty() {
        return Err(Error::shape("tensor shape must have at least one dimension"));
    }
    if shape.contains(&0) {
        return Err(Error::shape(format!("zero-sized dimension in shape {shape:?}")));
    }
    Ok(shape.iter().product())
}

impl<T: Scalar> Tensor<T> {
    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, T::zero())
    }

    pub fn full(shape: &[usize], value: T) -> Result<Self> {
        let n = checked_numel(shape)?;
        Ok(Tensor {
            shape: shape.to_vec(),
            data: vec![value; n],
        })
    }

    pub fn from_vec(shape: &[usize], data: Vec<T>) -> Result<Self> {
        let n = checked_numel(shape)?;
        if n != data.len() {
            return Err(Error::shape(format!(
                "shape {shape:?} needs {n} elements, got {}",
                data.len()
            )));
        }
        Ok(Tensor {
            shape: shape.to_vec(),
            data,
        })
    }

    /// `n x n` identity matrix.
    pub fn eye(n: usize) -> Result<Self> {
        let mut t = Self::zeros(&[n, n])?;
        for i in 0..n {
            t.data[i * n + i] = T::one();
        }
        Ok(t)
    }

    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    pub fn rank(&self) -> usize {
        self.shape.len()
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn data(&self) -> &[T] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<T> {
        self.data
    }

    pub fn reshape(mut self, shape: &[usize]) -> Result<Self> {
        let n = checked_numel(shape)?;
        if n != self.data.len() {
            return Err(Error::shape(format!(
                "cannot reshape {:?} into {shape:?}",
                self.shape
            )));
        }
        self.shape = shape.to_vec();
        Ok(self)
    }

    pub fn sum(&self) -> T {
        self.data.iter().copied().sum()
    }

    pub fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn zip_map(&self, other: &Self, f: impl Fn(T, T) -> T) -> Result<Self> {
        self.expect_same_shape(other)?;
        Ok(Tensor {
            shape: self.shape.clone(),
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn add_assign(&mut self, other: &Self) -> Result<()> {
        self.expect_same_shape(other)?;
        for (a, &b) in self.data.iter_mut().zip(&other.data) {
            *a = *a + b;
        }
        Ok(())
    }

    pub fn scale(&self, k: T) -> Self {
        self.map(|v| v * k)
    }

    pub fn max_abs_diff(&self, other: &Self) -> Result<T> {
        self.expect_same_shape(other)?;
        Ok(self
            .data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(T::zero(), T::max))
    }

    pub fn cast<U: Scalar>(&self) -> Tensor<U> {
        Tensor {
            shape: self.shape.clone(),
            data: self.data.iter().map(|v| U::from_f64(v.as_f64())).collect(),
        }
    }

    pub fn expect_same_shape(&self, other: &Self) -> Result<()> {
        if self.shape != other.shape {
            return Err(Error::shape(format!(
                "shape mismatch: {:?} vs {:?}",
                self.shape, other.shape
            )));
        }
        Ok(())
    }

    pub fn expect_shape(&self, shape: &[usize], what: &str) -> Result<()> {
        if self.shape != shape {
            return Err(Error::shape(format!(
                "{what}: expected shape {shape:?}, got {:?}",
                self.shape
            )));
        }
        Ok(())
    }

    fn matrix_dims(&self, what: &str) -> Result<(usize, usize)> {
        match self.shape[..] {
            [r, c] => Ok((r, c)),
            _ => Err(Error::shape(format!(
                "{what} must be a matrix, got shape {:?}",
                self.shape
            ))),
        }
    }

    /// Matrix product of two rank-2 tensors.
    pub fn matmul(&self, other: &Self) -> Result<Self> {
        let (m, k) = self.matrix_dims("matmul lhs")?;
        let (k2, n) = other.matrix_dims("matmul rhs")?;
        if k != k2 {
            return Err(Error::shape(format!(
                "matmul inner dimensions differ: [{m}, {k}] x [{k2}, {n}]"
            )));
        }
        let mut out = vec![T::zero(); m * n];
        T::gemm(
            m,
            k,
            n,
            T::one(),
            &self.data,
            k as isize,
            1,
            &other.data,
            n as isize,
            1,
            T::zero(),
            &mut out,
        );
        Tensor::from_vec(&[m, n], out)
    }

    pub fn transpose(&self) -> Result<Self> {
        let (r, c) = self.matrix_dims("transpose")?;
        let mut out = vec![T::zero(); r * c];
        for i in 0..r {
            for j in 0..c {
                out[j * r + i] = self.data[i * c + j];
            }
        }
        Tensor::from_vec(&[c, r], out)
    }
}

/// Row-major GEMM over plain slices with optional transposition of either
/// operand: `c = alpha * op(a) * op(b) + beta * c`, `op(a)` being `m x k`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn gemm<T: Scalar>(
    trans_a: bool,
    trans_b: bool,
    m: usize,
    n: usize,
    k: usize,
    alpha: T,
    a: &[T],
    b: &[T],
    beta: T,
    c: &mut [T],
) {
    let (rsa, csa) = if trans_a { (1, m as isize) } else { (k as isize, 1) };
    let (rsb, csb) = if trans_b { (1, k as isize) } else { (n as isize, 1) };
    T::gemm(m, k, n, alpha, a, rsa, csa, b, rsb, csb, beta, c);
}

/// Geometry of a square sliding window.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Window {
    pub size: usize,
    pub stride: usize,
    pub pad: usize,
}

impl Window {
    pub const fn new(size: usize, stride: usize, pad: usize) -> Self {
        Window { size, stride, pad }
    }

    /// Output extent along one axis, `floor((d + 2 pad - size) / stride) + 1`,
    /// or `None` when the window does not fit.
    pub fn out_dim(&self, d: usize) -> Option<usize> {
        let padded = d + 2 * self.pad;
        if self.size == 0 || self.stride == 0 || self.size > padded {
            return None;
        }
        Some((padded - self.size) / self.stride + 1)
    }

    fn out_dims(&self, h: usize, w: usize) -> Result<(usize, usize)> {
        match (self.out_dim(h), self.out_dim(w)) {
            (Some(oh), Some(ow)) => Ok((oh, ow)),
            _ => Err(Error::shape(format!(
                "window {} (pad {}) does not fit a {h}x{w} input",
                self.size, self.pad
            ))),
        }
    }
}

/// Slice-level unfold of one `[c, h, w]` image into `cols`, which must hold
/// `c * size^2` rows of `oh * ow` columns.
pub(crate) fn unfold_into<T: Scalar>(
    input: &[T],
    (c, h, w): (usize, usize, usize),
    win: Window,
    (oh, ow): (usize, usize),
    cols: &mut [T],
) {
    let ncols = oh * ow;
    let k = win.size;
    let pad = win.pad as isize;
    for ch in 0..c {
        let plane = &input[ch * h * w..(ch + 1) * h * w];
        for u in 0..k {
            for v in 0..k {
                let row = (ch * k + u) * k + v;
                let dst = &mut cols[row * ncols..(row + 1) * ncols];
                for i in 0..oh {
                    let y = (i * win.stride) as isize + u as isize - pad;
                    let out_row = &mut dst[i * ow..(i + 1) * ow];
                    if y < 0 || y >= h as isize {
                        out_row.fill(T::zero());
                        continue;
                    }
                    let src = &plane[y as usize * w..(y as usize + 1) * w];
                    for (j, o) in out_row.iter_mut().enumerate() {
                        let x = (j * win.stride) as isize + v as isize - pad;
                        *o = if x < 0 || x >= w as isize {
                            T::zero()
                        } else {
                            src[x as usize]
                        };
                    }
                }
            }
        }
    }
}

/// Adjoint of [`unfold_into`]: scatter-adds columns back onto a `[c, h, w]`
/// image. Padding positions are dropped.
pub(crate) fn fold_into<T: Scalar>(
    cols: &[T],
    (c, h, w): (usize, usize, usize),
    win: Window,
    (oh, ow): (usize, usize),
    out: &mut [T],
) {
    let ncols = oh * ow;
    let k = win.size;
    let pad = win.pad as isize;
    out[..c * h * w].fill(T::zero());
    for ch in 0..c {
        let plane = &mut out[ch * h * w..(ch + 1) * h * w];
        for u in 0..k {
            for v in 0..k {
                let row = (ch * k + u) * k + v;
                let src = &cols[row * ncols..(row + 1) * ncols];
                for i in 0..oh {
                    let y = (i * win.stride) as isize + u as isize - pad;
                    if y < 0 || y >= h as isize {
                        continue;
                    }
                    let dst = &mut plane[y as usize * w..(y as usize + 1) * w];
                    for j in 0..ow {
                        let x = (j * win.stride) as isize + v as isize - pad;
                        if x >= 0 && x < w as isize {
                            dst[x as usize] = dst[x as usize] + src[i * ow + j];
                        }
                    }
                }
            }
        }
    }
}

fn chw(input: &Tensor<impl Scalar>, what: &str) -> Result<(usize, usize, usize)> {
    match input.shape()[..] {
        [c, h, w] => Ok((c, h, w)),
        _ => Err(Error::shape(format!(
            "{what} expects a [C, H, W] tensor, got {:?}",
            input.shape()
        ))),
    }
}

/// Lower a `[C, H, W]` image to its patch matrix.
///
/// The result has `C * size^2` rows and `outH * outW` columns; column `j` is
/// the zero-padded receptive field of output position `j`, laid out channel
/// first, then row-major within the window.
pub fn unfold<T: Scalar>(input: &Tensor<T>, win: Window) -> Result<Tensor<T>> {
    let (c, h, w) = chw(input, "unfold")?;
    let (oh, ow) = win.out_dims(h, w)?;
    let rows = c * win.size * win.size;
    let mut cols = vec![T::zero(); rows * oh * ow];
    unfold_into(input.data(), (c, h, w), win, (oh, ow), &mut cols);
    Tensor::from_vec(&[rows, oh * ow], cols)
}

/// Transpose of [`unfold`]: sums every column entry back into the input
/// position it was read from.
pub fn fold<T: Scalar>(cols: &Tensor<T>, (c, h, w): (usize, usize, usize), win: Window) -> Result<Tensor<T>> {
    let (oh, ow) = win.out_dims(h, w)?;
    cols.expect_shape(&[c * win.size * win.size, oh * ow], "fold columns")?;
    let mut out = vec![T::zero(); c * h * w];
    fold_into(cols.data(), (c, h, w), win, (oh, ow), &mut out);
    Tensor::from_vec(&[c, h, w], out)
}
