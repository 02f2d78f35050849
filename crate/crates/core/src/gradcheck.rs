//! Central finite differences for checking analytic gradients.

use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// Central-difference estimate of `d f / d x[i]`.
pub fn central_difference<F>(x: &mut Tensor<f64>, i: usize, step: f64, mut f: F) -> f64
where
    F: FnMut(&Tensor<f64>) -> f64,
{
    let orig = x.data()[i];
    x.data_mut()[i] = orig + step;
    let plus = f(x);
    x.data_mut()[i] = orig - step;
    let minus = f(x);
    x.data_mut()[i] = orig;
    (plus - minus) / (2.0 * step)
}

/// Full numeric gradient of a scalar function of `x`.
pub fn numeric_gradient<F>(x: &Tensor<f64>, step: f64, mut f: F) -> Tensor<f64>
where
    F: FnMut(&Tensor<f64>) -> f64,
{
    let mut probe = x.clone();
    let grad: Vec<f64> = (0..x.len())
        .map(|i| central_difference(&mut probe, i, step, &mut f))
        .collect();
    Tensor::from_vec(x.shape(), grad).expect("same shape as x")
}

/// `||a - b|| / max(||a||, ||b||)` in the Euclidean norm, 0 when both vanish.
pub fn relative_error<T: Scalar>(analytic: &[T], numeric: &[T]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    let norm = |it: &mut dyn Iterator<Item = f64>| it.map(|v| v * v).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, b)| a.as_f64() - b.as_f64()));
    let scale = norm(&mut analytic.iter().map(|v| v.as_f64())).max(norm(&mut numeric.iter().map(|v| v.as_f64())));
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

/// Scalar relative error `|a - b| / max(|a|, |b|)`, 0 when both vanish.
pub fn scalar_relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 {
        0.0
    } else {
        (a - b).abs() / scale
    }
}
