use crate::error::Result;
use crate::scalar::Scalar;
use crate::tensor::Tensor;

/// `max(x, 0)`. The returned output doubles as the backward cache.
pub fn relu_forward<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    x.map(|v| if v > T::zero() { v } else { T::zero() })
}

pub fn relu_in_place<T: Scalar>(x: &mut Tensor<T>) {
    for v in x.data_mut() {
        if !(*v > T::zero()) {
            *v = T::zero();
        }
    }
}

/// Passes `dy` where the forward output was positive. The subgradient at
/// exactly zero is zero.
pub fn relu_backward<T: Scalar>(dy: &Tensor<T>, y: &Tensor<T>) -> Result<Tensor<T>> {
    dy.zip_map(y, |g, out| if out > T::zero() { g } else { T::zero() })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relu_examples() {
        let x = Tensor::<f64>::from_vec(&[3], vec![-1.0, 0.0, 2.0]).unwrap();
        let y = relu_forward(&x);
        assert_eq!(y.data(), &[0.0, 0.0, 2.0]);
        assert_eq!(relu_forward(&y), y);
        let dy = Tensor::full(&[3], 5.0).unwrap();
        assert_eq!(relu_backward(&dy, &y).unwrap().data(), &[0.0, 0.0, 5.0]);

        let mut z = x.clone();
        relu_in_place(&mut z);
        assert_eq!(z, y);
    }
}
