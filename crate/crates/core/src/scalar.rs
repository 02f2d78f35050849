use std::fmt::{Debug, Display};

use num_traits::Float;

/// Element type of a [`Tensor`](crate::Tensor).
///
/// Implemented for `f32` (the training default) and `f64` (used for
/// gradient checking, where rounding must not swamp the comparison).
pub trait Scalar:
    Float + Default + Debug + Display + Send + Sync + std::iter::Sum + 'static
{
    /// Dense row-major GEMM: `c = alpha * a * b + beta * c`.
    ///
    /// `a` is `m x k` with row stride `rsa` and column stride `csa`; `b` is
    /// `k x n` with strides `rsb`, `csb`; `c` is `m x n` contiguous row-major.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        rsa: isize,
        csa: isize,
        b: &[Self],
        rsb: isize,
        csb: isize,
        beta: Self,
        c: &mut [Self],
    );

    fn from_f64(v: f64) -> Self;

    fn as_f64(self) -> f64;
}

macro_rules! impl_scalar {
    ($t:ty, $kernel:path) => {
        impl Scalar for $t {
            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                rsa: isize,
                csa: isize,
                b: &[Self],
                rsb: isize,
                csb: isize,
                beta: Self,
                c: &mut [Self],
            ) {
                assert!(c.len() >= m * n);
                if m == 0 || n == 0 {
                    return;
                }
                if k > 0 {
                    let a_end = (m as isize - 1) * rsa + (k as isize - 1) * csa;
                    let b_end = (k as isize - 1) * rsb + (n as isize - 1) * csb;
                    assert!(a_end >= 0 && (a_end as usize) < a.len());
                    assert!(b_end >= 0 && (b_end as usize) < b.len());
                }
                // SAFETY: the asserts above keep every strided access of a, b
                // and c inside their slices; c is exclusively borrowed.
                unsafe {
                    $kernel(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        rsb,
                        csb,
                        beta,
                        c.as_mut_ptr(),
                        n as isize,
                        1,
                    );
                }
            }

            #[inline]
            fn from_f64(v: f64) -> Self {
                v as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }
        }
    };
}

impl_scalar!(f32, matrixmultiply::sgemm);
impl_scalar!(f64, matrixmultiply::dgemm);
