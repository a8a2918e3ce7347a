//! Floating-point scalar abstraction shared by the numerical kernels.

use std::fmt::{Debug, Display};
use std::iter::Sum;

use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};

/// Real scalar used throughout the crate (implemented for `f32` and `f64`).
pub trait Real:
    Float
    + FloatConst
    + FromPrimitive
    + ToPrimitive
    + NumAssign
    + Sum
    + Default
    + Debug
    + Display
    + Send
    + Sync
    + 'static
{
    /// Machine epsilon of the type.
    const EPS: Self;

    /// `c = alpha * a * b + beta * c` for column-major dense storage.
    ///
    /// `a` is `m x k`, `b` is `k x n`, `c` is `m x n`, all with leading
    /// dimension equal to their row count.
    #[allow(clippy::too_many_arguments)]
    fn gemm(
        m: usize,
        k: usize,
        n: usize,
        alpha: Self,
        a: &[Self],
        a_trans: bool,
        b: &[Self],
        beta: Self,
        c: &mut [Self],
    );

    /// Lossless-enough conversion from an `f64` literal.
    #[inline]
    fn lit(x: f64) -> Self {
        Self::from_f64(x).expect("f64 literal representable")
    }

    #[inline]
    fn of(n: usize) -> Self {
        Self::from_usize(n).expect("usize representable")
    }

    #[inline]
    fn as_f64(self) -> f64 {
        self.to_f64().unwrap_or(f64::NAN)
    }
}

macro_rules! impl_real {
    ($t:ty, $gemm:path) => {
        impl Real for $t {
            const EPS: Self = <$t>::EPSILON;

            fn gemm(
                m: usize,
                k: usize,
                n: usize,
                alpha: Self,
                a: &[Self],
                a_trans: bool,
                b: &[Self],
                beta: Self,
                c: &mut [Self],
            ) {
                assert!(a.len() >= m * k && b.len() >= k * n && c.len() >= m * n);
                if m == 0 || n == 0 {
                    return;
                }
                // row stride / column stride for column-major operands
                let (rsa, csa) = if a_trans { (k as isize, 1) } else { (1, m as isize) };
                // SAFETY: slice lengths were checked above and the strides
                // describe exactly the column-major layouts of a, b and c.
                unsafe {
                    $gemm(
                        m,
                        k,
                        n,
                        alpha,
                        a.as_ptr(),
                        rsa,
                        csa,
                        b.as_ptr(),
                        1,
                        k as isize,
                        beta,
                        c.as_mut_ptr(),
                        1,
                        m as isize,
                    );
                }
            }
        }
    };
}

impl_real!(f32, matrixmultiply::sgemm);
impl_real!(f64, matrixmultiply::dgemm);

#[cfg(test)]
mod tests {
    use super::*;

    fn gemm_check<T: Real>() {
        // a = [[1,2],[3,4]] column-major, b = identity
        let a = [T::lit(1.0), T::lit(3.0), T::lit(2.0), T::lit(4.0)];
        let b = [T::one(), T::zero(), T::zero(), T::one()];
        let mut c = [T::zero(); 4];
        T::gemm(2, 2, 2, T::one(), &a, false, &b, T::zero(), &mut c);
        assert_eq!(c, a);
        T::gemm(2, 2, 2, T::one(), &a, true, &b, T::zero(), &mut c);
        assert_eq!(c, [T::lit(1.0), T::lit(2.0), T::lit(3.0), T::lit(4.0)]);
    }

    #[test]
    fn gemm_both_precisions() {
        gemm_check::<f32>();
        gemm_check::<f64>();
    }
}
