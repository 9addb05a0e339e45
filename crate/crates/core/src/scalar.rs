//! Scalar abstraction shared by every numerical module.

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::cell::RefCell;
use std::collections::HashMap;
use std::sync::Arc;

use num_complex::Complex;
use num_traits::{Float, FloatConst, FromPrimitive, NumAssign, ToPrimitive};
use rustfft::{Fft, FftPlanner};

/// Real floating point type the library is generic over (`f32` or `f64`).
pub trait Real:
    Float
    + FloatConst
    + NumAssign
    + FromPrimitive
    + ToPrimitive
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Machine epsilon of the type, exposed without going through `Float`.
    const EPS: Self;

    /// Lossy conversion from an `f64` literal.
    fn lit(x: f64) -> Self;

    fn as_f64(self) -> f64;

    /// Unnormalized in-place FFT of `buf` (forward when `inverse` is false).
    fn fft_in_place(buf: &mut [Complex<Self>], inverse: bool);
}

macro_rules! impl_real {
    ($t:ty) => {
        impl Real for $t {
            const EPS: Self = <$t>::EPSILON;

            #[inline]
            fn lit(x: f64) -> Self {
                x as $t
            }

            #[inline]
            fn as_f64(self) -> f64 {
                self as f64
            }

            fn fft_in_place(buf: &mut [Complex<Self>], inverse: bool) {
                thread_local! {
                    static PLANS: RefCell<(FftPlanner<$t>, HashMap<(usize, bool), Arc<dyn Fft<$t>>>)> =
                        RefCell::new((FftPlanner::new(), HashMap::new()));
                }
                let n = buf.len();
                let plan = PLANS.with(|cell| {
                    let (planner, cache) = &mut *cell.borrow_mut();
                    Arc::clone(cache.entry((n, inverse)).or_insert_with(|| {
                        if inverse {
                            planner.plan_fft_inverse(n)
                        } else {
                            planner.plan_fft_forward(n)
                        }
                    }))
                });
                plan.process(buf);
            }
        }
    };
}

impl_real!(f32);
impl_real!(f64);

/// Shorthand for `T::lit`.
#[inline]
pub fn lit<T: Real>(x: f64) -> T {
    T::lit(x)
}

#[inline]
pub fn cplx<T: Real>(re: T, im: T) -> Complex<T> {
    Complex::new(re, im)
}

#[inline]
pub fn czero<T: Real>() -> Complex<T> {
    Complex::new(T::zero(), T::zero())
}
