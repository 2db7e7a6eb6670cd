use std::fmt::{Debug, Display};

use num_traits::Float;

/// Scalar element type for tensors and model parameters.
///
/// Training runs use `f32`; tests and gradient checks instantiate the same
/// code with `f64` so finite-difference comparisons are meaningful.
pub trait Elem: Float + Debug + Display + Default + Send + Sync + 'static {}

impl Elem for f32 {}
impl Elem for f64 {}

/// Convert an `f64` literal into the working element type.
#[inline]
pub fn fl<F: Elem>(x: f64) -> F {
    F::from(x).expect("f64 is representable in every Elem type")
}

/// Widen an element to `f64` (exact for f32 and f64).
#[inline]
pub fn wide<F: Elem>(x: F) -> f64 {
    x.to_f64().expect("Elem widens to f64")
}
