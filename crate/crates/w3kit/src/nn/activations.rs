//! Pointwise nonlinearities and the softmax.

use crate::elem::{fl, Elem};

/// Numerically stable logistic sigmoid, clamped into the open interval
/// (0, 1). Without the clamp, float rounding saturates to exactly 0.0 or 1.0
/// for |x| beyond ~37 (f64), which would violate the strict mask-range and
/// attenuation contracts downstream.
#[inline]
pub fn sigmoid<F: Elem>(x: F) -> F {
    let y = if x >= F::zero() {
        F::one() / (F::one() + (-x).exp())
    } else {
        let e = x.exp();
        e / (F::one() + e)
    };
    let lo = F::min_positive_value();
    let hi = F::one() - F::epsilon() * fl(0.5);
    y.max(lo).min(hi)
}

/// Derivative of the sigmoid expressed from its output: `y * (1 - y)`.
#[inline]
pub fn sigmoid_grad_from_output<F: Elem>(y: F) -> F {
    y * (F::one() - y)
}

#[inline]
pub fn relu<F: Elem>(x: F) -> F {
    if x > F::zero() {
        x
    } else {
        F::zero()
    }
}

/// Max-subtracted softmax; the output sums to 1 and is invariant under
/// constant shifts of the input.
pub fn softmax_in_place<F: Elem>(xs: &mut [F]) {
    if xs.is_empty() {
        return;
    }
    let mut m = xs[0];
    for &x in xs.iter().skip(1) {
        if x > m {
            m = x;
        }
    }
    let mut sum = F::zero();
    for x in xs.iter_mut() {
        *x = (*x - m).exp();
        sum = sum + *x;
    }
    let inv = F::one() / sum;
    for x in xs.iter_mut() {
        *x = *x * inv;
    }
}

pub fn softmax<F: Elem>(xs: &[F]) -> Vec<F> {
    let mut out = xs.to_vec();
    softmax_in_place(&mut out);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sigmoid_at_zero_is_half() {
        assert_eq!(sigmoid(0.0f64), 0.5);
    }

    #[test]
    fn sigmoid_stays_strictly_inside_unit_interval() {
        for &x in &[-1e6f64, -800.0, -40.0, 0.0, 40.0, 800.0, 1e6] {
            let y = sigmoid(x);
            assert!(y > 0.0 && y < 1.0, "sigmoid({x}) = {y}");
        }
    }

    #[test]
    fn softmax_of_uniform_vector_is_uniform() {
        for k in [1usize, 3, 8] {
            let p = softmax(&vec![0.7f64; k]);
            for &v in &p {
                assert!((v - 1.0 / k as f64).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn softmax_sums_to_one_and_is_shift_invariant() {
        let xs = [0.3f64, -1.2, 2.5, 0.0, 4.1];
        let p = softmax(&xs);
        let sum: f64 = p.iter().sum();
        assert!((sum - 1.0).abs() < 1e-9);

        let shifted: Vec<f64> = xs.iter().map(|x| x + 100.0).collect();
        let q = softmax(&shifted);
        for (a, b) in p.iter().zip(q.iter()) {
            assert!((a - b).abs() < 1e-9);
        }
    }
}
