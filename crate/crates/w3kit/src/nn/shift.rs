//! Temporal shift: a zero-parameter temporal mixing op. The first
//! `floor(fraction * C) / 2` channels are shifted forward one frame, the next
//! `floor(fraction * C) / 2` backward one frame, with zero fill at the clip
//! boundaries. Remaining channels pass through unchanged.

use crate::elem::Elem;
use crate::error::{Error, Result};
use crate::tensor::FeatureMap;

fn shift_counts(c: usize, fraction: f64) -> Result<usize> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::Config(format!(
            "temporal shift fraction {fraction} outside [0, 1]"
        )));
    }
    Ok(((fraction * c as f64).floor() as usize) / 2)
}

fn shift_impl<F: Elem>(f: &FeatureMap<F>, n_shift: usize, first_forward: bool) -> FeatureMap<F> {
    let (t, c, h, w) = f.shape();
    let mut out = FeatureMap::zeros(t, c, h, w);
    for ti in 0..t {
        for ci in 0..c {
            enum Dir {
                Fwd,
                Bwd,
                None,
            }
            let dir = if ci < n_shift {
                if first_forward {
                    Dir::Fwd
                } else {
                    Dir::Bwd
                }
            } else if ci < 2 * n_shift {
                if first_forward {
                    Dir::Bwd
                } else {
                    Dir::Fwd
                }
            } else {
                Dir::None
            };
            let src_t = match dir {
                // Forward shift: frame t sees frame t-1.
                Dir::Fwd => {
                    if ti == 0 {
                        continue;
                    } else {
                        ti - 1
                    }
                }
                Dir::Bwd => {
                    if ti + 1 >= t {
                        continue;
                    } else {
                        ti + 1
                    }
                }
                Dir::None => ti,
            };
            let src = f.plane(src_t, ci).to_vec();
            out.plane_mut(ti, ci).copy_from_slice(&src);
        }
    }
    out
}

pub fn temporal_shift<F: Elem>(f: &FeatureMap<F>, fraction: f64) -> Result<FeatureMap<F>> {
    let n = shift_counts(f.c(), fraction)?;
    if n == 0 {
        return Ok(f.clone());
    }
    Ok(shift_impl(f, n, true))
}

/// Gradient of [`temporal_shift`]: the transpose of a shift is the opposite
/// shift with the same zero fill.
pub fn temporal_shift_backward<F: Elem>(d_out: &FeatureMap<F>, fraction: f64) -> FeatureMap<F> {
    let n = shift_counts(d_out.c(), fraction).expect("fraction validated on the forward pass");
    if n == 0 {
        return d_out.clone();
    }
    shift_impl(d_out, n, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn zero_fraction_is_a_no_op() {
        let f = FeatureMap::from_fn(3, 4, 2, 2, |t, c, y, x| (t + c + y + x) as f64);
        assert_eq!(temporal_shift(&f, 0.0).unwrap(), f);
    }

    #[test]
    fn single_frame_zeroes_the_shifted_channels() {
        let f = FeatureMap::from_fn(1, 8, 2, 2, |_, _, _, _| 3.0);
        let s = temporal_shift(&f, 0.5).unwrap();
        // floor(0.5 * 8) / 2 = 2 channels each way; channels 0..4 are shifted.
        for ci in 0..4 {
            assert!(s.plane(0, ci).iter().all(|&v| v == 0.0));
        }
        for ci in 4..8 {
            assert!(s.plane(0, ci).iter().all(|&v| v == 3.0));
        }
    }

    #[test]
    fn matches_index_arithmetic_oracle() {
        let mut r = rng::seeded(6);
        let f = FeatureMap::from_fn(3, 8, 2, 2, |_, _, _, _| rng::uniform(&mut r, -1.0, 1.0));
        let s = temporal_shift(&f, 0.5).unwrap();
        let (t, c, h, w) = f.shape();
        for ti in 0..t {
            for ci in 0..c {
                for y in 0..h {
                    for x in 0..w {
                        let expect = if ci < 2 {
                            if ti == 0 {
                                0.0
                            } else {
                                f.at(ti - 1, ci, y, x)
                            }
                        } else if ci < 4 {
                            if ti + 1 == t {
                                0.0
                            } else {
                                f.at(ti + 1, ci, y, x)
                            }
                        } else {
                            f.at(ti, ci, y, x)
                        };
                        assert_eq!(s.at(ti, ci, y, x), expect);
                    }
                }
            }
        }
    }

    #[test]
    fn backward_is_the_transpose() {
        // <shift(x), y> == <x, shift_backward(y)> for random x, y.
        let mut r = rng::seeded(11);
        let x = FeatureMap::<f64>::from_fn(3, 6, 2, 2, |_, _, _, _| rng::uniform(&mut r, -1.0, 1.0));
        let y = FeatureMap::<f64>::from_fn(3, 6, 2, 2, |_, _, _, _| rng::uniform(&mut r, -1.0, 1.0));
        let sx = temporal_shift(&x, 0.5).unwrap();
        let sty = temporal_shift_backward(&y, 0.5);
        let lhs: f64 = sx.as_slice().iter().zip(y.as_slice()).map(|(a, b)| a * b).sum();
        let rhs: f64 = x.as_slice().iter().zip(sty.as_slice()).map(|(a, b)| a * b).sum();
        assert!((lhs - rhs).abs() < 1e-12);
    }

    #[test]
    fn invalid_fraction_is_rejected() {
        let f = FeatureMap::<f64>::zeros(2, 4, 1, 1);
        assert!(temporal_shift(&f, -0.1).is_err());
        assert!(temporal_shift(&f, 1.5).is_err());
    }
}
