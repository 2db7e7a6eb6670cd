//! Pooling reductions over feature maps.
//!
//! `spatial_pool` squeezes H×W away (per frame, per channel) and
//! `channel_pool` squeezes C away (per frame, per position). Max pooling
//! routes its gradient to the first maximal element in row-major order so
//! backward passes are deterministic under ties.

use crate::elem::{fl, Elem};
use crate::tensor::{FeatureMap, Mat, Vol};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PoolMode {
    Avg,
    Max,
}

/// Reduce H×W, producing a T×C channel descriptor.
pub fn spatial_pool<F: Elem>(f: &FeatureMap<F>, mode: PoolMode) -> Mat<F> {
    spatial_pool_cached(f, mode).0
}

/// As [`spatial_pool`], additionally returning the flat H×W argmax per (t, c)
/// when `mode` is `Max` (needed by the backward pass).
pub fn spatial_pool_cached<F: Elem>(
    f: &FeatureMap<F>,
    mode: PoolMode,
) -> (Mat<F>, Option<Vec<u32>>) {
    let (t, c, h, w) = f.shape();
    let mut out = Mat::zeros(t, c);
    match mode {
        PoolMode::Avg => {
            let inv = fl::<F>(1.0 / (h * w) as f64);
            for ti in 0..t {
                for ci in 0..c {
                    let mut sum = F::zero();
                    for &v in f.plane(ti, ci) {
                        sum = sum + v;
                    }
                    *out.at_mut(ti, ci) = sum * inv;
                }
            }
            (out, None)
        }
        PoolMode::Max => {
            let mut arg = vec![0u32; t * c];
            for ti in 0..t {
                for ci in 0..c {
                    let plane = f.plane(ti, ci);
                    let mut best = plane[0];
                    let mut best_i = 0usize;
                    for (i, &v) in plane.iter().enumerate().skip(1) {
                        if v > best {
                            best = v;
                            best_i = i;
                        }
                    }
                    *out.at_mut(ti, ci) = best;
                    arg[ti * c + ci] = best_i as u32;
                }
            }
            (out, Some(arg))
        }
    }
}

/// Accumulate `d_out` (T×C) back into `d_f`.
pub fn spatial_pool_backward<F: Elem>(
    d_out: &Mat<F>,
    mode: PoolMode,
    argmax: Option<&[u32]>,
    d_f: &mut FeatureMap<F>,
) {
    let (t, c, h, w) = d_f.shape();
    match mode {
        PoolMode::Avg => {
            let inv = fl::<F>(1.0 / (h * w) as f64);
            for ti in 0..t {
                for ci in 0..c {
                    let g = d_out.at(ti, ci) * inv;
                    for v in d_f.plane_mut(ti, ci) {
                        *v = *v + g;
                    }
                }
            }
        }
        PoolMode::Max => {
            let arg = argmax.expect("max pool backward needs the cached argmax");
            for ti in 0..t {
                for ci in 0..c {
                    let i = arg[ti * c + ci] as usize;
                    let plane = d_f.plane_mut(ti, ci);
                    plane[i] = plane[i] + d_out.at(ti, ci);
                }
            }
        }
    }
}

/// Reduce C, producing a T×H×W spatial descriptor (the paper's T×1×H×W with
/// the unit channel axis left implicit).
pub fn channel_pool<F: Elem>(f: &FeatureMap<F>, mode: PoolMode) -> Vol<F> {
    channel_pool_cached(f, mode).0
}

/// As [`channel_pool`], returning the argmax channel per (t, h, w) for `Max`.
pub fn channel_pool_cached<F: Elem>(
    f: &FeatureMap<F>,
    mode: PoolMode,
) -> (Vol<F>, Option<Vec<u32>>) {
    let (t, c, h, w) = f.shape();
    let hw = h * w;
    let mut out = Vol::zeros(t, h, w);
    match mode {
        PoolMode::Avg => {
            let inv = fl::<F>(1.0 / c as f64);
            for ti in 0..t {
                let plane = out.plane_mut(ti);
                for ci in 0..c {
                    for (o, &v) in plane.iter_mut().zip(f.plane(ti, ci)) {
                        *o = *o + v;
                    }
                }
                for o in plane.iter_mut() {
                    *o = *o * inv;
                }
            }
            (out, None)
        }
        PoolMode::Max => {
            let mut arg = vec![0u32; t * hw];
            for ti in 0..t {
                let plane = out.plane_mut(ti);
                plane.copy_from_slice(f.plane(ti, 0));
                for ci in 1..c {
                    let src = f.plane(ti, ci);
                    for (i, (o, &v)) in plane.iter_mut().zip(src).enumerate() {
                        if v > *o {
                            *o = v;
                            arg[ti * hw + i] = ci as u32;
                        }
                    }
                }
            }
            (out, Some(arg))
        }
    }
}

/// Accumulate `d_out` (T×H×W) back into `d_f`.
pub fn channel_pool_backward<F: Elem>(
    d_out: &Vol<F>,
    mode: PoolMode,
    argmax: Option<&[u32]>,
    d_f: &mut FeatureMap<F>,
) {
    let (t, c, h, w) = d_f.shape();
    let hw = h * w;
    match mode {
        PoolMode::Avg => {
            let inv = fl::<F>(1.0 / c as f64);
            for ti in 0..t {
                for ci in 0..c {
                    for (v, &g) in d_f.plane_mut(ti, ci).iter_mut().zip(d_out.plane(ti)) {
                        *v = *v + g * inv;
                    }
                }
            }
        }
        PoolMode::Max => {
            let arg = argmax.expect("max pool backward needs the cached argmax");
            for ti in 0..t {
                for i in 0..hw {
                    let ci = arg[ti * hw + i] as usize;
                    let plane = d_f.plane_mut(ti, ci);
                    plane[i] = plane[i] + d_out.plane(ti)[i];
                }
            }
        }
    }
}

/// 2×2 max pooling over H×W, halving the spatial grid (odd trailing
/// rows/columns are dropped). Returns the pooled map plus the flat input
/// argmax per output element for backward.
pub fn max_pool_2x2<F: Elem>(f: &FeatureMap<F>) -> (FeatureMap<F>, Vec<u32>) {
    let (t, c, h, w) = f.shape();
    let (oh, ow) = (h / 2, w / 2);
    let mut out = FeatureMap::zeros(t, c, oh, ow);
    let mut arg = vec![0u32; t * c * oh * ow];
    let mut k = 0usize;
    for ti in 0..t {
        for ci in 0..c {
            let plane = f.plane(ti, ci);
            let out_plane = out.plane_mut(ti, ci);
            for oy in 0..oh {
                for ox in 0..ow {
                    let base = (oy * 2) * w + ox * 2;
                    let cands = [base, base + 1, base + w, base + w + 1];
                    let mut best = plane[cands[0]];
                    let mut best_i = cands[0];
                    for &i in &cands[1..] {
                        if plane[i] > best {
                            best = plane[i];
                            best_i = i;
                        }
                    }
                    out_plane[oy * ow + ox] = best;
                    arg[k] = best_i as u32;
                    k += 1;
                }
            }
        }
    }
    (out, arg)
}

pub fn max_pool_2x2_backward<F: Elem>(
    d_out: &FeatureMap<F>,
    argmax: &[u32],
    d_f: &mut FeatureMap<F>,
) {
    let (t, c, oh, ow) = d_out.shape();
    let mut k = 0usize;
    for ti in 0..t {
        for ci in 0..c {
            let plane = d_f.plane_mut(ti, ci);
            let d_plane = d_out.plane(ti, ci);
            for i in 0..oh * ow {
                let src = argmax[k] as usize;
                plane[src] = plane[src] + d_plane[i];
                k += 1;
            }
        }
    }
}

/// Mean over T, H and W, leaving one value per channel.
pub fn global_avg_pool<F: Elem>(f: &FeatureMap<F>) -> Vec<F> {
    let (t, c, h, w) = f.shape();
    let inv = fl::<F>(1.0 / (t * h * w) as f64);
    let mut out = vec![F::zero(); c];
    for ti in 0..t {
        for (ci, o) in out.iter_mut().enumerate() {
            let mut sum = F::zero();
            for &v in f.plane(ti, ci) {
                sum = sum + v;
            }
            *o = *o + sum;
        }
    }
    for o in out.iter_mut() {
        *o = *o * inv;
    }
    out
}

pub fn global_avg_pool_backward<F: Elem>(d_out: &[F], d_f: &mut FeatureMap<F>) {
    let (t, c, h, w) = d_f.shape();
    debug_assert_eq!(d_out.len(), c);
    let inv = fl::<F>(1.0 / (t * h * w) as f64);
    for ti in 0..t {
        for ci in 0..c {
            let g = d_out[ci] * inv;
            for v in d_f.plane_mut(ti, ci) {
                *v = *v + g;
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn brute_spatial(f: &FeatureMap<f64>, mode: PoolMode) -> Mat<f64> {
        let (t, c, h, w) = f.shape();
        let mut out = Mat::zeros(t, c);
        for ti in 0..t {
            for ci in 0..c {
                let mut acc = match mode {
                    PoolMode::Avg => 0.0,
                    PoolMode::Max => f64::NEG_INFINITY,
                };
                for y in 0..h {
                    for x in 0..w {
                        let v = f.at(ti, ci, y, x);
                        acc = match mode {
                            PoolMode::Avg => acc + v,
                            PoolMode::Max => acc.max(v),
                        };
                    }
                }
                *out.at_mut(ti, ci) = match mode {
                    PoolMode::Avg => acc / (h * w) as f64,
                    PoolMode::Max => acc,
                };
            }
        }
        out
    }

    fn brute_channel(f: &FeatureMap<f64>, mode: PoolMode) -> Vol<f64> {
        let (t, c, h, w) = f.shape();
        let mut out = Vol::zeros(t, h, w);
        for ti in 0..t {
            for y in 0..h {
                for x in 0..w {
                    let mut acc = match mode {
                        PoolMode::Avg => 0.0,
                        PoolMode::Max => f64::NEG_INFINITY,
                    };
                    for ci in 0..c {
                        let v = f.at(ti, ci, y, x);
                        acc = match mode {
                            PoolMode::Avg => acc + v,
                            PoolMode::Max => acc.max(v),
                        };
                    }
                    *out.at_mut(ti, y, x) = match mode {
                        PoolMode::Avg => acc / c as f64,
                        PoolMode::Max => acc,
                    };
                }
            }
        }
        out
    }

    fn random_int_map(seed: u64, t: usize, c: usize, h: usize, w: usize) -> FeatureMap<f64> {
        let mut r = rng::seeded(seed);
        FeatureMap::from_fn(t, c, h, w, |_, _, _, _| {
            rng::uniform::<f64>(&mut r, -9.0, 9.0).round()
        })
    }

    #[test]
    fn constant_input_pools_to_constant() {
        let f = FeatureMap::from_fn(2, 3, 4, 4, |_, _, _, _| 7.0);
        for mode in [PoolMode::Avg, PoolMode::Max] {
            assert!(spatial_pool(&f, mode).as_slice().iter().all(|&v| v == 7.0));
            assert!(channel_pool(&f, mode).as_slice().iter().all(|&v| v == 7.0));
        }
    }

    #[test]
    fn single_nonzero_average() {
        // One 4.0 in a 2x2 spatial grid averages to 1.0 at that (t, c).
        let mut f = FeatureMap::zeros(1, 2, 2, 2);
        *f.at_mut(0, 1, 0, 1) = 4.0;
        let m = spatial_pool(&f, PoolMode::Avg);
        assert_eq!(m.at(0, 1), 1.0);
        assert_eq!(m.at(0, 0), 0.0);
    }

    #[test]
    fn channel_pool_with_single_channel_is_identity() {
        let f = random_int_map(5, 2, 1, 3, 3);
        for mode in [PoolMode::Avg, PoolMode::Max] {
            let v = channel_pool(&f, mode);
            for ti in 0..2 {
                assert_eq!(v.plane(ti), f.plane(ti, 0));
            }
        }
    }

    #[test]
    fn pools_match_brute_force_on_random_integers() {
        let f = random_int_map(17, 2, 3, 2, 2);
        let g = random_int_map(18, 2, 4, 3, 3);
        for mode in [PoolMode::Avg, PoolMode::Max] {
            assert_eq!(spatial_pool(&f, mode), brute_spatial(&f, mode));
            assert_eq!(channel_pool(&g, mode), brute_channel(&g, mode));
        }
    }

    #[test]
    fn max_tie_routes_to_first_row_major_element() {
        let f = FeatureMap::from_fn(1, 1, 2, 2, |_, _, _, _| 3.0);
        let (_, arg) = spatial_pool_cached(&f, PoolMode::Max);
        assert_eq!(arg.unwrap()[0], 0);

        let g = FeatureMap::from_fn(1, 3, 1, 1, |_, _, _, _| 1.0);
        let (_, arg) = channel_pool_cached(&g, PoolMode::Max);
        assert_eq!(arg.unwrap()[0], 0);
    }

    #[test]
    fn avg_pool_never_exceeds_max_pool() {
        for seed in 0..20 {
            let f = random_int_map(seed, 2, 3, 3, 2);
            let a = spatial_pool(&f, PoolMode::Avg);
            let m = spatial_pool(&f, PoolMode::Max);
            for (x, y) in a.as_slice().iter().zip(m.as_slice()) {
                assert!(x <= y);
            }
            let a = channel_pool(&f, PoolMode::Avg);
            let m = channel_pool(&f, PoolMode::Max);
            for (x, y) in a.as_slice().iter().zip(m.as_slice()) {
                assert!(x <= y);
            }
        }
    }

    #[test]
    fn max_pool_2x2_matches_plain_scan() {
        let f = random_int_map(3, 2, 2, 4, 6);
        let (p, _) = max_pool_2x2(&f);
        for ti in 0..2 {
            for ci in 0..2 {
                for oy in 0..2 {
                    for ox in 0..3 {
                        let mut best = f64::NEG_INFINITY;
                        for dy in 0..2 {
                            for dx in 0..2 {
                                best = best.max(f.at(ti, ci, oy * 2 + dy, ox * 2 + dx));
                            }
                        }
                        assert_eq!(p.at(ti, ci, oy, ox), best);
                    }
                }
            }
        }
    }
}
