//! Convolutions with "same" zero padding and cross-correlation semantics
//! (no kernel flip). Kernels must be odd-sized along every convolved axis.
//!
//! The free functions are the single-channel 1D/2D/3D primitives; the layer
//! structs add channels, biases and parameter-store wiring for the models.

use crate::elem::Elem;
use crate::error::{Error, Result};
use crate::params::{GradBuffer, Init, ParamId, ParamStore};
use crate::tensor::{FeatureMap, Mat, Vol};

fn require_odd(k: usize, context: &str) -> Result<()> {
    if k == 0 || k % 2 == 0 {
        return Err(Error::Config(format!(
            "{context}: kernel size {k} must be odd and positive"
        )));
    }
    Ok(())
}

#[inline]
fn axpy<F: Elem>(dst: &mut [F], src: &[F], a: F) {
    for (d, s) in dst.iter_mut().zip(src.iter()) {
        *d = *d + a * *s;
    }
}

#[inline]
fn dot<F: Elem>(a: &[F], b: &[F]) -> F {
    let mut acc = F::zero();
    for (x, y) in a.iter().zip(b.iter()) {
        acc = acc + *x * *y;
    }
    acc
}

/// Output range along one axis for a kernel offset `d = tap - pad`:
/// output index `i` reads input `i + d`, so `i` spans `[max(0,-d), len - max(0,d))`.
#[inline]
fn valid_range(len: usize, d: isize) -> (usize, usize) {
    let lo = if d < 0 { (-d) as usize } else { 0 };
    let hi = len.saturating_sub(if d > 0 { d as usize } else { 0 });
    (lo, hi.max(lo))
}

/// 1-D same-padding cross-correlation.
pub fn conv1d_same<F: Elem>(x: &[F], kernel: &[F]) -> Result<Vec<F>> {
    require_odd(kernel.len(), "conv1d_same")?;
    let n = x.len();
    let pad = kernel.len() / 2;
    let mut out = vec![F::zero(); n];
    for (tap, &kv) in kernel.iter().enumerate() {
        let d = tap as isize - pad as isize;
        let (lo, hi) = valid_range(n, d);
        let src = &x[(lo as isize + d) as usize..(hi as isize + d) as usize];
        axpy(&mut out[lo..hi], src, kv);
    }
    Ok(out)
}

/// Gradients of [`conv1d_same`] w.r.t. input and kernel.
pub fn conv1d_same_backward<F: Elem>(x: &[F], kernel: &[F], d_out: &[F]) -> (Vec<F>, Vec<F>) {
    let n = x.len();
    let pad = kernel.len() / 2;
    let mut d_x = vec![F::zero(); n];
    let mut d_k = vec![F::zero(); kernel.len()];
    for (tap, &kv) in kernel.iter().enumerate() {
        let d = tap as isize - pad as isize;
        let (lo, hi) = valid_range(n, d);
        let (slo, shi) = ((lo as isize + d) as usize, (hi as isize + d) as usize);
        axpy(&mut d_x[slo..shi], &d_out[lo..hi], kv);
        d_k[tap] = d_k[tap] + dot(&d_out[lo..hi], &x[slo..shi]);
    }
    (d_x, d_k)
}

/// 2-D same-padding cross-correlation over an H×W grid.
pub fn conv2d_same<F: Elem>(x: &Mat<F>, kernel: &Mat<F>) -> Result<Mat<F>> {
    require_odd(kernel.rows(), "conv2d_same rows")?;
    require_odd(kernel.cols(), "conv2d_same cols")?;
    let (h, w) = (x.rows(), x.cols());
    let mut out = Mat::zeros(h, w);
    conv2d_accumulate(
        x.as_slice(),
        h,
        w,
        kernel.as_slice(),
        kernel.rows(),
        kernel.cols(),
        out.as_mut_slice(),
    );
    Ok(out)
}

/// Accumulate one same-padding 2-D correlation into `out` (flat H×W planes).
fn conv2d_accumulate<F: Elem>(
    x: &[F],
    h: usize,
    w: usize,
    kernel: &[F],
    kh: usize,
    kw: usize,
    out: &mut [F],
) {
    let (py, px) = (kh / 2, kw / 2);
    for ky in 0..kh {
        let dy = ky as isize - py as isize;
        let (ylo, yhi) = valid_range(h, dy);
        for kx in 0..kw {
            let kv = kernel[ky * kw + kx];
            if kv == F::zero() {
                continue;
            }
            let dx = kx as isize - px as isize;
            let (xlo, xhi) = valid_range(w, dx);
            if xhi <= xlo {
                continue;
            }
            for y in ylo..yhi {
                let sy = (y as isize + dy) as usize;
                let src = &x[sy * w + (xlo as isize + dx) as usize..sy * w + (xhi as isize + dx) as usize];
                axpy(&mut out[y * w + xlo..y * w + xhi], src, kv);
            }
        }
    }
}

/// Scatter `d_out` back to the input of a same-padding 2-D correlation.
fn conv2d_backward_input_accumulate<F: Elem>(
    d_out: &[F],
    h: usize,
    w: usize,
    kernel: &[F],
    kh: usize,
    kw: usize,
    d_x: &mut [F],
) {
    let (py, px) = (kh / 2, kw / 2);
    for ky in 0..kh {
        let dy = ky as isize - py as isize;
        let (ylo, yhi) = valid_range(h, dy);
        for kx in 0..kw {
            let kv = kernel[ky * kw + kx];
            if kv == F::zero() {
                continue;
            }
            let dx = kx as isize - px as isize;
            let (xlo, xhi) = valid_range(w, dx);
            if xhi <= xlo {
                continue;
            }
            for y in ylo..yhi {
                let sy = (y as isize + dy) as usize;
                let dst =
                    &mut d_x[sy * w + (xlo as isize + dx) as usize..sy * w + (xhi as isize + dx) as usize];
                axpy(dst, &d_out[y * w + xlo..y * w + xhi], kv);
            }
        }
    }
}

/// Kernel gradient of a same-padding 2-D correlation.
fn conv2d_backward_kernel_accumulate<F: Elem>(
    x: &[F],
    h: usize,
    w: usize,
    d_out: &[F],
    kh: usize,
    kw: usize,
    d_kernel: &mut [F],
) {
    let (py, px) = (kh / 2, kw / 2);
    for ky in 0..kh {
        let dy = ky as isize - py as isize;
        let (ylo, yhi) = valid_range(h, dy);
        for kx in 0..kw {
            let dx = kx as isize - px as isize;
            let (xlo, xhi) = valid_range(w, dx);
            if xhi <= xlo {
                continue;
            }
            let mut acc = F::zero();
            for y in ylo..yhi {
                let sy = (y as isize + dy) as usize;
                let src = &x[sy * w + (xlo as isize + dx) as usize..sy * w + (xhi as isize + dx) as usize];
                acc = acc + dot(&d_out[y * w + xlo..y * w + xhi], src);
            }
            d_kernel[ky * kw + kx] = d_kernel[ky * kw + kx] + acc;
        }
    }
}

/// Gradients of [`conv2d_same`] w.r.t. input and kernel.
pub fn conv2d_same_backward<F: Elem>(
    x: &Mat<F>,
    kernel: &Mat<F>,
    d_out: &Mat<F>,
) -> (Mat<F>, Mat<F>) {
    let (h, w) = (x.rows(), x.cols());
    let (kh, kw) = (kernel.rows(), kernel.cols());
    let mut d_x = Mat::zeros(h, w);
    let mut d_k = Mat::zeros(kh, kw);
    conv2d_backward_input_accumulate(d_out.as_slice(), h, w, kernel.as_slice(), kh, kw, d_x.as_mut_slice());
    conv2d_backward_kernel_accumulate(x.as_slice(), h, w, d_out.as_slice(), kh, kw, d_k.as_mut_slice());
    (d_x, d_k)
}

/// 3-D same-padding cross-correlation over a T×H×W volume.
pub fn conv3d_same<F: Elem>(x: &Vol<F>, kernel: &Vol<F>) -> Result<Vol<F>> {
    require_odd(kernel.t(), "conv3d_same t")?;
    require_odd(kernel.h(), "conv3d_same h")?;
    require_odd(kernel.w(), "conv3d_same w")?;
    let (t, h, w) = (x.t(), x.h(), x.w());
    let pt = kernel.t() / 2;
    let mut out = Vol::zeros(t, h, w);
    for kt in 0..kernel.t() {
        let dt = kt as isize - pt as isize;
        let (tlo, thi) = valid_range(t, dt);
        for ti in tlo..thi {
            let src_t = (ti as isize + dt) as usize;
            let k2 = kernel.plane(kt);
            // Reborrow the output plane each frame; kernel plane is H_k×W_k.
            let (src_plane, out_plane) = (x.plane(src_t).to_vec(), out.plane_mut(ti));
            conv2d_accumulate(&src_plane, h, w, k2, kernel.h(), kernel.w(), out_plane);
        }
    }
    Ok(out)
}

/// Gradients of [`conv3d_same`] w.r.t. input and kernel.
pub fn conv3d_same_backward<F: Elem>(
    x: &Vol<F>,
    kernel: &Vol<F>,
    d_out: &Vol<F>,
) -> (Vol<F>, Vol<F>) {
    let (t, h, w) = (x.t(), x.h(), x.w());
    let pt = kernel.t() / 2;
    let mut d_x = Vol::zeros(t, h, w);
    let mut d_k = Vol::zeros(kernel.t(), kernel.h(), kernel.w());
    for kt in 0..kernel.t() {
        let dt = kt as isize - pt as isize;
        let (tlo, thi) = valid_range(t, dt);
        for ti in tlo..thi {
            let src_t = (ti as isize + dt) as usize;
            let d_plane = d_out.plane(ti).to_vec();
            conv2d_backward_input_accumulate(
                &d_plane,
                h,
                w,
                kernel.plane(kt),
                kernel.h(),
                kernel.w(),
                d_x.plane_mut(src_t),
            );
            conv2d_backward_kernel_accumulate(
                x.plane(src_t),
                h,
                w,
                &d_plane,
                kernel.h(),
                kernel.w(),
                d_k.plane_mut(kt),
            );
        }
    }
    (d_x, d_k)
}

/// Per-frame 2-D convolution layer: `in_ch` → `out_ch` channels with a square
/// odd kernel, same padding and per-output-channel bias. Weight layout is
/// `[out_ch, in_ch, k, k]`.
#[derive(Debug, Clone)]
pub struct Conv2dLayer {
    pub in_ch: usize,
    pub out_ch: usize,
    pub k: usize,
    weight: ParamId,
    bias: ParamId,
}

impl Conv2dLayer {
    pub fn new<F: Elem>(
        store: &mut ParamStore<F>,
        prefix: &str,
        in_ch: usize,
        out_ch: usize,
        k: usize,
    ) -> Result<Self> {
        require_odd(k, prefix)?;
        let weight = store.register(
            &format!("{prefix}.weight"),
            &[out_ch, in_ch, k, k],
            Init::KaimingUniform { fan_in: in_ch * k * k },
        );
        let bias = store.register(&format!("{prefix}.bias"), &[out_ch], Init::Zeros);
        Ok(Conv2dLayer {
            in_ch,
            out_ch,
            k,
            weight,
            bias,
        })
    }

    pub fn forward<F: Elem>(&self, store: &ParamStore<F>, x: &FeatureMap<F>) -> FeatureMap<F> {
        let (t, c, h, w) = x.shape();
        debug_assert_eq!(c, self.in_ch);
        let weight = store.value(self.weight);
        let bias = store.value(self.bias);
        let ksq = self.k * self.k;
        let mut out = FeatureMap::zeros(t, self.out_ch, h, w);
        for ti in 0..t {
            for co in 0..self.out_ch {
                let b = bias[co];
                let out_plane = out.plane_mut(ti, co);
                for v in out_plane.iter_mut() {
                    *v = b;
                }
                for ci in 0..self.in_ch {
                    let kern = &weight[(co * self.in_ch + ci) * ksq..(co * self.in_ch + ci + 1) * ksq];
                    conv2d_accumulate(x.plane(ti, ci), h, w, kern, self.k, self.k, out_plane);
                }
            }
        }
        out
    }

    /// Backward pass; returns the input gradient and accumulates parameter
    /// gradients into `grads`.
    pub fn backward<F: Elem>(
        &self,
        store: &ParamStore<F>,
        x: &FeatureMap<F>,
        d_out: &FeatureMap<F>,
        grads: &mut GradBuffer<F>,
    ) -> FeatureMap<F> {
        let (t, _, h, w) = x.shape();
        let weight = store.value(self.weight);
        let ksq = self.k * self.k;
        let mut d_x = FeatureMap::zeros(t, self.in_ch, h, w);
        for ti in 0..t {
            for co in 0..self.out_ch {
                let d_plane = d_out.plane(ti, co);
                let mut bias_acc = F::zero();
                for &g in d_plane {
                    bias_acc = bias_acc + g;
                }
                grads.grad_mut(self.bias)[co] = grads.grad_mut(self.bias)[co] + bias_acc;
                for ci in 0..self.in_ch {
                    let base = (co * self.in_ch + ci) * ksq;
                    let kern = &weight[base..base + ksq];
                    conv2d_backward_input_accumulate(
                        d_plane,
                        h,
                        w,
                        kern,
                        self.k,
                        self.k,
                        d_x.plane_mut(ti, ci),
                    );
                }
            }
        }
        // Weight gradients in a second sweep so the borrow of `grads` is clean.
        let d_weight = grads.grad_mut(self.weight);
        for ti in 0..t {
            for co in 0..self.out_ch {
                let d_plane = d_out.plane(ti, co);
                for ci in 0..self.in_ch {
                    let base = (co * self.in_ch + ci) * ksq;
                    conv2d_backward_kernel_accumulate(
                        x.plane(ti, ci),
                        h,
                        w,
                        d_plane,
                        self.k,
                        self.k,
                        &mut d_weight[base..base + ksq],
                    );
                }
            }
        }
        d_x
    }
}

/// Depthwise 1-D convolution over the time axis of a T×C mask: each channel's
/// length-T series is convolved with its own kernel (layout `[C, K]`) plus a
/// per-channel bias.
#[derive(Debug, Clone)]
pub struct TimeDepthwiseConv1d {
    pub channels: usize,
    pub k: usize,
    weight: ParamId,
    bias: ParamId,
}

impl TimeDepthwiseConv1d {
    pub fn new<F: Elem>(
        store: &mut ParamStore<F>,
        prefix: &str,
        channels: usize,
        k: usize,
    ) -> Result<Self> {
        require_odd(k, prefix)?;
        let weight = store.register(
            &format!("{prefix}.weight"),
            &[channels, k],
            Init::KaimingUniform { fan_in: k },
        );
        let bias = store.register(&format!("{prefix}.bias"), &[channels], Init::Zeros);
        Ok(TimeDepthwiseConv1d {
            channels,
            k,
            weight,
            bias,
        })
    }

    pub fn forward<F: Elem>(&self, store: &ParamStore<F>, x: &Mat<F>) -> Mat<F> {
        let (t, c) = (x.rows(), x.cols());
        debug_assert_eq!(c, self.channels);
        let weight = store.value(self.weight);
        let bias = store.value(self.bias);
        let pad = self.k / 2;
        let mut out = Mat::zeros(t, c);
        for ci in 0..c {
            let kern = &weight[ci * self.k..(ci + 1) * self.k];
            for ti in 0..t {
                let mut acc = bias[ci];
                for (tap, &kv) in kern.iter().enumerate() {
                    let src = ti as isize + tap as isize - pad as isize;
                    if src >= 0 && (src as usize) < t {
                        acc = acc + kv * x.at(src as usize, ci);
                    }
                }
                *out.at_mut(ti, ci) = acc;
            }
        }
        out
    }

    pub fn backward<F: Elem>(
        &self,
        store: &ParamStore<F>,
        x: &Mat<F>,
        d_out: &Mat<F>,
        grads: &mut GradBuffer<F>,
    ) -> Mat<F> {
        let (t, c) = (x.rows(), x.cols());
        let weight = store.value(self.weight);
        let pad = self.k / 2;
        let mut d_x = Mat::zeros(t, c);
        {
            let d_bias = grads.grad_mut(self.bias);
            for ti in 0..t {
                for ci in 0..c {
                    d_bias[ci] = d_bias[ci] + d_out.at(ti, ci);
                }
            }
        }
        let d_weight = grads.grad_mut(self.weight);
        for ci in 0..c {
            let kern = &weight[ci * self.k..(ci + 1) * self.k];
            for ti in 0..t {
                let g = d_out.at(ti, ci);
                for (tap, &kv) in kern.iter().enumerate() {
                    let src = ti as isize + tap as isize - pad as isize;
                    if src >= 0 && (src as usize) < t {
                        *d_x.at_mut(src as usize, ci) = d_x.at(src as usize, ci) + kv * g;
                        d_weight[ci * self.k + tap] =
                            d_weight[ci * self.k + tap] + g * x.at(src as usize, ci);
                    }
                }
            }
        }
        d_x
    }
}

/// Single-channel 3-D convolution over a T×H×W volume with scalar bias.
#[derive(Debug, Clone)]
pub struct Conv3dLayer {
    pub kt: usize,
    pub kh: usize,
    pub kw: usize,
    weight: ParamId,
    bias: ParamId,
}

impl Conv3dLayer {
    pub fn new<F: Elem>(
        store: &mut ParamStore<F>,
        prefix: &str,
        kt: usize,
        kh: usize,
        kw: usize,
    ) -> Result<Self> {
        require_odd(kt, prefix)?;
        require_odd(kh, prefix)?;
        require_odd(kw, prefix)?;
        let weight = store.register(
            &format!("{prefix}.weight"),
            &[kt, kh, kw],
            Init::KaimingUniform { fan_in: kt * kh * kw },
        );
        let bias = store.register(&format!("{prefix}.bias"), &[1], Init::Zeros);
        Ok(Conv3dLayer { kt, kh, kw, weight, bias })
    }

    fn kernel<F: Elem>(&self, store: &ParamStore<F>) -> Vol<F> {
        Vol::from_vec(self.kt, self.kh, self.kw, store.value(self.weight).to_vec())
            .expect("kernel shape is fixed at registration")
    }

    pub fn forward<F: Elem>(&self, store: &ParamStore<F>, x: &Vol<F>) -> Vol<F> {
        let mut out = conv3d_same(x, &self.kernel(store)).expect("odd kernel enforced at build");
        let b = store.value(self.bias)[0];
        for v in out.as_mut_slice() {
            *v = *v + b;
        }
        out
    }

    pub fn backward<F: Elem>(
        &self,
        store: &ParamStore<F>,
        x: &Vol<F>,
        d_out: &Vol<F>,
        grads: &mut GradBuffer<F>,
    ) -> Vol<F> {
        let (d_x, d_k) = conv3d_same_backward(x, &self.kernel(store), d_out);
        let mut bias_acc = F::zero();
        for &g in d_out.as_slice() {
            bias_acc = bias_acc + g;
        }
        grads.grad_mut(self.bias)[0] = grads.grad_mut(self.bias)[0] + bias_acc;
        let d_weight = grads.grad_mut(self.weight);
        for (w, &g) in d_weight.iter_mut().zip(d_k.as_slice()) {
            *w = *w + g;
        }
        d_x
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    #[test]
    fn even_kernel_is_a_configuration_error() {
        assert!(conv1d_same(&[1.0f64, 2.0], &[1.0, 1.0]).is_err());
        let x = Mat::<f64>::zeros(3, 3);
        let k = Mat::<f64>::zeros(2, 3);
        assert!(conv2d_same(&x, &k).is_err());
    }

    #[test]
    fn centered_delta_kernel_is_identity() {
        let x: Vec<f64> = vec![0.5, -1.0, 2.0, 3.5];
        assert_eq!(conv1d_same(&x, &[0.0, 1.0, 0.0]).unwrap(), x);

        let xm = Mat::from_fn(3, 4, |r, c| (r * 4 + c) as f64);
        let mut k = Mat::zeros(3, 3);
        *k.at_mut(1, 1) = 1.0;
        assert_eq!(conv2d_same(&xm, &k).unwrap(), xm);

        let xv = Vol::from_vec(2, 2, 2, (0..8).map(|i| i as f64).collect()).unwrap();
        let mut kv = Vol::zeros(3, 3, 3);
        *kv.at_mut(1, 1, 1) = 1.0;
        assert_eq!(conv3d_same(&xv, &kv).unwrap(), xv);
    }

    #[test]
    fn conv1d_hand_example() {
        // [1,2,3] * [1,1,1] with zero same padding -> [3,6,5]
        let out = conv1d_same(&[1.0f64, 2.0, 3.0], &[1.0, 1.0, 1.0]).unwrap();
        assert_eq!(out, vec![3.0, 6.0, 5.0]);
    }

    fn brute_conv3d(x: &Vol<f64>, k: &Vol<f64>) -> Vol<f64> {
        let (t, h, w) = (x.t(), x.h(), x.w());
        let (pt, ph, pw) = (k.t() as isize / 2, k.h() as isize / 2, k.w() as isize / 2);
        let mut out = Vol::zeros(t, h, w);
        for ti in 0..t as isize {
            for y in 0..h as isize {
                for xx in 0..w as isize {
                    let mut acc = 0.0;
                    for kt in 0..k.t() as isize {
                        for ky in 0..k.h() as isize {
                            for kx in 0..k.w() as isize {
                                let (st, sy, sx) = (ti + kt - pt, y + ky - ph, xx + kx - pw);
                                if st >= 0
                                    && st < t as isize
                                    && sy >= 0
                                    && sy < h as isize
                                    && sx >= 0
                                    && sx < w as isize
                                {
                                    acc += k.at(kt as usize, ky as usize, kx as usize)
                                        * x.at(st as usize, sy as usize, sx as usize);
                                }
                            }
                        }
                    }
                    *out.at_mut(ti as usize, y as usize, xx as usize) = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv3d_matches_brute_force_on_random_input() {
        let mut r = rng::seeded(42);
        let x = Vol::from_vec(3, 4, 4, (0..48).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect())
            .unwrap();
        let k = Vol::from_vec(3, 3, 3, (0..27).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect())
            .unwrap();
        let fast = conv3d_same(&x, &k).unwrap();
        let brute = brute_conv3d(&x, &k);
        for (a, b) in fast.as_slice().iter().zip(brute.as_slice()) {
            assert!((a - b).abs() <= 1e-6 * (1.0 + b.abs()));
        }
    }

    #[test]
    fn conv2d_layer_matches_per_position_brute_force() {
        let mut store: ParamStore<f64> = ParamStore::new(9);
        let layer = Conv2dLayer::new(&mut store, "conv", 2, 3, 3).unwrap();
        let mut r = rng::seeded(10);
        let x = FeatureMap::from_fn(2, 2, 4, 5, |_, _, _, _| rng::uniform(&mut r, -1.0, 1.0));
        let out = layer.forward(&store, &x);

        let weight = store.value(store.lookup("conv.weight").unwrap()).to_vec();
        let bias = store.value(store.lookup("conv.bias").unwrap()).to_vec();
        for ti in 0..2 {
            for co in 0..3 {
                for y in 0..4isize {
                    for xx in 0..5isize {
                        let mut acc = bias[co];
                        for ci in 0..2 {
                            for ky in 0..3isize {
                                for kx in 0..3isize {
                                    let (sy, sx) = (y + ky - 1, xx + kx - 1);
                                    if sy >= 0 && sy < 4 && sx >= 0 && sx < 5 {
                                        acc += weight[((co * 2 + ci) * 3 + ky as usize) * 3
                                            + kx as usize]
                                            * x.at(ti, ci, sy as usize, sx as usize);
                                    }
                                }
                            }
                        }
                        let got = out.at(ti, co, y as usize, xx as usize);
                        assert!((got - acc).abs() < 1e-12, "({ti},{co},{y},{xx})");
                    }
                }
            }
        }
    }

    #[test]
    fn depthwise_time_conv_keeps_channels_independent() {
        let mut store: ParamStore<f64> = ParamStore::new(1);
        let layer = TimeDepthwiseConv1d::new(&mut store, "tc", 2, 3).unwrap();
        // Kernel for channel 0 := delta, channel 1 := zeros.
        {
            let w = store.value_mut(store.lookup("tc.weight").unwrap());
            w.copy_from_slice(&[0.0, 1.0, 0.0, 0.0, 0.0, 0.0]);
        }
        let x = Mat::from_fn(4, 2, |t, c| (t * 10 + c) as f64);
        let y = layer.forward(&store, &x);
        for t in 0..4 {
            assert_eq!(y.at(t, 0), x.at(t, 0));
            assert_eq!(y.at(t, 1), 0.0);
        }
    }
}
