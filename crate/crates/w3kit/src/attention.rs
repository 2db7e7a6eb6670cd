//! Factorized video attention.
//!
//! A 4-D T×C×H×W attention tensor is factorized into a channel-temporal mask
//! (T×C) and a spatial-temporal mask (T×H×W), applied sequentially:
//!
//! ```text
//! F^c = M^c ⊗ F          M^c = sigmoid(temporal_1d(frame_channel_mask(F)))
//! F'  = M^s ⊗ F^c        M^s = sigmoid(temporal_3d(frame_spatial_mask(F^c)))
//! ```
//!
//! where `⊗` broadcasts the missing axes. This shrinks the mask size from
//! T·C·H·W to T·(C + H·W). With `temporal_enabled = false` the two temporal
//! networks are bypassed and the frame-level masks are used directly (the
//! "W2" ablation).

use crate::elem::Elem;
use crate::error::{Error, Result};
use crate::nn::activations::{sigmoid, sigmoid_grad_from_output};
use crate::nn::conv::{Conv2dLayer, Conv3dLayer, TimeDepthwiseConv1d};
use crate::nn::linear::Linear;
use crate::nn::pool::{
    channel_pool_backward, channel_pool_cached, spatial_pool_backward, spatial_pool_cached,
    PoolMode,
};
use crate::params::{GradBuffer, ParamStore};
use crate::tensor::{FeatureMap, Mat, Vol};

/// Hyperparameters of one attention module instance.
#[derive(Debug, Clone)]
pub struct W3Config {
    /// Channel count of the feature map the module attends over.
    pub channels: usize,
    /// Bottleneck reduction ratio of the shared channel MLP.
    pub reduction_ratio: usize,
    /// Kernel width of the two depthwise temporal convolutions (odd).
    pub k_c_vid: usize,
    /// Kernel size of the frame-level spatial convolution (odd).
    pub spatial_kernel: usize,
    /// Kernel size of the spatial-temporal 3-D convolution (odd).
    pub temporal_kernel: usize,
    /// `false` selects the W2 ablation (temporal reasoning bypassed).
    pub temporal_enabled: bool,
}

impl W3Config {
    pub fn new(channels: usize) -> Self {
        W3Config {
            channels,
            reduction_ratio: 16,
            k_c_vid: 3,
            spatial_kernel: 7,
            temporal_kernel: 3,
            temporal_enabled: true,
        }
    }

    /// Bottleneck width of the channel MLP: `ceil(C / r)`, at least 1.
    pub fn hidden_width(&self) -> usize {
        self.channels.div_ceil(self.reduction_ratio).max(1)
    }
}

/// Channel-temporal masks: per-frame (stacked) and video-level, both T×C.
#[derive(Debug, Clone)]
pub struct ChannelMask<F> {
    pub frame_masks: Mat<F>,
    pub video_mask: Mat<F>,
}

/// Spatial-temporal masks: per-frame (stacked, the unit channel axis left
/// implicit) and video-level, both T×H×W.
#[derive(Debug, Clone)]
pub struct SpatialMask<F> {
    pub frame_masks: Vol<F>,
    pub video_mask: Vol<F>,
}

#[derive(Debug, Clone)]
pub struct W3Masks<F> {
    pub channel: ChannelMask<F>,
    pub spatial: SpatialMask<F>,
}

impl<F: Elem> W3Masks<F> {
    /// Elements in the two video-level masks: T·C + T·H·W.
    pub fn element_count(&self) -> usize {
        self.channel.video_mask.as_slice().len() + self.spatial.video_mask.as_slice().len()
    }

    pub fn all_in_open_unit_interval(&self) -> bool {
        let ok = |s: &[F]| s.iter().all(|&v| v > F::zero() && v < F::one());
        ok(self.channel.frame_masks.as_slice())
            && ok(self.channel.video_mask.as_slice())
            && ok(self.spatial.frame_masks.as_slice())
            && ok(self.spatial.video_mask.as_slice())
    }
}

/// Total mask element count of the factorized scheme, `T·(C + H·W)`, versus
/// the dense alternative `T·C·H·W`.
pub fn mask_element_count(t: usize, c: usize, h: usize, w: usize) -> usize {
    t * (c + h * w)
}

/// Forward tape for [`W3Module::backward`].
pub struct W3Cache<F> {
    d_avg_c: Mat<F>,
    d_max_c: Mat<F>,
    argmax_c: Vec<u32>,
    relu_avg: Mat<F>,
    relu_max: Mat<F>,
    mc_frm: Mat<F>,
    relu_time: Option<Mat<F>>,
    mc: Mat<F>,
    fc: FeatureMap<F>,
    argmax_s: Vec<u32>,
    stacked: FeatureMap<F>,
    ms_frm: Vol<F>,
    ms: Vol<F>,
}

/// One attention module: the shared channel MLP, the two depthwise temporal
/// convolutions, the frame spatial convolution and the 3-D temporal
/// convolution.
#[derive(Debug, Clone)]
pub struct W3Module {
    cfg: W3Config,
    c_frm_reduce: Linear,
    c_frm_expand: Linear,
    c_vid1: TimeDepthwiseConv1d,
    c_vid2: TimeDepthwiseConv1d,
    s_frm: Conv2dLayer,
    s_vid: Conv3dLayer,
}

/// Initial biases of the mask-producing layers. Masks must start close to
/// transparent: at `sigmoid(0) = 0.5` a three-block trunk is attenuated by
/// ~0.25 per block and never starts training. The frame gates sit deep in
/// saturation (0.95); the video gates stay at a point with usable sigmoid
/// slope, because the frame networks' gradients pass through them.
const FRAME_GATE_BIAS: f64 = 3.0;
const VIDEO_GATE_BIAS: f64 = 1.5;

impl W3Module {
    pub fn new<F: Elem>(store: &mut ParamStore<F>, prefix: &str, cfg: W3Config) -> Result<Self> {
        if cfg.channels == 0 {
            return Err(Error::Config(format!("{prefix}: channels must be >= 1")));
        }
        if cfg.reduction_ratio == 0 {
            return Err(Error::Config(format!("{prefix}: reduction ratio must be >= 1")));
        }
        let hidden = cfg.hidden_width();
        // First MLP layer carries no bias, the expansion layer does.
        let c_frm_reduce = Linear::new(store, &format!("{prefix}.c_frm.reduce"), cfg.channels, hidden, false);
        let c_frm_expand = Linear::new(store, &format!("{prefix}.c_frm.expand"), hidden, cfg.channels, true);
        let c_vid1 = TimeDepthwiseConv1d::new(store, &format!("{prefix}.c_vid1"), cfg.channels, cfg.k_c_vid)?;
        let c_vid2 = TimeDepthwiseConv1d::new(store, &format!("{prefix}.c_vid2"), cfg.channels, cfg.k_c_vid)?;
        let s_frm = Conv2dLayer::new(store, &format!("{prefix}.s_frm"), 2, 1, cfg.spatial_kernel)?;
        let s_vid = Conv3dLayer::new(
            store,
            &format!("{prefix}.s_vid"),
            cfg.temporal_kernel,
            cfg.temporal_kernel,
            cfg.temporal_kernel,
        )?;
        for (gate, bias) in [
            (format!("{prefix}.c_frm.expand.bias"), FRAME_GATE_BIAS),
            (format!("{prefix}.s_frm.bias"), FRAME_GATE_BIAS),
            (format!("{prefix}.c_vid2.bias"), VIDEO_GATE_BIAS),
            (format!("{prefix}.s_vid.bias"), VIDEO_GATE_BIAS),
        ] {
            let id = store.lookup(&gate).expect("bias registered above");
            let init: F = crate::elem::fl(bias);
            store.value_mut(id).fill(init);
        }
        Ok(W3Module {
            cfg,
            c_frm_reduce,
            c_frm_expand,
            c_vid1,
            c_vid2,
            s_frm,
            s_vid,
        })
    }

    pub fn config(&self) -> &W3Config {
        &self.cfg
    }

    fn check_channels<F: Elem>(&self, f: &FeatureMap<F>) -> Result<()> {
        if f.c() != self.cfg.channels {
            return Err(Error::shape(
                "W3Module",
                format!("{} channels", self.cfg.channels),
                format!("{} channels", f.c()),
            ));
        }
        Ok(())
    }

    /// Frame-level channel attention: per frame t,
    /// `sigmoid(MLP(d_avg[t]) + MLP(d_max[t]))`, shared MLP weights.
    pub fn channel_frame_attention<F: Elem>(&self, store: &ParamStore<F>, f: &FeatureMap<F>) -> Mat<F> {
        let (s, _) = self.channel_frame_attention_cached(store, f);
        s
    }

    fn channel_frame_attention_cached<F: Elem>(
        &self,
        store: &ParamStore<F>,
        f: &FeatureMap<F>,
    ) -> (Mat<F>, (Mat<F>, Mat<F>, Vec<u32>, Mat<F>, Mat<F>)) {
        let (d_avg, _) = spatial_pool_cached(f, PoolMode::Avg);
        let (d_max, argmax) = spatial_pool_cached(f, PoolMode::Max);
        let argmax = argmax.expect("max pool caches its argmax");

        let branch = |descr: &Mat<F>| {
            let mut hid = self.c_frm_reduce.forward_batch(store, descr);
            hid.as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = if *v > F::zero() { *v } else { F::zero() });
            let out = self.c_frm_expand.forward_batch(store, &hid);
            (hid, out)
        };
        let (relu_avg, out_avg) = branch(&d_avg);
        let (relu_max, out_max) = branch(&d_max);

        let mut mask = out_avg;
        for (m, &x) in mask.as_mut_slice().iter_mut().zip(out_max.as_slice()) {
            *m = sigmoid(*m + x);
        }
        (mask, (d_avg, d_max, argmax, relu_avg, relu_max))
    }

    /// Channel-temporal attention: two depthwise 1-D convolutions over the
    /// time axis with a ReLU between, wrapped in a sigmoid. Returns the input
    /// unchanged when temporal reasoning is disabled (W2).
    pub fn channel_video_attention<F: Elem>(&self, store: &ParamStore<F>, frame_masks: &Mat<F>) -> Mat<F> {
        if !self.cfg.temporal_enabled {
            return frame_masks.clone();
        }
        let (m, _) = self.channel_video_attention_cached(store, frame_masks);
        m
    }

    fn channel_video_attention_cached<F: Elem>(
        &self,
        store: &ParamStore<F>,
        frame_masks: &Mat<F>,
    ) -> (Mat<F>, Mat<F>) {
        let mut relu_time = self.c_vid1.forward(store, frame_masks);
        relu_time
            .as_mut_slice()
            .iter_mut()
            .for_each(|v| *v = if *v > F::zero() { *v } else { F::zero() });
        let mut out = self.c_vid2.forward(store, &relu_time);
        out.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v));
        (out, relu_time)
    }

    /// Frame-level spatial attention: channel-pool descriptors stacked into a
    /// 2-channel map, one 2-D convolution, sigmoid.
    pub fn spatial_frame_attention<F: Elem>(&self, store: &ParamStore<F>, f: &FeatureMap<F>) -> Vol<F> {
        let (m, _) = self.spatial_frame_attention_cached(store, f);
        m
    }

    fn spatial_frame_attention_cached<F: Elem>(
        &self,
        store: &ParamStore<F>,
        f: &FeatureMap<F>,
    ) -> (Vol<F>, (Vec<u32>, FeatureMap<F>)) {
        let (t, _, h, w) = f.shape();
        let (d_avg, _) = channel_pool_cached(f, PoolMode::Avg);
        let (d_max, argmax) = channel_pool_cached(f, PoolMode::Max);
        let argmax = argmax.expect("max pool caches its argmax");

        let mut stacked = FeatureMap::zeros(t, 2, h, w);
        for ti in 0..t {
            stacked.plane_mut(ti, 0).copy_from_slice(d_avg.plane(ti));
            stacked.plane_mut(ti, 1).copy_from_slice(d_max.plane(ti));
        }
        let z = self.s_frm.forward(store, &stacked);
        let mut mask = Vol::zeros(t, h, w);
        for ti in 0..t {
            for (m, &v) in mask.plane_mut(ti).iter_mut().zip(z.plane(ti, 0)) {
                *m = sigmoid(v);
            }
        }
        (mask, (argmax, stacked))
    }

    /// Spatial-temporal attention: one 3-D convolution over the stacked frame
    /// masks, sigmoid. Returns the (squeezed) input when temporal reasoning
    /// is disabled (W2).
    pub fn spatial_video_attention<F: Elem>(&self, store: &ParamStore<F>, frame_masks: &Vol<F>) -> Vol<F> {
        if !self.cfg.temporal_enabled {
            return frame_masks.clone();
        }
        let mut out = self.s_vid.forward(store, frame_masks);
        out.as_mut_slice().iter_mut().for_each(|v| *v = sigmoid(*v));
        out
    }

    /// Full attention pass: returns the refined feature map (same shape as
    /// the input), the masks, and the tape for [`W3Module::backward`].
    pub fn forward<F: Elem>(
        &self,
        store: &ParamStore<F>,
        f: &FeatureMap<F>,
    ) -> Result<(FeatureMap<F>, W3Masks<F>, W3Cache<F>)> {
        self.check_channels(f)?;
        let (t, c, h, w) = f.shape();

        let (mc_frm, (d_avg_c, d_max_c, argmax_c, relu_avg, relu_max)) =
            self.channel_frame_attention_cached(store, f);
        let (mc, relu_time) = if self.cfg.temporal_enabled {
            let (m, r) = self.channel_video_attention_cached(store, &mc_frm);
            (m, Some(r))
        } else {
            (mc_frm.clone(), None)
        };

        // F^c = M^c ⊗ F, broadcasting over H and W.
        let mut fc = f.clone();
        for ti in 0..t {
            for ci in 0..c {
                let m = mc.at(ti, ci);
                for v in fc.plane_mut(ti, ci) {
                    *v = *v * m;
                }
            }
        }

        let (ms_frm, (argmax_s, stacked)) = self.spatial_frame_attention_cached(store, &fc);
        let ms = if self.cfg.temporal_enabled {
            self.spatial_video_attention(store, &ms_frm)
        } else {
            ms_frm.clone()
        };

        // F' = M^s ⊗ F^c, broadcasting over C.
        let mut out = fc.clone();
        for ti in 0..t {
            let plane = ms.plane(ti).to_vec();
            for ci in 0..c {
                for (v, &m) in out.plane_mut(ti, ci).iter_mut().zip(plane.iter()) {
                    *v = *v * m;
                }
            }
        }
        debug_assert_eq!(out.shape(), (t, c, h, w));

        let masks = W3Masks {
            channel: ChannelMask {
                frame_masks: mc_frm.clone(),
                video_mask: mc.clone(),
            },
            spatial: SpatialMask {
                frame_masks: ms_frm.clone(),
                video_mask: ms.clone(),
            },
        };
        let cache = W3Cache {
            d_avg_c,
            d_max_c,
            argmax_c,
            relu_avg,
            relu_max,
            mc_frm,
            relu_time,
            mc,
            fc,
            argmax_s,
            stacked,
            ms_frm,
            ms,
        };
        Ok((out, masks, cache))
    }

    /// Convenience wrapper returning the refined map and masks only.
    pub fn apply_w3<F: Elem>(
        &self,
        store: &ParamStore<F>,
        f: &FeatureMap<F>,
    ) -> Result<(FeatureMap<F>, W3Masks<F>)> {
        let (out, masks, _) = self.forward(store, f)?;
        Ok((out, masks))
    }

    /// Backward pass. `f` is the forward input; returns its gradient and
    /// accumulates parameter gradients into `grads`.
    pub fn backward<F: Elem>(
        &self,
        store: &ParamStore<F>,
        f: &FeatureMap<F>,
        cache: &W3Cache<F>,
        d_out: &FeatureMap<F>,
        grads: &mut GradBuffer<F>,
    ) -> FeatureMap<F> {
        let (t, c, h, w) = f.shape();

        // F' = F^c ⊗ M^s.
        let mut d_ms = Vol::zeros(t, h, w);
        let mut d_fc = FeatureMap::zeros(t, c, h, w);
        for ti in 0..t {
            for ci in 0..c {
                let go = d_out.plane(ti, ci);
                let fc_p = cache.fc.plane(ti, ci);
                let ms_p = cache.ms.plane(ti).to_vec();
                {
                    let dm = d_ms.plane_mut(ti);
                    for i in 0..go.len() {
                        dm[i] = dm[i] + go[i] * fc_p[i];
                    }
                }
                let dfc = d_fc.plane_mut(ti, ci);
                for i in 0..go.len() {
                    dfc[i] = go[i] * ms_p[i];
                }
            }
        }

        // Spatial-temporal network.
        let d_ms_frm = if self.cfg.temporal_enabled {
            let mut d_z3 = d_ms;
            for (g, &m) in d_z3.as_mut_slice().iter_mut().zip(cache.ms.as_slice()) {
                *g = *g * sigmoid_grad_from_output(m);
            }
            self.s_vid.backward(store, &cache.ms_frm, &d_z3, grads)
        } else {
            d_ms
        };

        // Frame spatial attention.
        let mut d_zs = FeatureMap::zeros(t, 1, h, w);
        for ti in 0..t {
            let src = d_ms_frm.plane(ti);
            let msf = cache.ms_frm.plane(ti);
            let dst = d_zs.plane_mut(ti, 0);
            for i in 0..src.len() {
                dst[i] = src[i] * sigmoid_grad_from_output(msf[i]);
            }
        }
        let d_stacked = self.s_frm.backward(store, &cache.stacked, &d_zs, grads);
        let mut d_avg_s = Vol::zeros(t, h, w);
        let mut d_max_s = Vol::zeros(t, h, w);
        for ti in 0..t {
            d_avg_s.plane_mut(ti).copy_from_slice(d_stacked.plane(ti, 0));
            d_max_s.plane_mut(ti).copy_from_slice(d_stacked.plane(ti, 1));
        }
        channel_pool_backward(&d_avg_s, PoolMode::Avg, None, &mut d_fc);
        channel_pool_backward(&d_max_s, PoolMode::Max, Some(&cache.argmax_s), &mut d_fc);

        // F^c = F ⊗ M^c.
        let mut d_mc = Mat::zeros(t, c);
        let mut d_f = FeatureMap::zeros(t, c, h, w);
        for ti in 0..t {
            for ci in 0..c {
                let dfc = d_fc.plane(ti, ci);
                let f_p = f.plane(ti, ci);
                let m = cache.mc.at(ti, ci);
                let mut acc = F::zero();
                let df = d_f.plane_mut(ti, ci);
                for i in 0..dfc.len() {
                    acc = acc + dfc[i] * f_p[i];
                    df[i] = dfc[i] * m;
                }
                *d_mc.at_mut(ti, ci) = acc;
            }
        }

        // Channel-temporal network.
        let d_mc_frm = if self.cfg.temporal_enabled {
            let relu_time = cache.relu_time.as_ref().expect("temporal tape present");
            let mut d_u2 = d_mc;
            for (g, &m) in d_u2.as_mut_slice().iter_mut().zip(cache.mc.as_slice()) {
                *g = *g * sigmoid_grad_from_output(m);
            }
            let mut d_ru = self.c_vid2.backward(store, relu_time, &d_u2, grads);
            for (g, &r) in d_ru.as_mut_slice().iter_mut().zip(relu_time.as_slice()) {
                if r <= F::zero() {
                    *g = F::zero();
                }
            }
            self.c_vid1.backward(store, &cache.mc_frm, &d_ru, grads)
        } else {
            d_mc
        };

        // Shared channel MLP over both pooled branches.
        let mut d_s = d_mc_frm;
        for (g, &m) in d_s.as_mut_slice().iter_mut().zip(cache.mc_frm.as_slice()) {
            *g = *g * sigmoid_grad_from_output(m);
        }
        let branch = |descr: &Mat<F>, relu_out: &Mat<F>, grads: &mut GradBuffer<F>| -> Mat<F> {
            let mut d_hidden = self.c_frm_expand.backward_batch(store, relu_out, &d_s, grads);
            for (g, &r) in d_hidden.as_mut_slice().iter_mut().zip(relu_out.as_slice()) {
                if r <= F::zero() {
                    *g = F::zero();
                }
            }
            self.c_frm_reduce.backward_batch(store, descr, &d_hidden, grads)
        };
        let d_d_avg = branch(&cache.d_avg_c, &cache.relu_avg, grads);
        let d_d_max = branch(&cache.d_max_c, &cache.relu_max, grads);
        spatial_pool_backward(&d_d_avg, PoolMode::Avg, None, &mut d_f);
        spatial_pool_backward(&d_d_max, PoolMode::Max, Some(&cache.argmax_c), &mut d_f);

        d_f
    }
}

/// Broadcast-product application of externally supplied masks:
/// `out[t,c,h,w] = channel[t,c] * spatial[t,h,w] * f[t,c,h,w]`.
///
/// This is the construction hook the mask-forcing tests use; the module's own
/// masks always come from sigmoids and cannot reach exactly one.
pub fn apply_masks<F: Elem>(f: &FeatureMap<F>, channel: &Mat<F>, spatial: &Vol<F>) -> Result<FeatureMap<F>> {
    let (t, c, h, w) = f.shape();
    if channel.rows() != t || channel.cols() != c {
        return Err(Error::shape(
            "apply_masks channel",
            format!("{t}x{c}"),
            format!("{}x{}", channel.rows(), channel.cols()),
        ));
    }
    if spatial.t() != t || spatial.h() != h || spatial.w() != w {
        return Err(Error::shape(
            "apply_masks spatial",
            format!("{t}x{h}x{w}"),
            format!("{}x{}x{}", spatial.t(), spatial.h(), spatial.w()),
        ));
    }
    let mut out = f.clone();
    for ti in 0..t {
        let sp = spatial.plane(ti).to_vec();
        for ci in 0..c {
            let m = channel.at(ti, ci);
            for (v, &s) in out.plane_mut(ti, ci).iter_mut().zip(sp.iter()) {
                *v = *v * m * s;
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::pool::{channel_pool, spatial_pool};
    use crate::rng;

    fn module(seed: u64, cfg: W3Config) -> (ParamStore<f64>, W3Module) {
        let mut store = ParamStore::new(seed);
        let m = W3Module::new(&mut store, "w3", cfg).unwrap();
        (store, m)
    }

    fn random_map(seed: u64, t: usize, c: usize, h: usize, w: usize) -> FeatureMap<f64> {
        let mut r = rng::seeded(seed);
        FeatureMap::from_fn(t, c, h, w, |_, _, _, _| rng::uniform(&mut r, -1.5, 1.5))
    }

    fn zero_params(store: &mut ParamStore<f64>) {
        let names: Vec<String> = store.iter().map(|(n, _, _, _)| n.to_string()).collect();
        for n in names {
            let id = store.lookup(&n).unwrap();
            store.value_mut(id).fill(0.0);
        }
    }

    #[test]
    fn zero_network_gives_half_masks_everywhere() {
        let (mut store, m) = module(0, W3Config::new(4));
        zero_params(&mut store);
        let f = random_map(1, 2, 4, 3, 3);
        let mc_frm = m.channel_frame_attention(&store, &f);
        assert!(mc_frm.as_slice().iter().all(|&v| v == 0.5));
        let mc = m.channel_video_attention(&store, &mc_frm);
        assert!(mc.as_slice().iter().all(|&v| v == 0.5));
        let ms_frm = m.spatial_frame_attention(&store, &f);
        assert!(ms_frm.as_slice().iter().all(|&v| v == 0.5));
        let ms = m.spatial_video_attention(&store, &ms_frm);
        assert!(ms.as_slice().iter().all(|&v| v == 0.5));
    }

    #[test]
    fn constant_input_shares_attention_across_frames() {
        let (store, m) = module(3, W3Config::new(4));
        let f = FeatureMap::from_fn(3, 4, 2, 2, |_, _, _, _| 0.8);
        let mask = m.channel_frame_attention(&store, &f);
        for t in 1..3 {
            assert_eq!(mask.row(t), mask.row(0));
        }
    }

    #[test]
    fn channel_frame_attention_matches_composed_oracle() {
        let (store, m) = module(7, W3Config::new(4));
        let f = random_map(9, 2, 4, 3, 3);
        let got = m.channel_frame_attention(&store, &f);

        // Independent pipeline: pool -> mlp -> add -> sigmoid with explicit loops.
        let hidden = m.config().hidden_width();
        let w1 = store.value(store.lookup("w3.c_frm.reduce.weight").unwrap()).to_vec();
        let w2 = store.value(store.lookup("w3.c_frm.expand.weight").unwrap()).to_vec();
        let b2 = store.value(store.lookup("w3.c_frm.expand.bias").unwrap()).to_vec();
        let mlp = |d: &[f64]| -> Vec<f64> {
            let mut hid = vec![0.0; hidden];
            for (o, hv) in hid.iter_mut().enumerate() {
                *hv = (0..4).map(|i| w1[o * 4 + i] * d[i]).sum::<f64>().max(0.0);
            }
            (0..4)
                .map(|o| b2[o] + (0..hidden).map(|i| w2[o * hidden + i] * hid[i]).sum::<f64>())
                .collect()
        };
        let d_avg = spatial_pool(&f, PoolMode::Avg);
        let d_max = spatial_pool(&f, PoolMode::Max);
        for t in 0..2 {
            let a = mlp(d_avg.row(t));
            let b = mlp(d_max.row(t));
            for ci in 0..4 {
                let expect = sigmoid(a[ci] + b[ci]);
                assert!((got.at(t, ci) - expect).abs() < 1e-6);
            }
        }
    }

    #[test]
    fn w2_bypass_returns_frame_masks_unchanged() {
        let mut cfg = W3Config::new(3);
        cfg.temporal_enabled = false;
        let (store, m) = module(5, cfg);
        let frame = Mat::from_fn(4, 3, |t, c| 0.1 + 0.2 * (t + c) as f64 / 7.0);
        assert_eq!(m.channel_video_attention(&store, &frame), frame);
        let vol = Vol::from_vec(2, 2, 2, vec![0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8]).unwrap();
        assert_eq!(m.spatial_video_attention(&store, &vol), vol);
    }

    #[test]
    fn delta_kernels_reduce_temporal_net_to_pointwise_sigmoid() {
        let (mut store, m) = module(2, W3Config::new(2));
        // Layer 1: delta kernels (identity), layer 2: delta kernels, zero biases.
        for name in ["w3.c_vid1.weight", "w3.c_vid2.weight"] {
            let id = store.lookup(name).unwrap();
            store.value_mut(id).copy_from_slice(&[0.0, 1.0, 0.0, 0.0, 1.0, 0.0]);
        }
        for name in ["w3.c_vid1.bias", "w3.c_vid2.bias"] {
            let id = store.lookup(name).unwrap();
            store.value_mut(id).fill(0.0);
        }
        let frame = Mat::from_fn(4, 2, |t, c| 0.05 + 0.11 * (t * 2 + c) as f64);
        let out = m.channel_video_attention(&store, &frame);
        for t in 0..4 {
            for c in 0..2 {
                assert!((out.at(t, c) - sigmoid(frame.at(t, c))).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn spatial_frame_attention_single_channel_delta_sum_kernel() {
        // With C = 1 the avg and max maps both equal the input slice; a kernel
        // that sums both stacked channels at the center yields sigmoid(2F).
        let mut cfg = W3Config::new(1);
        cfg.spatial_kernel = 3;
        let (mut store, m) = module(0, cfg);
        {
            let id = store.lookup("w3.s_frm.weight").unwrap();
            let w = store.value_mut(id);
            w.fill(0.0);
            w[4] = 1.0; // center of the first input channel
            w[13] = 1.0; // center of the second input channel
        }
        store.value_mut(store.lookup("w3.s_frm.bias").unwrap()).fill(0.0);
        let f = random_map(4, 2, 1, 4, 4);
        let mask = m.spatial_frame_attention(&store, &f);
        for t in 0..2 {
            for y in 0..4 {
                for x in 0..4 {
                    let expect = sigmoid(2.0 * f.at(t, 0, y, x));
                    assert!((mask.at(t, y, x) - expect).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn spatial_video_attention_delta_kernel_is_pointwise_sigmoid() {
        let (mut store, m) = module(8, W3Config::new(2));
        {
            let id = store.lookup("w3.s_vid.weight").unwrap();
            let w = store.value_mut(id);
            w.fill(0.0);
            w[13] = 1.0; // center of the 3x3x3 kernel
        }
        store.value_mut(store.lookup("w3.s_vid.bias").unwrap()).fill(0.0);
        let mut r = rng::seeded(4);
        let frame = Vol::from_vec(3, 4, 4, (0..48).map(|_| rng::uniform(&mut r, 0.0, 1.0)).collect())
            .unwrap();
        let out = m.spatial_video_attention(&store, &frame);
        for (o, &i) in out.as_slice().iter().zip(frame.as_slice()) {
            assert!((o - sigmoid(i)).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_input_stays_zero() {
        let (store, m) = module(13, W3Config::new(3));
        let f = FeatureMap::zeros(2, 3, 4, 4);
        let (out, _) = m.apply_w3(&store, &f).unwrap();
        assert!(out.as_slice().iter().all(|&v| v == 0.0));
    }

    #[test]
    fn forced_unit_masks_reproduce_the_input() {
        let f = random_map(21, 2, 3, 2, 2);
        let ones_c = Mat::from_fn(2, 3, |_, _| 1.0);
        let ones_s = Vol::from_vec(2, 2, 2, vec![1.0; 8]).unwrap();
        let out = apply_masks(&f, &ones_c, &ones_s).unwrap();
        assert_eq!(out, f);
    }

    #[test]
    fn output_is_broadcast_product_of_masks_and_input() {
        let (store, m) = module(30, W3Config::new(3));
        let f = random_map(31, 2, 3, 2, 2);
        let (out, masks) = m.apply_w3(&store, &f).unwrap();
        for t in 0..2 {
            for c in 0..3 {
                for y in 0..2 {
                    for x in 0..2 {
                        let expect = masks.channel.video_mask.at(t, c)
                            * masks.spatial.video_mask.at(t, y, x)
                            * f.at(t, c, y, x);
                        assert!((out.at(t, c, y, x) - expect).abs() < 1e-12);
                    }
                }
            }
        }
    }

    #[test]
    fn masks_are_in_open_unit_interval_and_attenuate() {
        for seed in 0..5 {
            let (store, m) = module(seed, W3Config::new(4));
            let f = random_map(100 + seed, 3, 4, 3, 3);
            let (out, masks) = m.apply_w3(&store, &f).unwrap();
            assert!(masks.all_in_open_unit_interval());
            assert_eq!(out.shape(), f.shape());
            for (o, i) in out.as_slice().iter().zip(f.as_slice()) {
                if *i == 0.0 {
                    assert_eq!(*o, 0.0);
                } else {
                    assert!(o.abs() < i.abs());
                }
            }
        }
    }

    #[test]
    fn frame_permutation_permutes_frame_masks() {
        let (store, m) = module(40, W3Config::new(3));
        let f = random_map(41, 4, 3, 3, 3);
        let perm = [2usize, 0, 3, 1];
        let g = f.permute_frames(&perm).unwrap();

        let mc_f = m.channel_frame_attention(&store, &f);
        let mc_g = m.channel_frame_attention(&store, &g);
        for (dst, &src) in perm.iter().enumerate() {
            assert_eq!(mc_g.row(dst), mc_f.row(src));
        }

        let ms_f = m.spatial_frame_attention(&store, &f);
        let ms_g = m.spatial_frame_attention(&store, &g);
        for (dst, &src) in perm.iter().enumerate() {
            assert_eq!(ms_g.plane(dst), ms_f.plane(src));
        }
    }

    #[test]
    fn w2_output_equals_frame_level_masks_only() {
        let mut cfg = W3Config::new(3);
        cfg.temporal_enabled = false;
        let (store, m) = module(50, cfg);
        let f = random_map(51, 3, 3, 4, 4);
        let (out, masks) = m.apply_w3(&store, &f).unwrap();
        assert_eq!(masks.channel.video_mask, masks.channel.frame_masks);
        assert_eq!(masks.spatial.video_mask, masks.spatial.frame_masks);
        let expect = apply_masks(&f, &masks.channel.frame_masks, &masks.spatial.frame_masks).unwrap();
        assert_eq!(out, expect);
    }

    #[test]
    fn factorized_mask_count() {
        assert_eq!(mask_element_count(8, 64, 7, 7), 904);
        assert_eq!(8 * 64 * 7 * 7, 25088);
        let (store, m) = module(60, W3Config::new(64));
        let f = random_map(61, 8, 64, 7, 7);
        let (_, masks) = m.apply_w3(&store, &f).unwrap();
        assert_eq!(masks.element_count(), 904);
    }

    #[test]
    fn spatial_attention_reads_the_channel_scaled_map() {
        // M^s must be computed from F^c, not from F: check against an
        // independent recomposition.
        let (store, m) = module(70, W3Config::new(3));
        let f = random_map(71, 2, 3, 3, 3);
        let (_, masks) = m.apply_w3(&store, &f).unwrap();
        let mc = &masks.channel.video_mask;
        let mut fc = f.clone();
        for t in 0..2 {
            for c in 0..3 {
                let mval = mc.at(t, c);
                for v in fc.plane_mut(t, c) {
                    *v *= mval;
                }
            }
        }
        let ms_frm = m.spatial_frame_attention(&store, &fc);
        assert_eq!(ms_frm, masks.spatial.frame_masks);
        let _ = channel_pool(&fc, PoolMode::Avg);
    }
}
