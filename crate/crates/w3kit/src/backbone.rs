//! Small temporal-shift video backbone: three convolution blocks, each
//! preceded by a temporal shift and followed by 2×2 max pooling, with an
//! optional attention module after every block, global average pooling and
//! two linear classifier heads sharing the trunk.

use serde::{Deserialize, Serialize};

use crate::attention::{W3Cache, W3Config, W3Module};
use crate::elem::Elem;
use crate::error::{Error, Result};
use crate::nn::linear::Linear;
use crate::nn::pool::{global_avg_pool, global_avg_pool_backward, max_pool_2x2, max_pool_2x2_backward};
use crate::nn::conv::Conv2dLayer;
use crate::nn::shift::{temporal_shift, temporal_shift_backward};
use crate::params::{GradBuffer, ParamStore};
use crate::tensor::FeatureMap;

/// Which attention variant (if any) sits after each block.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AttentionVariant {
    None,
    W2,
    W3,
}

impl AttentionVariant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(AttentionVariant::None),
            "w2" => Ok(AttentionVariant::W2),
            "w3" => Ok(AttentionVariant::W3),
            other => Err(Error::Config(format!(
                "unknown attention variant {other:?} (expected none|w2|w3)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            AttentionVariant::None => "none",
            AttentionVariant::W2 => "w2",
            AttentionVariant::W3 => "w3",
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackboneConfig {
    pub verbs: usize,
    pub nouns: usize,
    pub in_channels: usize,
    pub block_channels: Vec<usize>,
    pub kernel: usize,
    pub shift_fraction: f64,
    pub attention: AttentionVariant,
    pub reduction_ratio: usize,
    pub k_c_vid: usize,
    pub spatial_kernel: usize,
    /// Subtracted from every input value at the stem; pixel data in [0, 1]
    /// trains poorly uncentered.
    pub input_offset: f64,
}

impl BackboneConfig {
    pub fn toy(verbs: usize, nouns: usize, attention: AttentionVariant) -> Self {
        BackboneConfig {
            verbs,
            nouns,
            in_channels: 3,
            block_channels: vec![8, 16, 32],
            kernel: 3,
            shift_fraction: 0.5,
            attention,
            reduction_ratio: 4,
            k_c_vid: 3,
            spatial_kernel: 7,
            input_offset: 0.5,
        }
    }
}

#[derive(Debug, Clone)]
struct Block {
    conv: Conv2dLayer,
    attention: Option<W3Module>,
}

/// The trunk plus verb/noun heads. Parameters live in the [`ParamStore`]
/// the backbone was built against.
#[derive(Debug, Clone)]
pub struct ToyBackbone {
    cfg: BackboneConfig,
    blocks: Vec<Block>,
    verb_head: Linear,
    noun_head: Linear,
}

/// Per-block forward tape.
struct BlockTape<F> {
    shifted: FeatureMap<F>,
    relu_out: FeatureMap<F>,
    pool_argmax: Vec<u32>,
    pooled: FeatureMap<F>,
    w3: Option<W3Cache<F>>,
    output: FeatureMap<F>,
}

/// Whole-network forward tape for [`ToyBackbone::backward`].
pub struct BackboneCache<F> {
    blocks: Vec<BlockTape<F>>,
    features: Vec<F>,
}

impl ToyBackbone {
    pub fn new<F: Elem>(store: &mut ParamStore<F>, cfg: BackboneConfig) -> Result<Self> {
        if cfg.block_channels.is_empty() {
            return Err(Error::Config("backbone needs at least one block".into()));
        }
        let mut blocks = Vec::with_capacity(cfg.block_channels.len());
        let mut in_ch = cfg.in_channels;
        for (i, &out_ch) in cfg.block_channels.iter().enumerate() {
            let conv = Conv2dLayer::new(store, &format!("backbone.block{i}.conv"), in_ch, out_ch, cfg.kernel)?;
            let attention = match cfg.attention {
                AttentionVariant::None => None,
                variant => {
                    let mut w3cfg = W3Config::new(out_ch);
                    w3cfg.reduction_ratio = cfg.reduction_ratio;
                    w3cfg.k_c_vid = cfg.k_c_vid;
                    w3cfg.spatial_kernel = cfg.spatial_kernel;
                    w3cfg.temporal_enabled = variant == AttentionVariant::W3;
                    Some(W3Module::new(store, &format!("backbone.block{i}.w3"), w3cfg)?)
                }
            };
            blocks.push(Block { conv, attention });
            in_ch = out_ch;
        }
        let trunk_dim = *cfg.block_channels.last().unwrap();
        let verb_head = Linear::new(store, "backbone.verb_head", trunk_dim, cfg.verbs, true);
        let noun_head = Linear::new(store, "backbone.noun_head", trunk_dim, cfg.nouns, true);
        Ok(ToyBackbone {
            cfg,
            blocks,
            verb_head,
            noun_head,
        })
    }

    pub fn config(&self) -> &BackboneConfig {
        &self.cfg
    }

    /// Forward one clip; returns verb logits, noun logits and the tape.
    pub fn forward<F: Elem>(
        &self,
        store: &ParamStore<F>,
        clip: &FeatureMap<F>,
    ) -> Result<(Vec<F>, Vec<F>, BackboneCache<F>)> {
        if clip.c() != self.cfg.in_channels {
            return Err(Error::shape(
                "ToyBackbone input",
                format!("{} channels", self.cfg.in_channels),
                format!("{} channels", clip.c()),
            ));
        }
        let mut cur = clip.clone();
        if self.cfg.input_offset != 0.0 {
            let offset: F = crate::elem::fl(self.cfg.input_offset);
            for v in cur.as_mut_slice() {
                *v = *v - offset;
            }
        }
        let mut tapes = Vec::with_capacity(self.blocks.len());
        for block in &self.blocks {
            let shifted = temporal_shift(&cur, self.cfg.shift_fraction)?;
            let mut conv_out = block.conv.forward(store, &shifted);
            conv_out
                .as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = if *v > F::zero() { *v } else { F::zero() });
            let relu_out = conv_out;
            let (pooled, pool_argmax) = max_pool_2x2(&relu_out);
            let (output, w3) = match &block.attention {
                Some(w3) => {
                    let (out, _, cache) = w3.forward(store, &pooled)?;
                    (out, Some(cache))
                }
                None => (pooled.clone(), None),
            };
            cur = output.clone();
            tapes.push(BlockTape {
                shifted,
                relu_out,
                pool_argmax,
                pooled,
                w3,
                output,
            });
        }
        let features = global_avg_pool(&cur);
        let verb_logits = self.verb_head.forward_vec(store, &features);
        let noun_logits = self.noun_head.forward_vec(store, &features);
        Ok((
            verb_logits,
            noun_logits,
            BackboneCache {
                blocks: tapes,
                features,
            },
        ))
    }

    /// Eval-only forward without keeping the tape.
    pub fn predict<F: Elem>(
        &self,
        store: &ParamStore<F>,
        clip: &FeatureMap<F>,
    ) -> Result<(Vec<F>, Vec<F>)> {
        let (v, n, _) = self.forward(store, clip)?;
        Ok((v, n))
    }

    /// Backward from head gradients, accumulating parameter gradients.
    pub fn backward<F: Elem>(
        &self,
        store: &ParamStore<F>,
        cache: &BackboneCache<F>,
        d_verb: &[F],
        d_noun: &[F],
        grads: &mut GradBuffer<F>,
    ) {
        use crate::tensor::Mat;
        let feat = Mat::from_vec(1, cache.features.len(), cache.features.clone())
            .expect("feature row");
        let dv = Mat::from_vec(1, d_verb.len(), d_verb.to_vec()).expect("verb grad row");
        let dn = Mat::from_vec(1, d_noun.len(), d_noun.to_vec()).expect("noun grad row");
        let d_feat_v = self.verb_head.backward_batch(store, &feat, &dv, grads);
        let d_feat_n = self.noun_head.backward_batch(store, &feat, &dn, grads);
        let d_features: Vec<F> = d_feat_v
            .as_slice()
            .iter()
            .zip(d_feat_n.as_slice())
            .map(|(a, b)| *a + *b)
            .collect();

        let last = cache.blocks.last().expect("at least one block");
        let mut d_cur = FeatureMap::zeros(
            last.output.t(),
            last.output.c(),
            last.output.h(),
            last.output.w(),
        );
        global_avg_pool_backward(&d_features, &mut d_cur);

        for (block, tape) in self.blocks.iter().zip(cache.blocks.iter()).rev() {
            let d_pooled = match (&block.attention, &tape.w3) {
                (Some(w3), Some(w3_tape)) => w3.backward(store, &tape.pooled, w3_tape, &d_cur, grads),
                _ => d_cur,
            };
            let mut d_relu = FeatureMap::zeros(
                tape.relu_out.t(),
                tape.relu_out.c(),
                tape.relu_out.h(),
                tape.relu_out.w(),
            );
            max_pool_2x2_backward(&d_pooled, &tape.pool_argmax, &mut d_relu);
            for (g, &r) in d_relu.as_mut_slice().iter_mut().zip(tape.relu_out.as_slice()) {
                if r <= F::zero() {
                    *g = F::zero();
                }
            }
            let d_shifted = block.conv.backward(store, &tape.shifted, &d_relu, grads);
            d_cur = temporal_shift_backward(&d_shifted, self.cfg.shift_fraction);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn random_clip(seed: u64) -> FeatureMap<f64> {
        let mut r = rng::seeded(seed);
        FeatureMap::from_fn(4, 3, 16, 16, |_, _, _, _| rng::uniform(&mut r, 0.0, 1.0))
    }

    #[test]
    fn forward_shapes_and_determinism() {
        for variant in [AttentionVariant::None, AttentionVariant::W2, AttentionVariant::W3] {
            let mut store: ParamStore<f64> = ParamStore::new(3);
            let model = ToyBackbone::new(&mut store, BackboneConfig::toy(8, 12, variant)).unwrap();
            let clip = random_clip(1);
            let (v1, n1) = model.predict(&store, &clip).unwrap();
            let (v2, n2) = model.predict(&store, &clip).unwrap();
            assert_eq!(v1.len(), 8);
            assert_eq!(n1.len(), 12);
            assert_eq!(v1, v2);
            assert_eq!(n1, n2);
            assert!(v1.iter().all(|x| x.is_finite()));
        }
    }

    #[test]
    fn input_channel_mismatch_is_an_error() {
        let mut store: ParamStore<f64> = ParamStore::new(0);
        let model = ToyBackbone::new(&mut store, BackboneConfig::toy(4, 4, AttentionVariant::None)).unwrap();
        let bad = FeatureMap::zeros(2, 5, 16, 16);
        assert!(model.predict(&store, &bad).is_err());
    }

    #[test]
    fn variants_register_different_parameter_sets() {
        let count = |variant| {
            let mut store: ParamStore<f64> = ParamStore::new(0);
            ToyBackbone::new(&mut store, BackboneConfig::toy(8, 12, variant)).unwrap();
            store.total_elements()
        };
        let plain = count(AttentionVariant::None);
        let w3 = count(AttentionVariant::W3);
        assert!(w3 > plain);
        // W2 keeps the same parameter layout as W3; only the bypass differs.
        assert_eq!(count(AttentionVariant::W2), w3);
    }
}
