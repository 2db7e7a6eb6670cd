//! Optimizers and the two training stages: the video backbone with momentum
//! SGD, the temporal-context network with Adam on top of frozen first-stage
//! logits.

use crate::backbone::ToyBackbone;
use crate::ctxt::{action_cross_entropy, CtxtNet, LogitWindow};
use crate::elem::{fl, wide, Elem};
use crate::error::{Error, Result};
use crate::nn::activations::softmax_in_place;
use crate::parallel::{map_indexed, ExecMode};
use crate::params::{trainable_pairs, GradBuffer, ParamStore};
use crate::rng;
use crate::tensor::FeatureMap;

/// Momentum SGD: `v = momentum * v + g; p -= lr * v`. With zero-initialized
/// velocity the first step is exactly `p - lr * g`.
pub struct Sgd<F> {
    pub lr: f64,
    pub momentum: f64,
    velocity: Vec<Vec<F>>,
}

impl<F: Elem> Sgd<F> {
    pub fn new(store: &ParamStore<F>, lr: f64, momentum: f64) -> Self {
        Sgd {
            lr,
            momentum,
            velocity: store
                .iter()
                .filter(|(_, _, _, trainable)| *trainable)
                .map(|(_, _, v, _)| vec![F::zero(); v.len()])
                .collect(),
        }
    }

    pub fn step(&mut self, store: &mut ParamStore<F>, grads: &GradBuffer<F>) {
        let lr: F = fl(self.lr);
        let mu: F = fl(self.momentum);
        for ((values, grad), vel) in trainable_pairs(store, grads)
            .into_iter()
            .zip(self.velocity.iter_mut())
        {
            for ((p, v), &g) in values.iter_mut().zip(vel.iter_mut()).zip(grad.iter()) {
                *v = mu * *v + g;
                *p = *p - lr * *v;
            }
        }
    }
}

/// Adam with bias correction (betas 0.9 / 0.999, epsilon 1e-8).
pub struct Adam<F> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<Vec<F>>,
    v: Vec<Vec<F>>,
    t: u64,
}

impl<F: Elem> Adam<F> {
    pub fn new(store: &ParamStore<F>, lr: f64) -> Self {
        let zeros: Vec<Vec<F>> = store
            .iter()
            .filter(|(_, _, _, trainable)| *trainable)
            .map(|(_, _, v, _)| vec![F::zero(); v.len()])
            .collect();
        Adam {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn step(&mut self, store: &mut ParamStore<F>, grads: &GradBuffer<F>) {
        self.t += 1;
        let b1: F = fl(self.beta1);
        let b2: F = fl(self.beta2);
        let one = F::one();
        let corr1: F = fl(1.0 - self.beta1.powi(self.t as i32));
        let corr2: F = fl(1.0 - self.beta2.powi(self.t as i32));
        let lr: F = fl(self.lr);
        let eps: F = fl(self.eps);
        for (k, (values, grad)) in trainable_pairs(store, grads).into_iter().enumerate() {
            let (m, v) = (&mut self.m[k], &mut self.v[k]);
            for (((p, mi), vi), &g) in values
                .iter_mut()
                .zip(m.iter_mut())
                .zip(v.iter_mut())
                .zip(grad.iter())
            {
                *mi = b1 * *mi + (one - b1) * g;
                *vi = b2 * *vi + (one - b2) * g * g;
                let m_hat = *mi / corr1;
                let v_hat = *vi / corr2;
                *p = *p - lr * m_hat / (v_hat.sqrt() + eps);
            }
        }
    }
}

/// Softmax cross-entropy of one logit vector; returns the loss and the logit
/// gradient.
pub fn softmax_cross_entropy<F: Elem>(logits: &[F], label: usize) -> (f64, Vec<F>) {
    let mut probs = logits.to_vec();
    softmax_in_place(&mut probs);
    let loss = -wide(probs[label]).max(1e-300).ln();
    let mut grad = probs;
    grad[label] = grad[label] - F::one();
    (loss, grad)
}

fn argmax<F: Elem>(xs: &[F]) -> usize {
    let mut best = 0;
    for (i, &x) in xs.iter().enumerate().skip(1) {
        if x > xs[best] {
            best = i;
        }
    }
    best
}

/// One epoch's summary emitted by the backbone trainer.
#[derive(Debug, Clone)]
pub struct EpochLog {
    pub epoch: usize,
    pub loss: f64,
    pub verb_accuracy: f64,
    pub noun_accuracy: f64,
}

#[derive(Debug, Clone)]
pub struct TrainBackboneConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub momentum: f64,
    pub seed: u64,
}

impl Default for TrainBackboneConfig {
    fn default() -> Self {
        TrainBackboneConfig {
            epochs: 20,
            batch_size: 16,
            lr: 0.02,
            momentum: 0.9,
            seed: 0,
        }
    }
}

/// A training example: clip tensor plus its two labels.
pub struct LabeledClip<F> {
    pub frames: FeatureMap<F>,
    pub verb: usize,
    pub noun: usize,
}

/// Train the backbone with joint verb + noun cross-entropy (1:1).
///
/// Batch gradients are computed per clip — in parallel across the batch when
/// the mode allows — and folded in clip order, so the result is bit-identical
/// for any worker count. A non-finite loss aborts with a diagnostic.
pub fn train_backbone<F: Elem>(
    store: &mut ParamStore<F>,
    model: &ToyBackbone,
    data: &[LabeledClip<F>],
    cfg: &TrainBackboneConfig,
    mode: ExecMode,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<Vec<EpochLog>> {
    if data.is_empty() {
        return Err(Error::EmptyInput("train_backbone".into()));
    }
    let mut optim = Sgd::new(store, cfg.lr, cfg.momentum);
    let mut logs = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order_rng = rng::derived(cfg.seed, (0x5u64 << 32) | epoch as u64);
        let order = rng::shuffled_indices(&mut order_rng, data.len());
        let mut epoch_loss = 0.0;
        let mut verb_hits = 0usize;
        let mut noun_hits = 0usize;
        for batch in order.chunks(cfg.batch_size) {
            let shared: &ParamStore<F> = store;
            let per_clip = map_indexed(mode, batch.len(), |b| {
                let item = &data[batch[b]];
                let mut grads = GradBuffer::zeros_like(shared);
                let (verb_logits, noun_logits, cache) = model
                    .forward(shared, &item.frames)
                    .expect("training clips match the model shape");
                let (loss_v, d_verb) = softmax_cross_entropy(&verb_logits, item.verb);
                let (loss_n, d_noun) = softmax_cross_entropy(&noun_logits, item.noun);
                model.backward(shared, &cache, &d_verb, &d_noun, &mut grads);
                let hit_v = argmax(&verb_logits) == item.verb;
                let hit_n = argmax(&noun_logits) == item.noun;
                (grads, loss_v + loss_n, hit_v, hit_n)
            });
            let mut batch_grads = GradBuffer::zeros_like(store);
            let mut batch_loss = 0.0;
            for (g, loss, hit_v, hit_n) in per_clip {
                batch_grads.add_assign(&g);
                batch_loss += loss;
                verb_hits += hit_v as usize;
                noun_hits += hit_n as usize;
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite loss in epoch {epoch} (batch of {} clips)",
                    batch.len()
                )));
            }
            batch_grads.scale(fl(1.0 / batch.len() as f64));
            optim.step(store, &batch_grads);
            epoch_loss += batch_loss;
        }
        let log = EpochLog {
            epoch,
            loss: epoch_loss / data.len() as f64,
            verb_accuracy: verb_hits as f64 / data.len() as f64,
            noun_accuracy: noun_hits as f64 / data.len() as f64,
        };
        on_epoch(&log);
        logs.push(log);
    }
    Ok(logs)
}

#[derive(Debug, Clone)]
pub struct TrainCtxtConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for TrainCtxtConfig {
    fn default() -> Self {
        TrainCtxtConfig {
            epochs: 40,
            batch_size: 32,
            lr: 1e-3,
            seed: 0,
        }
    }
}

/// Train the context network with Adam on frozen first-stage logit windows.
/// Returns the mean loss per epoch.
pub fn train_ctxtnet<F: Elem>(
    store: &mut ParamStore<F>,
    net: &CtxtNet,
    data: &[(LogitWindow<F>, (usize, usize))],
    cfg: &TrainCtxtConfig,
) -> Result<Vec<f64>> {
    if data.is_empty() {
        return Err(Error::EmptyInput("train_ctxtnet".into()));
    }
    let mut optim = Adam::new(store, cfg.lr);
    let mut dropout_rng = rng::derived(cfg.seed, 0xd0);
    let mut losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut order_rng = rng::derived(cfg.seed, (0x6u64 << 32) | epoch as u64);
        let order = rng::shuffled_indices(&mut order_rng, data.len());
        let mut epoch_loss = 0.0;
        for batch in order.chunks(cfg.batch_size) {
            let windows: Vec<LogitWindow<F>> = batch.iter().map(|&i| data[i].0.clone()).collect();
            let (mats, cache) = net.forward_train_batch(store, &windows, &mut dropout_rng)?;
            let mut grads = GradBuffer::zeros_like(store);
            let mut d_scores = Vec::with_capacity(mats.len());
            let mut batch_loss = 0.0;
            let inv: F = fl(1.0 / batch.len() as f64);
            for (mat, &i) in mats.iter().zip(batch.iter()) {
                let (loss, mut grad) = action_cross_entropy(&mat.scores, data[i].1, net.config());
                batch_loss += loss;
                for g in grad.as_mut_slice() {
                    *g = *g * inv;
                }
                d_scores.push(grad);
            }
            if !batch_loss.is_finite() {
                return Err(Error::Diverged(format!(
                    "non-finite context loss in epoch {epoch}"
                )));
            }
            net.backward_batch(store, &cache, &d_scores, &mut grads);
            optim.step(store, &grads);
            epoch_loss += batch_loss;
        }
        losses.push(epoch_loss / data.len() as f64);
    }
    Ok(losses)
}
