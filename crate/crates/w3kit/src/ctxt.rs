//! Temporal Context Network: maps a window of neighboring clips' verb/noun
//! logits to a V×N action score matrix through two parallel 3-layer MLP
//! streams that emit a rank-R factorization — a V×R verb factor and an R×N
//! noun factor whose product is the action matrix. Also hosts the
//! outer-product and action-prior comparator baselines.

use crate::elem::{fl, wide, Elem};
use crate::error::{Error, Result};
use crate::nn::activations::softmax;
use crate::nn::linear::{context_stream_spec, Mlp, MlpCache};
use crate::params::{GradBuffer, ParamStore};
use crate::rng::Rng;
use crate::tensor::Mat;

/// Vocabulary and factorization sizes.
#[derive(Debug, Clone)]
pub struct VocabConfig {
    pub verbs: usize,
    pub nouns: usize,
    pub rank: usize,
    /// Context window length in clips (odd).
    pub window: usize,
    /// When present, scoring is restricted to these (verb, noun) pairs.
    pub valid_actions: Option<Vec<(usize, usize)>>,
}

impl VocabConfig {
    pub fn new(verbs: usize, nouns: usize, rank: usize, window: usize) -> Result<Self> {
        let cfg = VocabConfig {
            verbs,
            nouns,
            rank,
            window,
            valid_actions: None,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Desk-scale configuration: 8 verbs, 12 nouns, rank 4, window 5.
    pub fn toy() -> Self {
        VocabConfig::new(8, 12, 4, 5).expect("toy configuration is valid")
    }

    /// Full-vocabulary configuration: 125 verbs, 352 nouns, rank 16, window 5.
    pub fn epic() -> Self {
        VocabConfig::new(125, 352, 16, 5).expect("epic configuration is valid")
    }

    pub fn validate(&self) -> Result<()> {
        if self.verbs == 0 || self.nouns == 0 {
            return Err(Error::Config("vocabulary sizes must be >= 1".into()));
        }
        if self.rank == 0 || self.rank > self.verbs.min(self.nouns) {
            return Err(Error::Config(format!(
                "rank {} outside 1..=min(V={}, N={})",
                self.rank, self.verbs, self.nouns
            )));
        }
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::Config(format!(
                "context window {} must be odd and >= 1",
                self.window
            )));
        }
        if let Some(pairs) = &self.valid_actions {
            for &(v, n) in pairs {
                if v >= self.verbs || n >= self.nouns {
                    return Err(Error::Config(format!(
                        "valid action ({v}, {n}) outside vocabulary {}x{}",
                        self.verbs, self.nouns
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn center_index(&self) -> usize {
        self.window / 2
    }
}

/// First-stage logits of one clip.
#[derive(Debug, Clone)]
pub struct ClipLogits<F> {
    pub verb: Vec<F>,
    pub noun: Vec<F>,
}

/// Concatenated verb and noun logits over `window` consecutive clips,
/// centered on the clip being scored. Positions past either end of the video
/// are zero rows.
#[derive(Debug, Clone)]
pub struct LogitWindow<F> {
    pub verb_logits: Mat<F>,
    pub noun_logits: Mat<F>,
    pub center_index: usize,
}

impl<F: Elem> LogitWindow<F> {
    fn flat_verbs(&self) -> Vec<F> {
        self.verb_logits.as_slice().to_vec()
    }

    fn flat_nouns(&self) -> Vec<F> {
        self.noun_logits.as_slice().to_vec()
    }
}

/// Build a window of `t_ctx` clips centered on clip `i` of a video's
/// time-ordered sequence.
pub fn build_context_window<F: Elem>(
    sequence: &[ClipLogits<F>],
    i: usize,
    t_ctx: usize,
) -> Result<LogitWindow<F>> {
    if sequence.is_empty() {
        return Err(Error::EmptyInput("build_context_window".into()));
    }
    if t_ctx == 0 || t_ctx % 2 == 0 {
        return Err(Error::Config(format!("window length {t_ctx} must be odd")));
    }
    if i >= sequence.len() {
        return Err(Error::Config(format!(
            "clip index {i} outside sequence of length {}",
            sequence.len()
        )));
    }
    let v = sequence[0].verb.len();
    let n = sequence[0].noun.len();
    let center = t_ctx / 2;
    let mut verb_logits = Mat::zeros(t_ctx, v);
    let mut noun_logits = Mat::zeros(t_ctx, n);
    for row in 0..t_ctx {
        let offset = row as isize - center as isize;
        let src = i as isize + offset;
        if src >= 0 && (src as usize) < sequence.len() {
            let clip = &sequence[src as usize];
            verb_logits.row_mut(row).copy_from_slice(&clip.verb);
            noun_logits.row_mut(row).copy_from_slice(&clip.noun);
        }
    }
    Ok(LogitWindow {
        verb_logits,
        noun_logits,
        center_index: center,
    })
}

/// Rank-R factorization of the action matrix: `scores = verb_factor ·
/// noun_factor` with `verb_factor` V×R and `noun_factor` R×N.
#[derive(Debug, Clone)]
pub struct ActionScoreMatrix<F> {
    pub verb_factor: Mat<F>,
    pub noun_factor: Mat<F>,
    pub scores: Mat<F>,
}

impl<F: Elem> ActionScoreMatrix<F> {
    pub fn from_factors(verb_factor: Mat<F>, noun_factor: Mat<F>) -> Result<Self> {
        let scores = verb_factor.matmul(&noun_factor)?;
        Ok(ActionScoreMatrix {
            verb_factor,
            noun_factor,
            scores,
        })
    }
}

/// Forward tape for [`CtxtNet::backward_batch`].
pub struct CtxtBatchCache<F> {
    verb_tape: MlpCache<F>,
    noun_tape: MlpCache<F>,
    verb_out: Mat<F>,
    noun_out: Mat<F>,
}

/// The two parallel context streams.
#[derive(Debug, Clone)]
pub struct CtxtNet {
    cfg: VocabConfig,
    pub hidden: [usize; 2],
    verb_stream: Mlp,
    noun_stream: Mlp,
}

impl CtxtNet {
    pub fn new<F: Elem>(
        store: &mut ParamStore<F>,
        prefix: &str,
        cfg: VocabConfig,
        hidden: [usize; 2],
        dropout: f64,
    ) -> Result<Self> {
        cfg.validate()?;
        let verb_widths = [
            cfg.window * cfg.verbs,
            hidden[0],
            hidden[1],
            cfg.verbs * cfg.rank,
        ];
        let noun_widths = [
            cfg.window * cfg.nouns,
            hidden[0],
            hidden[1],
            cfg.rank * cfg.nouns,
        ];
        let verb_stream = Mlp::new(
            store,
            &format!("{prefix}.verb"),
            &context_stream_spec(&verb_widths, dropout),
        )?;
        let noun_stream = Mlp::new(
            store,
            &format!("{prefix}.noun"),
            &context_stream_spec(&noun_widths, dropout),
        )?;
        Ok(CtxtNet {
            cfg,
            hidden,
            verb_stream,
            noun_stream,
        })
    }

    pub fn config(&self) -> &VocabConfig {
        &self.cfg
    }

    /// Output sizes of the two final layers: (V·R, R·N).
    pub fn final_layer_outputs(&self) -> (usize, usize) {
        (self.verb_stream.out_dim, self.noun_stream.out_dim)
    }

    fn check_window<F: Elem>(&self, window: &LogitWindow<F>) -> Result<()> {
        let ok = window.verb_logits.rows() == self.cfg.window
            && window.verb_logits.cols() == self.cfg.verbs
            && window.noun_logits.rows() == self.cfg.window
            && window.noun_logits.cols() == self.cfg.nouns;
        if !ok {
            return Err(Error::shape(
                "CtxtNet window",
                format!(
                    "verbs {}x{}, nouns {}x{}",
                    self.cfg.window, self.cfg.verbs, self.cfg.window, self.cfg.nouns
                ),
                format!(
                    "verbs {}x{}, nouns {}x{}",
                    window.verb_logits.rows(),
                    window.verb_logits.cols(),
                    window.noun_logits.rows(),
                    window.noun_logits.cols()
                ),
            ));
        }
        Ok(())
    }

    fn factors_from_rows<F: Elem>(&self, verb_row: &[F], noun_row: &[F]) -> ActionScoreMatrix<F> {
        let u = Mat::from_vec(self.cfg.verbs, self.cfg.rank, verb_row.to_vec())
            .expect("stream output length is V*R");
        let wn = Mat::from_vec(self.cfg.rank, self.cfg.nouns, noun_row.to_vec())
            .expect("stream output length is R*N");
        ActionScoreMatrix::from_factors(u, wn).expect("factor inner dimensions agree")
    }

    /// Deterministic eval-mode scoring of one window.
    pub fn forward_eval<F: Elem>(
        &self,
        store: &ParamStore<F>,
        window: &LogitWindow<F>,
    ) -> Result<ActionScoreMatrix<F>> {
        self.check_window(window)?;
        let verb_out = self.verb_stream.forward_vec_eval(store, &window.flat_verbs());
        let noun_out = self.noun_stream.forward_vec_eval(store, &window.flat_nouns());
        Ok(self.factors_from_rows(&verb_out, &noun_out))
    }

    /// Train-mode scoring of a batch of windows (batch norm uses batch
    /// statistics, dropout is active).
    pub fn forward_train_batch<F: Elem>(
        &self,
        store: &mut ParamStore<F>,
        windows: &[LogitWindow<F>],
        rng: &mut Rng,
    ) -> Result<(Vec<ActionScoreMatrix<F>>, CtxtBatchCache<F>)> {
        if windows.is_empty() {
            return Err(Error::EmptyInput("CtxtNet::forward_train_batch".into()));
        }
        for w in windows {
            self.check_window(w)?;
        }
        let b = windows.len();
        let mut verb_in = Mat::zeros(b, self.cfg.window * self.cfg.verbs);
        let mut noun_in = Mat::zeros(b, self.cfg.window * self.cfg.nouns);
        for (r, w) in windows.iter().enumerate() {
            verb_in.row_mut(r).copy_from_slice(&w.flat_verbs());
            noun_in.row_mut(r).copy_from_slice(&w.flat_nouns());
        }
        let (verb_out, verb_tape) = self.verb_stream.forward_train(store, &verb_in, rng);
        let (noun_out, noun_tape) = self.noun_stream.forward_train(store, &noun_in, rng);
        let mats = (0..b)
            .map(|r| self.factors_from_rows(verb_out.row(r), noun_out.row(r)))
            .collect();
        Ok((
            mats,
            CtxtBatchCache {
                verb_tape,
                noun_tape,
                verb_out,
                noun_out,
            },
        ))
    }

    /// Backward through a training batch given per-sample score gradients.
    pub fn backward_batch<F: Elem>(
        &self,
        store: &ParamStore<F>,
        cache: &CtxtBatchCache<F>,
        d_scores: &[Mat<F>],
        grads: &mut GradBuffer<F>,
    ) {
        let b = d_scores.len();
        let (v, n, r) = (self.cfg.verbs, self.cfg.nouns, self.cfg.rank);
        let mut d_verb_out = Mat::zeros(b, v * r);
        let mut d_noun_out = Mat::zeros(b, r * n);
        for (row, d_a) in d_scores.iter().enumerate() {
            let u = Mat::from_vec(v, r, cache.verb_out.row(row).to_vec()).unwrap();
            let wn = Mat::from_vec(r, n, cache.noun_out.row(row).to_vec()).unwrap();
            // dU = dA · Wn^T ; dWn = U^T · dA
            let d_u = d_verb_out.row_mut(row);
            for vi in 0..v {
                for ri in 0..r {
                    let mut acc = F::zero();
                    for ni in 0..n {
                        acc = acc + d_a.at(vi, ni) * wn.at(ri, ni);
                    }
                    d_u[vi * r + ri] = acc;
                }
            }
            let d_wn = d_noun_out.row_mut(row);
            for ri in 0..r {
                for ni in 0..n {
                    let mut acc = F::zero();
                    for vi in 0..v {
                        acc = acc + u.at(vi, ri) * d_a.at(vi, ni);
                    }
                    d_wn[ri * n + ni] = acc;
                }
            }
        }
        self.verb_stream.backward(store, &cache.verb_tape, &d_verb_out, grads);
        self.noun_stream.backward(store, &cache.noun_tape, &d_noun_out, grads);
    }
}

/// Rank all (verb, noun) pairs by score, descending; ties break by ascending
/// (verb, noun). Pairs outside `valid_actions` are excluded when the config
/// provides one.
pub fn action_prediction<F: Elem>(scores: &Mat<F>, cfg: &VocabConfig) -> Vec<(usize, usize, F)> {
    let mut ranked: Vec<(usize, usize, F)> = match &cfg.valid_actions {
        Some(pairs) => pairs.iter().map(|&(v, n)| (v, n, scores.at(v, n))).collect(),
        None => (0..cfg.verbs)
            .flat_map(|v| (0..cfg.nouns).map(move |n| (v, n)))
            .map(|(v, n)| (v, n, scores.at(v, n)))
            .collect(),
    };
    ranked.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    ranked
}

/// Independent outer-product action scores:
/// `softmax(verb)[v] * softmax(noun)[n]`.
pub fn outer_product_scores(verb_logits: &[f64], noun_logits: &[f64]) -> Mat<f64> {
    let pv = softmax(verb_logits);
    let pn = softmax(noun_logits);
    Mat::from_fn(pv.len(), pn.len(), |v, n| pv[v] * pn[n])
}

/// Empirical action prior: `(count(v, n) + epsilon)` normalized over all
/// pairs.
pub fn action_prior_from_labels(
    labels: impl IntoIterator<Item = (usize, usize)>,
    verbs: usize,
    nouns: usize,
    epsilon: f64,
) -> Mat<f64> {
    let mut counts = Mat::<f64>::zeros(verbs, nouns);
    for (v, n) in labels {
        *counts.at_mut(v, n) += 1.0;
    }
    let total: f64 = counts.as_slice().iter().map(|c| c + epsilon).sum();
    Mat::from_fn(verbs, nouns, |v, n| (counts.at(v, n) + epsilon) / total)
}

/// Action-prior comparator: reweights the independent outer product by the
/// empirical prior. Verb and noun marginal predictions are untouched.
pub fn action_prior_baseline(
    verb_logits: &[f64],
    noun_logits: &[f64],
    prior: &Mat<f64>,
) -> Result<Mat<f64>> {
    if prior.rows() != verb_logits.len() || prior.cols() != noun_logits.len() {
        return Err(Error::shape(
            "action_prior_baseline",
            format!("{}x{}", verb_logits.len(), noun_logits.len()),
            format!("{}x{}", prior.rows(), prior.cols()),
        ));
    }
    let outer = outer_product_scores(verb_logits, noun_logits);
    Ok(Mat::from_fn(prior.rows(), prior.cols(), |v, n| {
        outer.at(v, n) * prior.at(v, n)
    }))
}

/// Cross-entropy of the softmax over the flattened score matrix against an
/// action label; returns the loss and the score gradient. When
/// `valid_actions` is present the softmax runs over the valid subset only.
pub fn action_cross_entropy<F: Elem>(
    scores: &Mat<F>,
    label: (usize, usize),
    cfg: &VocabConfig,
) -> (f64, Mat<F>) {
    let entries: Vec<(usize, usize)> = match &cfg.valid_actions {
        Some(pairs) => pairs.clone(),
        None => (0..cfg.verbs)
            .flat_map(|v| (0..cfg.nouns).map(move |n| (v, n)))
            .collect(),
    };
    let logits: Vec<f64> = entries.iter().map(|&(v, n)| wide(scores.at(v, n))).collect();
    let probs = softmax(&logits);
    let target = entries
        .iter()
        .position(|&p| p == label)
        .expect("label must be a scoreable action");
    let loss = -probs[target].max(1e-300).ln();
    let mut grad = Mat::zeros(cfg.verbs, cfg.nouns);
    for (k, &(v, n)) in entries.iter().enumerate() {
        let p = probs[k] - if k == target { 1.0 } else { 0.0 };
        *grad.at_mut(v, n) = fl(p);
    }
    (loss, grad)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::ParamStore;
    use crate::rng;

    fn toy_net(seed: u64) -> (ParamStore<f64>, CtxtNet) {
        let mut store = ParamStore::new(seed);
        let net = CtxtNet::new(&mut store, "ctxt", VocabConfig::toy(), [64, 64], 0.5).unwrap();
        (store, net)
    }

    fn random_sequence(seed: u64, len: usize, v: usize, n: usize) -> Vec<ClipLogits<f64>> {
        let mut r = rng::seeded(seed);
        (0..len)
            .map(|_| ClipLogits {
                verb: (0..v).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect(),
                noun: (0..n).map(|_| rng::uniform(&mut r, -1.0, 1.0)).collect(),
            })
            .collect()
    }

    #[test]
    fn degenerate_window_contains_only_the_clip() {
        let seq = random_sequence(0, 4, 3, 2);
        let w = build_context_window(&seq, 2, 1).unwrap();
        assert_eq!(w.center_index, 0);
        assert_eq!(w.verb_logits.row(0), &seq[2].verb[..]);
        assert_eq!(w.noun_logits.row(0), &seq[2].noun[..]);
    }

    #[test]
    fn leading_edge_pads_with_zero_rows() {
        let seq = random_sequence(1, 4, 3, 2);
        let w = build_context_window(&seq, 0, 5).unwrap();
        assert!(w.verb_logits.row(0).iter().all(|&x| x == 0.0));
        assert!(w.verb_logits.row(1).iter().all(|&x| x == 0.0));
        for (row, clip) in (2..5).zip(&seq[0..3]) {
            assert_eq!(w.verb_logits.row(row), &clip.verb[..]);
        }
    }

    #[test]
    fn interior_window_rows_follow_index_arithmetic() {
        let seq = random_sequence(2, 7, 3, 2);
        let w = build_context_window(&seq, 3, 5).unwrap();
        assert_eq!(w.center_index, 2);
        for (row, clip) in seq[1..6].iter().enumerate() {
            assert_eq!(w.verb_logits.row(row), &clip.verb[..]);
            assert_eq!(w.noun_logits.row(row), &clip.noun[..]);
        }
    }

    #[test]
    fn empty_sequence_is_an_error() {
        let seq: Vec<ClipLogits<f64>> = Vec::new();
        assert!(build_context_window(&seq, 0, 5).is_err());
    }

    #[test]
    fn hand_set_factors_multiply_to_the_expected_matrix() {
        let u = Mat::from_vec(3, 1, vec![1.0, 2.0, 0.0]).unwrap();
        let wn = Mat::from_vec(1, 2, vec![3.0, 4.0]).unwrap();
        let a = ActionScoreMatrix::from_factors(u, wn).unwrap();
        assert_eq!(a.scores.as_slice(), &[3.0, 4.0, 6.0, 8.0, 0.0, 0.0]);
    }

    #[test]
    fn zero_final_layer_gives_zero_scores() {
        let (mut store, net) = toy_net(3);
        for stream in ["verb", "noun"] {
            // Final linear layer is stage index 8 in the 3-block recipe.
            let wid = store.lookup(&format!("ctxt.{stream}.l8.weight")).unwrap();
            store.value_mut(wid).fill(0.0);
            let bid = store.lookup(&format!("ctxt.{stream}.l8.bias")).unwrap();
            store.value_mut(bid).fill(0.0);
        }
        let seq = random_sequence(4, 6, 8, 12);
        let w = build_context_window(&seq, 2, 5).unwrap();
        let a = net.forward_eval(&store, &w).unwrap();
        assert!(a.scores.as_slice().iter().all(|&x| x == 0.0));
        assert!(a.verb_factor.as_slice().iter().all(|&x| x == 0.0));
    }

    #[test]
    fn numerical_rank_is_bounded_by_r() {
        use nalgebra::DMatrix;
        for seed in 0..10 {
            let (store, net) = toy_net(seed);
            let seq = random_sequence(100 + seed, 6, 8, 12);
            let w = build_context_window(&seq, 3, 5).unwrap();
            let a = net.forward_eval(&store, &w).unwrap();
            let m = DMatrix::from_row_slice(8, 12, a.scores.as_slice());
            let svd = m.svd(false, false);
            let mut sv: Vec<f64> = svd.singular_values.iter().copied().collect();
            sv.sort_by(|x, y| y.partial_cmp(x).unwrap());
            let s1 = sv[0].max(1e-300);
            for &s in &sv[4..] {
                assert!(s < 1e-6 * s1, "rank exceeded: sigma {s} vs sigma1 {s1}");
            }
        }
    }

    #[test]
    fn epic_shape_parameter_economy() {
        let mut store: ParamStore<f64> = ParamStore::new(0);
        let net = CtxtNet::new(&mut store, "ctxt", VocabConfig::epic(), [1024, 1024], 0.5).unwrap();
        let (v_out, n_out) = net.final_layer_outputs();
        assert_eq!(v_out, 125 * 16);
        assert_eq!(n_out, 16 * 352);
        assert_eq!(v_out + n_out, 7632);
        assert!(v_out + n_out < 125 * 352);
    }

    #[test]
    fn window_locality_is_exact() {
        let (store, net) = toy_net(9);
        let mut seq = random_sequence(10, 9, 8, 12);
        let w = build_context_window(&seq, 4, 5).unwrap();
        let a = net.forward_eval(&store, &w).unwrap();
        // Perturb a clip outside the window (index 8 > 4 + 2).
        seq[8].verb[0] += 100.0;
        seq[8].noun[3] -= 50.0;
        let w2 = build_context_window(&seq, 4, 5).unwrap();
        let a2 = net.forward_eval(&store, &w2).unwrap();
        assert_eq!(a.scores, a2.scores);
    }

    #[test]
    fn eval_forward_is_deterministic() {
        let (store, net) = toy_net(11);
        let seq = random_sequence(12, 5, 8, 12);
        let w = build_context_window(&seq, 2, 5).unwrap();
        let a = net.forward_eval(&store, &w).unwrap();
        let b = net.forward_eval(&store, &w).unwrap();
        assert_eq!(a.scores, b.scores);
    }

    #[test]
    fn action_prediction_ranks_and_breaks_ties() {
        let cfg = VocabConfig::new(3, 3, 1, 1).unwrap();
        let mut scores = Mat::zeros(3, 3);
        *scores.at_mut(2, 1) = 5.0;
        let ranked = action_prediction(&scores, &cfg);
        assert_eq!((ranked[0].0, ranked[0].1), (2, 1));
        // All-equal scores rank lexicographically.
        let flat = Mat::from_fn(3, 3, |_, _| 1.0);
        let ranked = action_prediction(&flat, &cfg);
        let order: Vec<(usize, usize)> = ranked.iter().map(|r| (r.0, r.1)).collect();
        let expect: Vec<(usize, usize)> =
            (0..3).flat_map(|v| (0..3).map(move |n| (v, n))).collect();
        assert_eq!(order, expect);
    }

    #[test]
    fn action_prediction_matches_full_sort_oracle() {
        let mut r = rng::seeded(13);
        let scores = Mat::from_fn(4, 5, |_, _| rng::uniform(&mut r, -1.0, 1.0));
        let cfg = VocabConfig::new(4, 5, 2, 1).unwrap();
        let ranked = action_prediction(&scores, &cfg);
        let mut oracle: Vec<(usize, usize, f64)> = (0..4)
            .flat_map(|v| (0..5).map(move |n| (v, n)))
            .map(|(v, n)| (v, n, scores.at(v, n)))
            .collect();
        oracle.sort_by(|a, b| b.2.partial_cmp(&a.2).unwrap().then(a.0.cmp(&b.0)).then(a.1.cmp(&b.1)));
        assert_eq!(ranked, oracle);
    }

    #[test]
    fn valid_action_filter_excludes_pairs() {
        let mut cfg = VocabConfig::new(2, 2, 1, 1).unwrap();
        cfg.valid_actions = Some(vec![(0, 0), (1, 1)]);
        let mut scores = Mat::zeros(2, 2);
        *scores.at_mut(0, 1) = 10.0; // excluded pair
        *scores.at_mut(1, 1) = 1.0;
        let ranked = action_prediction(&scores, &cfg);
        assert_eq!(ranked.len(), 2);
        assert_eq!((ranked[0].0, ranked[0].1), (1, 1));
    }

    #[test]
    fn uniform_prior_preserves_outer_product_ranking() {
        let verb = vec![0.3, -0.2, 1.4];
        let noun = vec![0.9, 0.0];
        let prior = Mat::from_fn(3, 2, |_, _| 1.0 / 6.0);
        let reweighted = action_prior_baseline(&verb, &noun, &prior).unwrap();
        let outer = outer_product_scores(&verb, &noun);
        let cfg = VocabConfig::new(3, 2, 1, 1).unwrap();
        let a: Vec<(usize, usize)> = action_prediction(&reweighted, &cfg)
            .iter()
            .map(|r| (r.0, r.1))
            .collect();
        let b: Vec<(usize, usize)> = action_prediction(&outer, &cfg)
            .iter()
            .map(|r| (r.0, r.1))
            .collect();
        assert_eq!(a, b);
    }

    #[test]
    fn epsilon_floored_prior_ranks_zero_count_pairs_last() {
        let labels = vec![(0usize, 0usize), (0, 0), (1, 1)];
        let prior = action_prior_from_labels(labels, 2, 2, 1e-8);
        assert!(prior.at(0, 1) > 0.0);
        // Uniform marginals: ranking decided by the prior alone.
        let verb = vec![0.0, 0.0];
        let noun = vec![0.0, 0.0];
        let s = action_prior_baseline(&verb, &noun, &prior).unwrap();
        assert!(s.at(0, 0) > s.at(0, 1));
        assert!(s.at(1, 1) > s.at(1, 0));
    }

    #[test]
    fn diagonal_prior_with_uniform_marginals_ranks_diagonal_first() {
        let prior = Mat::<f64>::from_vec(2, 2, vec![0.5, 0.0, 0.0, 0.5]).unwrap();
        // Epsilon-floor the zeros the way the estimator would.
        let prior: Mat<f64> = Mat::from_fn(2, 2, |v, n| prior.at(v, n).max(1e-8));
        let s = action_prior_baseline(&[0.0, 0.0], &[0.0, 0.0], &prior).unwrap();
        let cfg = VocabConfig::new(2, 2, 1, 1).unwrap();
        let ranked = action_prediction(&s, &cfg);
        let top2: Vec<(usize, usize)> = ranked[..2].iter().map(|r| (r.0, r.1)).collect();
        assert_eq!(top2, vec![(0, 0), (1, 1)]);
    }

    #[test]
    fn prior_estimation_normalizes() {
        let prior = action_prior_from_labels(vec![(0, 1), (1, 0)], 2, 2, 1e-8);
        let total: f64 = prior.as_slice().iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }
}
