//! Logit-level multimodal ensembling, clip averaging and Top-k accuracy for
//! verb / noun / action tasks. All metric math runs in f64.

use std::collections::HashMap;

use crate::ctxt::outer_product_scores;
use crate::error::{Error, Result};

/// Per-clip prediction for one modality.
#[derive(Debug, Clone)]
pub struct ClipPrediction {
    pub clip_id: String,
    pub modality: String,
    pub verb_logits: Vec<f64>,
    pub noun_logits: Vec<f64>,
    /// Sparse action scores `((verb, noun), score)`. When absent, action
    /// metrics fall back to the softmax outer product of the marginals.
    pub action_scores: Option<Vec<(usize, usize, f64)>>,
}

/// Label record for one clip.
#[derive(Debug, Clone)]
pub struct GroundTruth {
    pub clip_id: String,
    pub verb: usize,
    pub noun: usize,
    pub video_id: String,
    pub start_time: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Task {
    Verb,
    Noun,
}

/// Weighted arithmetic mean of per-modality logits for one clip. Weights are
/// normalized to sum to one; inputs are folded in ascending modality-tag
/// order so the result is bit-exact regardless of argument order.
pub fn ensemble_logits(predictions: &[ClipPrediction], weights: &[f64]) -> Result<ClipPrediction> {
    if predictions.is_empty() {
        return Err(Error::EmptyInput("ensemble_logits".into()));
    }
    if predictions.len() != weights.len() {
        return Err(Error::shape(
            "ensemble_logits",
            format!("{} weights", predictions.len()),
            format!("{}", weights.len()),
        ));
    }
    if weights.iter().any(|&w| w < 0.0) || weights.iter().all(|&w| w == 0.0) {
        return Err(Error::Config(
            "ensemble weights must be nonnegative and not all zero".into(),
        ));
    }
    let clip_id = &predictions[0].clip_id;
    let v = predictions[0].verb_logits.len();
    let n = predictions[0].noun_logits.len();
    for p in predictions {
        if p.clip_id != *clip_id {
            return Err(Error::Config(format!(
                "ensemble over mismatched clips {:?} vs {:?}",
                clip_id, p.clip_id
            )));
        }
        if p.verb_logits.len() != v || p.noun_logits.len() != n {
            return Err(Error::shape(
                "ensemble_logits vocab",
                format!("{v} verbs / {n} nouns"),
                format!("{} verbs / {} nouns", p.verb_logits.len(), p.noun_logits.len()),
            ));
        }
    }

    let mut order: Vec<usize> = (0..predictions.len()).collect();
    order.sort_by(|&a, &b| {
        predictions[a]
            .modality
            .cmp(&predictions[b].modality)
            .then(a.cmp(&b))
    });

    let total: f64 = weights.iter().sum();
    let mut verb = vec![0.0; v];
    let mut noun = vec![0.0; n];
    for &i in &order {
        let w = weights[i] / total;
        for (acc, &x) in verb.iter_mut().zip(&predictions[i].verb_logits) {
            *acc += w * x;
        }
        for (acc, &x) in noun.iter_mut().zip(&predictions[i].noun_logits) {
            *acc += w * x;
        }
    }
    Ok(ClipPrediction {
        clip_id: clip_id.clone(),
        modality: "ensemble".into(),
        verb_logits: verb,
        noun_logits: noun,
        action_scores: None,
    })
}

/// Arithmetic mean over the sampled clips of one video segment.
pub fn average_clips(clip_logits: &[Vec<f64>]) -> Result<Vec<f64>> {
    if clip_logits.is_empty() {
        return Err(Error::EmptyInput("average_clips".into()));
    }
    let len = clip_logits[0].len();
    let mut out = vec![0.0; len];
    for clip in clip_logits {
        if clip.len() != len {
            return Err(Error::shape("average_clips", format!("{len}"), format!("{}", clip.len())));
        }
        for (o, &x) in out.iter_mut().zip(clip) {
            *o += x;
        }
    }
    let inv = 1.0 / clip_logits.len() as f64;
    out.iter_mut().for_each(|x| *x *= inv);
    Ok(out)
}

/// Rank of `label` in `scores` under descending score with ties broken by
/// ascending class index: the number of classes strictly better, plus tied
/// classes with a smaller index.
fn rank_of(scores: &[f64], label: usize) -> usize {
    let s = scores[label];
    let mut rank = 0;
    for (i, &x) in scores.iter().enumerate() {
        if x > s || (x == s && i < label) {
            rank += 1;
        }
    }
    rank
}

fn index_predictions<'a>(
    predictions: &'a [ClipPrediction],
    truths: &[GroundTruth],
) -> Result<HashMap<&'a str, &'a ClipPrediction>> {
    let map: HashMap<&str, &ClipPrediction> = predictions
        .iter()
        .map(|p| (p.clip_id.as_str(), p))
        .collect();
    let missing: Vec<String> = truths
        .iter()
        .filter(|t| !map.contains_key(t.clip_id.as_str()))
        .map(|t| t.clip_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPredictions(missing));
    }
    Ok(map)
}

/// Fraction of clips whose true label ranks inside the top `k`.
pub fn topk_accuracy(
    predictions: &[ClipPrediction],
    truths: &[GroundTruth],
    k: usize,
    task: Task,
) -> Result<f64> {
    if truths.is_empty() {
        return Err(Error::EmptyInput("topk_accuracy".into()));
    }
    let map = index_predictions(predictions, truths)?;
    let mut hits = 0usize;
    for t in truths {
        let p = map[t.clip_id.as_str()];
        let (scores, label) = match task {
            Task::Verb => (&p.verb_logits, t.verb),
            Task::Noun => (&p.noun_logits, t.noun),
        };
        if rank_of(scores, label) < k {
            hits += 1;
        }
    }
    Ok(hits as f64 / truths.len() as f64)
}

/// Ranked (verb, noun, score) list for one prediction: explicit action scores
/// when present, otherwise the softmax outer product of the marginals. Ties
/// break by ascending (verb, noun).
pub fn ranked_actions(p: &ClipPrediction) -> Vec<(usize, usize, f64)> {
    let mut entries: Vec<(usize, usize, f64)> = match &p.action_scores {
        Some(scores) => scores.clone(),
        None => {
            let outer = outer_product_scores(&p.verb_logits, &p.noun_logits);
            (0..p.verb_logits.len())
                .flat_map(|v| (0..p.noun_logits.len()).map(move |n| (v, n)))
                .map(|(v, n)| (v, n, outer.at(v, n)))
                .collect()
        }
    };
    entries.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    entries
}

/// Fraction of clips whose true (verb, noun) pair appears in the top `k`
/// ranked actions. Both components must match.
pub fn action_topk_accuracy(
    predictions: &[ClipPrediction],
    truths: &[GroundTruth],
    k: usize,
) -> Result<f64> {
    if truths.is_empty() {
        return Err(Error::EmptyInput("action_topk_accuracy".into()));
    }
    let map = index_predictions(predictions, truths)?;
    let mut hits = 0usize;
    for t in truths {
        let ranked = ranked_actions(map[t.clip_id.as_str()]);
        if ranked
            .iter()
            .take(k)
            .any(|&(v, n, _)| v == t.verb && n == t.noun)
        {
            hits += 1;
        }
    }
    Ok(hits as f64 / truths.len() as f64)
}
