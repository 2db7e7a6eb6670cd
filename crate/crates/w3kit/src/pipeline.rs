//! Filesystem-level operations behind the CLI subcommands: dataset
//! generation, two-stage training, prediction, ensembling and evaluation.
//! The experiment runner composes these same functions, so everything the
//! reports claim can be recomputed from the emitted files.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backbone::{AttentionVariant, BackboneConfig, ToyBackbone};
use crate::checkpoint::Container;
use crate::config::RunConfig;
use crate::ctxt::{
    action_prediction, action_prior_baseline, action_prior_from_labels, build_context_window,
    ClipLogits, CtxtNet, VocabConfig,
};
use crate::data::io::{write_dataset, Dataset};
use crate::data::markov::MarkovActionScript;
use crate::data::{generate_planted_dataset, generate_scripted_dataset, NoiseProfile};
use crate::elem::wide;
use crate::error::{Error, Result};
use crate::fusion::{ensemble_logits, ClipPrediction};
use crate::parallel::{map_indexed, ExecMode};
use crate::params::ParamStore;
use crate::predictions::PredictionFile;
use crate::report::{evaluate_split, EvalRow};
use crate::tensor::Mat;
use crate::train::{
    train_backbone, train_ctxtnet, EpochLog, LabeledClip, TrainBackboneConfig, TrainCtxtConfig,
};

pub const PRIOR_EPSILON: f64 = 1e-8;

/// Generate a dataset directory. Without a script every clip is its own
/// single-clip video with balanced labels; with a script, clips form videos
/// whose labels follow the Markov transitions.
pub fn gen_data(
    cfg: &RunConfig,
    out: &Path,
    split: &str,
    n_clips: usize,
    profile: NoiseProfile,
    script: Option<&MarkovActionScript>,
    n_videos: usize,
    force: bool,
    mode: ExecMode,
) -> Result<usize> {
    let mut gen_cfg = cfg.generator_config();
    gen_cfg.profile = profile;
    let clips = match script {
        None => generate_planted_dataset(cfg.seed, n_clips, &gen_cfg, mode)?.0,
        Some(script) => generate_scripted_dataset(cfg.seed, script, n_videos, &gen_cfg, mode)?.0,
    };
    write_dataset(
        out,
        split,
        &clips,
        (gen_cfg.frames, gen_cfg.height, gen_cfg.width),
        (gen_cfg.verbs, gen_cfg.nouns),
        force,
    )?;
    Ok(clips.len())
}

/// Backbone checkpoint metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackboneMeta {
    pub config: BackboneConfig,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
}

/// A backbone plus the store holding its parameters.
pub struct BackboneModel {
    pub store: ParamStore<f32>,
    pub model: ToyBackbone,
    pub meta: BackboneMeta,
}

pub fn build_backbone(seed: u64, config: BackboneConfig, shape: (usize, usize, usize)) -> Result<BackboneModel> {
    let mut store = ParamStore::new(seed);
    let model = ToyBackbone::new(&mut store, config.clone())?;
    Ok(BackboneModel {
        store,
        model,
        meta: BackboneMeta {
            config,
            frames: shape.0,
            height: shape.1,
            width: shape.2,
        },
    })
}

pub fn save_backbone(path: &Path, model: &BackboneModel) -> Result<()> {
    let meta = serde_json::to_value(&model.meta)?;
    Container::from_store("backbone", meta, &model.store).save(path)
}

pub fn load_backbone(path: &Path) -> Result<BackboneModel> {
    let container = Container::load(path)?;
    container.expect_kind("backbone")?;
    let meta: BackboneMeta = serde_json::from_value(container.meta.clone())?;
    let mut fresh = build_backbone(
        container.seed,
        meta.config.clone(),
        (meta.frames, meta.height, meta.width),
    )?;
    container.apply_to_store(&mut fresh.store)?;
    Ok(fresh)
}

fn check_vocab(manifest_vocab: (usize, usize), model_vocab: (usize, usize)) -> Result<()> {
    if manifest_vocab != model_vocab {
        return Err(Error::VocabMismatch {
            checkpoint: format!("{} verbs x {} nouns", model_vocab.0, model_vocab.1),
            dataset: format!("{} verbs x {} nouns", manifest_vocab.0, manifest_vocab.1),
        });
    }
    Ok(())
}

/// Train a backbone on a dataset directory and write the checkpoint.
pub fn train_backbone_cmd(
    data_dir: &Path,
    out_ckpt: &Path,
    attention: AttentionVariant,
    cfg: &RunConfig,
    mode: ExecMode,
    mut on_epoch: impl FnMut(&EpochLog),
) -> Result<()> {
    let dataset = Dataset::open(data_dir)?;
    let mut backbone_cfg = cfg.backbone_config(attention);
    backbone_cfg.verbs = dataset.manifest.verbs;
    backbone_cfg.nouns = dataset.manifest.nouns;
    let mut model = build_backbone(
        cfg.seed,
        backbone_cfg,
        (
            dataset.manifest.frames,
            dataset.manifest.height,
            dataset.manifest.width,
        ),
    )?;
    let data: Vec<LabeledClip<f32>> = (0..dataset.len())
        .map(|i| {
            Ok(LabeledClip {
                frames: dataset.load_clip(i)?,
                verb: dataset.manifest.clips[i].verb,
                noun: dataset.manifest.clips[i].noun,
            })
        })
        .collect::<Result<_>>()?;
    let train_cfg = cfg.train_backbone_config();
    train_backbone(&mut model.store, &model.model, &data, &train_cfg, mode, |log| {
        on_epoch(log)
    })?;
    save_backbone(out_ckpt, &model)
}

/// In-memory variant used by the experiment runner: train on preloaded clips.
pub fn train_backbone_in_memory(
    seed: u64,
    config: BackboneConfig,
    shape: (usize, usize, usize),
    data: &[LabeledClip<f32>],
    train_cfg: &TrainBackboneConfig,
    mode: ExecMode,
    on_epoch: impl FnMut(&EpochLog),
) -> Result<BackboneModel> {
    let mut model = build_backbone(seed, config, shape)?;
    train_backbone(&mut model.store, &model.model, data, train_cfg, mode, on_epoch)?;
    Ok(model)
}

/// Context-network checkpoint metadata.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CtxtMeta {
    pub verbs: usize,
    pub nouns: usize,
    pub rank: usize,
    pub window: usize,
    pub hidden: [usize; 2],
    pub dropout: f64,
}

pub struct CtxtModel {
    pub store: ParamStore<f64>,
    pub net: CtxtNet,
    pub meta: CtxtMeta,
}

pub fn build_ctxt(seed: u64, meta: CtxtMeta) -> Result<CtxtModel> {
    let vocab = VocabConfig::new(meta.verbs, meta.nouns, meta.rank, meta.window)?;
    let mut store = ParamStore::new(seed);
    let net = CtxtNet::new(&mut store, "ctxt", vocab, meta.hidden, meta.dropout)?;
    Ok(CtxtModel { store, net, meta })
}

pub fn save_ctxt(path: &Path, model: &CtxtModel) -> Result<()> {
    let meta = serde_json::to_value(&model.meta)?;
    Container::from_store("ctxtnet", meta, &model.store).save(path)
}

pub fn load_ctxt(path: &Path) -> Result<CtxtModel> {
    let container = Container::load(path)?;
    container.expect_kind("ctxtnet")?;
    let meta: CtxtMeta = serde_json::from_value(container.meta.clone())?;
    let mut model = build_ctxt(container.seed, meta)?;
    container.apply_to_store(&mut model.store)?;
    Ok(model)
}

/// Per-video sequences of first-stage logits taken from a prediction file,
/// ordered by clip position, with the matching (verb, noun) labels.
pub fn sequences_from_predictions(
    dataset: &Dataset,
    preds: &PredictionFile,
) -> Result<Vec<Vec<(ClipLogits<f64>, (usize, usize), String)>>> {
    let missing: Vec<String> = dataset
        .manifest
        .clips
        .iter()
        .filter(|c| !preds.results.contains_key(&c.clip_id))
        .map(|c| c.clip_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::MissingPredictions(missing));
    }
    Ok(dataset
        .manifest
        .video_sequences()
        .into_iter()
        .map(|indices| {
            indices
                .into_iter()
                .map(|i| {
                    let clip = &dataset.manifest.clips[i];
                    let r = &preds.results[&clip.clip_id];
                    (
                        ClipLogits {
                            verb: r.verb.clone(),
                            noun: r.noun.clone(),
                        },
                        (clip.verb, clip.noun),
                        clip.clip_id.clone(),
                    )
                })
                .collect()
        })
        .collect())
}

/// Run the backbone over a dataset and write the prediction file. With a
/// context checkpoint, per-clip action scores (top-100) are attached; verb
/// and noun logits are always the raw first-stage outputs.
pub fn predict_cmd(
    data_dir: &Path,
    ckpt: &Path,
    ctxt_ckpt: Option<&Path>,
    out: &Path,
    mode: ExecMode,
) -> Result<()> {
    let dataset = Dataset::open(data_dir)?;
    let model = load_backbone(ckpt)?;
    check_vocab(
        (dataset.manifest.verbs, dataset.manifest.nouns),
        (model.meta.config.verbs, model.meta.config.nouns),
    )?;

    let clips = dataset.load_all()?;
    let store = &model.store;
    let net = &model.model;
    let logits: Vec<(Vec<f64>, Vec<f64>)> = map_indexed(mode, clips.len(), |i| {
        let (v, n) = net
            .predict(store, &clips[i])
            .expect("dataset clips match the checkpoint shape");
        (
            v.into_iter().map(wide).collect(),
            n.into_iter().map(wide).collect(),
        )
    });

    let mut file = PredictionFile::new(&dataset.manifest.task);
    for (i, (v, n)) in logits.iter().enumerate() {
        file.insert(&dataset.manifest.clips[i].clip_id, v.clone(), n.clone(), None);
    }

    if let Some(ctxt_path) = ctxt_ckpt {
        let ctxt = load_ctxt(ctxt_path)?;
        check_vocab(
            (dataset.manifest.verbs, dataset.manifest.nouns),
            (ctxt.meta.verbs, ctxt.meta.nouns),
        )?;
        let sequences = sequences_from_predictions(&dataset, &file)?;
        for video in &sequences {
            let seq: Vec<ClipLogits<f64>> = video.iter().map(|(l, _, _)| l.clone()).collect();
            for (i, (_, _, clip_id)) in video.iter().enumerate() {
                let window = build_context_window(&seq, i, ctxt.meta.window)?;
                let scores = ctxt.net.forward_eval(&ctxt.store, &window)?;
                let ranked = action_prediction(&scores.scores, ctxt.net.config());
                let entry = file.results.get_mut(clip_id).expect("clip inserted above");
                entry.action = Some(
                    ranked
                        .into_iter()
                        .take(crate::predictions::ACTION_TOP_K)
                        .map(|(v, n, s)| (v as u32, n as u32, s))
                        .collect(),
                );
            }
        }
    }
    file.save(out)
}

/// Train the context network on a frozen first-stage prediction dump.
pub fn train_ctxtnet_cmd(
    predictions: &Path,
    data_dir: &Path,
    out_ckpt: &Path,
    cfg: &RunConfig,
) -> Result<Vec<f64>> {
    let dataset = Dataset::open(data_dir)?;
    let preds = PredictionFile::load(predictions)?;
    let vocab = preds
        .vocab()
        .ok_or_else(|| Error::EmptyInput("prediction file has no results".into()))?;
    check_vocab((dataset.manifest.verbs, dataset.manifest.nouns), vocab)?;

    let meta = CtxtMeta {
        verbs: dataset.manifest.verbs,
        nouns: dataset.manifest.nouns,
        rank: cfg.rank,
        window: cfg.t_ctx,
        hidden: [cfg.ctxt_hidden, cfg.ctxt_hidden],
        dropout: cfg.dropout,
    };
    let mut model = build_ctxt(cfg.seed, meta)?;
    let sequences = sequences_from_predictions(&dataset, &preds)?;
    let mut examples = Vec::new();
    for video in &sequences {
        let seq: Vec<ClipLogits<f64>> = video.iter().map(|(l, _, _)| l.clone()).collect();
        for (i, (_, label, _)) in video.iter().enumerate() {
            examples.push((build_context_window(&seq, i, cfg.t_ctx)?, *label));
        }
    }
    let losses = train_ctxtnet(&mut model.store, &model.net, &examples, &cfg.train_ctxt_config())?;
    save_ctxt(out_ckpt, &model)?;
    Ok(losses)
}

/// Attach context-network action scores to an in-memory logit sequence set.
pub fn score_sequences_with_ctxt(
    model: &CtxtModel,
    sequences: &[Vec<ClipLogits<f64>>],
) -> Result<Vec<Vec<Mat<f64>>>> {
    sequences
        .iter()
        .map(|seq| {
            (0..seq.len())
                .map(|i| {
                    let window = build_context_window(seq, i, model.meta.window)?;
                    Ok(model.net.forward_eval(&model.store, &window)?.scores)
                })
                .collect()
        })
        .collect()
}

/// Merge prediction files by weighted logit-level averaging. Files are
/// tagged by their stem and folded in ascending tag order.
pub fn ensemble_cmd(inputs: &[(String, PredictionFile)], weights: &[f64], out: &Path) -> Result<()> {
    if inputs.is_empty() {
        return Err(Error::EmptyInput("ensemble".into()));
    }
    let task = inputs[0].1.task.clone();
    let ids: Vec<String> = inputs[0].1.results.keys().cloned().collect();
    for (tag, file) in inputs {
        if file.results.len() != ids.len() || !ids.iter().all(|id| file.results.contains_key(id)) {
            return Err(Error::Config(format!(
                "prediction file {tag:?} covers a different clip set"
            )));
        }
    }
    let mut fused = PredictionFile::new(&task);
    for id in &ids {
        let members: Vec<ClipPrediction> = inputs
            .iter()
            .map(|(tag, file)| {
                let r = &file.results[id];
                ClipPrediction {
                    clip_id: id.clone(),
                    modality: tag.clone(),
                    verb_logits: r.verb.clone(),
                    noun_logits: r.noun.clone(),
                    action_scores: None,
                }
            })
            .collect();
        let merged = ensemble_logits(&members, weights)?;
        fused.insert(id, merged.verb_logits, merged.noun_logits, None);
    }
    fused.save(out)
}

/// Evaluate a prediction file against a dataset's ground truth.
pub fn evaluate_cmd(predictions: &Path, data_dir: &Path, model_name: &str) -> Result<EvalRow> {
    let dataset = Dataset::open(data_dir)?;
    let preds = PredictionFile::load(predictions)?;
    if let Some(vocab) = preds.vocab() {
        check_vocab((dataset.manifest.verbs, dataset.manifest.nouns), vocab)?;
    }
    let clip_preds = preds.to_clip_predictions("eval");
    let truths = dataset.manifest.truths();
    evaluate_split(model_name, &dataset.manifest.split, &clip_preds, &truths)
}

/// Outer-product / action-prior / context-network comparison over simulated
/// or real logit sequences. Returns predictions for each method; verb and
/// noun logits are shared (bit-identical) across the three.
pub struct ContextComparison {
    pub outer: Vec<ClipPrediction>,
    pub prior: Vec<ClipPrediction>,
    pub ctxt: Vec<ClipPrediction>,
}

pub fn context_comparison(
    train_sequences: &[Vec<(ClipLogits<f64>, (usize, usize), String)>],
    test_sequences: &[Vec<(ClipLogits<f64>, (usize, usize), String)>],
    vocab: &VocabConfig,
    hidden: [usize; 2],
    dropout: f64,
    train_cfg: &TrainCtxtConfig,
) -> Result<(ContextComparison, CtxtModel)> {
    // Stage-two training set.
    let mut examples = Vec::new();
    for video in train_sequences {
        let seq: Vec<ClipLogits<f64>> = video.iter().map(|(l, _, _)| l.clone()).collect();
        for (i, (_, label, _)) in video.iter().enumerate() {
            examples.push((build_context_window(&seq, i, vocab.window)?, *label));
        }
    }
    let meta = CtxtMeta {
        verbs: vocab.verbs,
        nouns: vocab.nouns,
        rank: vocab.rank,
        window: vocab.window,
        hidden,
        dropout,
    };
    let mut model = build_ctxt(train_cfg.seed, meta)?;
    train_ctxtnet(&mut model.store, &model.net, &examples, train_cfg)?;

    // Action prior from training labels only.
    let train_labels = train_sequences
        .iter()
        .flat_map(|v| v.iter().map(|(_, label, _)| *label));
    let prior = action_prior_from_labels(train_labels, vocab.verbs, vocab.nouns, PRIOR_EPSILON);

    let mut outer = Vec::new();
    let mut prior_preds = Vec::new();
    let mut ctxt_preds = Vec::new();
    for video in test_sequences {
        let seq: Vec<ClipLogits<f64>> = video.iter().map(|(l, _, _)| l.clone()).collect();
        for (i, (logits, _, clip_id)) in video.iter().enumerate() {
            let base = ClipPrediction {
                clip_id: clip_id.clone(),
                modality: "sim".into(),
                verb_logits: logits.verb.clone(),
                noun_logits: logits.noun.clone(),
                action_scores: None,
            };
            outer.push(base.clone());

            let prior_scores = action_prior_baseline(&logits.verb, &logits.noun, &prior)?;
            let mut with_prior = base.clone();
            with_prior.action_scores = Some(
                action_prediction(&prior_scores, vocab)
                    .into_iter()
                    .take(crate::predictions::ACTION_TOP_K)
                    .collect(),
            );
            prior_preds.push(with_prior);

            let window = build_context_window(&seq, i, vocab.window)?;
            let scores = model.net.forward_eval(&model.store, &window)?;
            let mut with_ctxt = base;
            with_ctxt.action_scores = Some(
                action_prediction(&scores.scores, vocab)
                    .into_iter()
                    .take(crate::predictions::ACTION_TOP_K)
                    .collect(),
            );
            ctxt_preds.push(with_ctxt);
        }
    }
    Ok((
        ContextComparison {
            outer,
            prior: prior_preds,
            ctxt: ctxt_preds,
        },
        model,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::parallel::ExecMode;

    fn small_cfg() -> RunConfig {
        RunConfig {
            n_train_clips: 8,
            n_test_clips: 4,
            epochs: 1,
            batch_size: 4,
            block_channels: vec![4, 8],
            ..RunConfig::default()
        }
    }

    #[test]
    fn gen_train_predict_evaluate_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_cfg();
        let data = dir.path().join("data");
        let n = gen_data(
            &cfg,
            &data,
            "s1",
            8,
            NoiseProfile::Rgb,
            None,
            0,
            false,
            ExecMode::Sequential,
        )
        .unwrap();
        assert_eq!(n, 8);

        let ckpt = dir.path().join("model.json");
        train_backbone_cmd(
            &data,
            &ckpt,
            AttentionVariant::None,
            &cfg,
            ExecMode::Sequential,
            |_| {},
        )
        .unwrap();

        let preds = dir.path().join("preds.json");
        predict_cmd(&data, &ckpt, None, &preds, ExecMode::Sequential).unwrap();
        let row = evaluate_cmd(&preds, &data, "baseline").unwrap();
        assert!(row.verb.top1 >= 0.0 && row.verb.top1 <= 1.0);
        assert!(row.verb.top1 <= row.verb.top5);
    }

    #[test]
    fn predict_rejects_vocab_mismatch() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = small_cfg();
        let data = dir.path().join("data");
        gen_data(&cfg, &data, "s1", 4, NoiseProfile::Rgb, None, 0, false, ExecMode::Sequential).unwrap();

        // Model built for a different vocabulary.
        let model = build_backbone(
            0,
            BackboneConfig::toy(5, 7, AttentionVariant::None),
            (8, 32, 32),
        )
        .unwrap();
        let ckpt = dir.path().join("model.json");
        save_backbone(&ckpt, &model).unwrap();
        let out = dir.path().join("preds.json");
        let err = predict_cmd(&data, &ckpt, None, &out, ExecMode::Sequential);
        assert!(matches!(err, Err(Error::VocabMismatch { .. })));
    }

    #[test]
    fn backbone_checkpoint_roundtrip_preserves_predictions() {
        let dir = tempfile::tempdir().unwrap();
        let model = build_backbone(
            4,
            BackboneConfig::toy(8, 12, AttentionVariant::W3),
            (4, 16, 16),
        )
        .unwrap();
        let path = dir.path().join("model.json");
        save_backbone(&path, &model).unwrap();
        let restored = load_backbone(&path).unwrap();

        let mut r = crate::rng::seeded(1);
        let clip = crate::tensor::FeatureMap::from_fn(4, 3, 16, 16, |_, _, _, _| {
            crate::rng::uniform(&mut r, 0.0, 1.0)
        });
        let (v1, n1) = model.model.predict(&model.store, &clip).unwrap();
        let (v2, n2) = restored.model.predict(&restored.store, &clip).unwrap();
        assert_eq!(v1, v2);
        assert_eq!(n1, n2);
    }
}
