//! End-to-end toy experiment: the attention comparison (baseline vs W2 vs
//! W3 on planted-signal clips, seen/unseen splits) and the temporal-context
//! comparison (outer product vs action prior vs context network on Markov
//! sequences). Every number in the report is recomputable from the emitted
//! prediction files and label manifests.

use std::fs;
use std::path::Path;

use crate::backbone::AttentionVariant;
use crate::config::RunConfig;
use crate::ctxt::ClipLogits;
use crate::data::io::{ensure_output_dir, write_manifest, Manifest, ManifestClip};
use crate::data::markov::{paired_verb_script, simulate_first_stage_logits, MarkovActionScript};
use crate::data::{generate_planted_dataset, GeneratorConfig, SyntheticClip};
use crate::elem::wide;
use crate::error::{Error, Result};
use crate::fusion::{ClipPrediction, GroundTruth};
use crate::parallel::{map_indexed, ExecMode};
use crate::pipeline::{
    context_comparison, save_backbone, save_ctxt, train_backbone_in_memory, BackboneModel,
};
use crate::predictions::PredictionFile;
use crate::report::{evaluate_split, render_report, ContextRow, ExperimentReport};
use crate::rng;
use crate::train::LabeledClip;

/// Seed offsets for the independent generator streams.
const SEED_TRAIN: u64 = 0;
const SEED_S1: u64 = 1;
const SEED_S2: u64 = 2;
const SEED_CTX_TRAIN: u64 = 3;
const SEED_CTX_TEST: u64 = 4;

fn to_labeled(clips: &[SyntheticClip]) -> Vec<LabeledClip<f32>> {
    clips
        .iter()
        .map(|c| LabeledClip {
            frames: c.frames.clone(),
            verb: c.verb,
            noun: c.noun,
        })
        .collect()
}

fn predict_set(
    model: &BackboneModel,
    clips: &[SyntheticClip],
    mode: ExecMode,
) -> Vec<ClipPrediction> {
    let store = &model.store;
    let net = &model.model;
    map_indexed(mode, clips.len(), |i| {
        let (v, n) = net
            .predict(store, &clips[i].frames)
            .expect("generated clips match the model");
        ClipPrediction {
            clip_id: clips[i].clip_id.clone(),
            modality: "rgb".into(),
            verb_logits: v.into_iter().map(wide).collect(),
            noun_logits: n.into_iter().map(wide).collect(),
            action_scores: None,
        }
    })
}

fn label_manifest(cfg: &RunConfig, split: &str, truths: &[GroundTruth]) -> Manifest {
    Manifest {
        version: crate::data::io::MANIFEST_VERSION.into(),
        task: "toy".into(),
        split: split.into(),
        verbs: cfg.verbs,
        nouns: cfg.nouns,
        frames: cfg.frames,
        height: cfg.height,
        width: cfg.width,
        clips: truths
            .iter()
            .map(|t| ManifestClip {
                clip_id: t.clip_id.clone(),
                verb: t.verb,
                noun: t.noun,
                video_id: t.video_id.clone(),
                position: t.start_time as usize,
                file: None,
            })
            .collect(),
    }
}

/// Attention comparison for one seed: returns (variant name, split, row)
/// evaluation rows and writes checkpoints + prediction files + label
/// manifests under `out_dir` when provided.
pub fn attention_comparison(
    cfg: &RunConfig,
    out_dir: Option<&Path>,
    mode: ExecMode,
    mut progress: impl FnMut(&str),
) -> Result<ExperimentReport> {
    let gen_cfg: GeneratorConfig = cfg.generator_config();
    progress(&format!(
        "generating {} train / {}+{} test clips (seed {})",
        cfg.n_train_clips, cfg.n_test_clips, cfg.n_test_clips, cfg.seed
    ));
    let (train_clips, train_truths, _) =
        generate_planted_dataset(cfg.seed + SEED_TRAIN, cfg.n_train_clips, &gen_cfg, mode)?;
    let (s1_clips, s1_truths, _) =
        generate_planted_dataset(cfg.seed + SEED_S1, cfg.n_test_clips, &gen_cfg, mode)?;
    let (s2_clips, s2_truths, _) =
        generate_planted_dataset(cfg.seed + SEED_S2, cfg.n_test_clips, &gen_cfg, mode)?;
    let train_data = to_labeled(&train_clips);
    drop(train_clips);
    let _ = train_truths;

    if let Some(dir) = out_dir {
        write_manifest(&dir.join("labels_s1"), &label_manifest(cfg, "s1", &s1_truths))?;
        write_manifest(&dir.join("labels_s2"), &label_manifest(cfg, "s2", &s2_truths))?;
        fs::create_dir_all(dir.join("checkpoints")).map_err(|e| Error::io(dir, e))?;
        fs::create_dir_all(dir.join("predictions")).map_err(|e| Error::io(dir, e))?;
    }

    let mut report = ExperimentReport::new();
    for variant in [AttentionVariant::None, AttentionVariant::W2, AttentionVariant::W3] {
        let name = match variant {
            AttentionVariant::None => "baseline",
            AttentionVariant::W2 => "+w2",
            AttentionVariant::W3 => "+w3",
        };
        progress(&format!("training {name} ({} epochs)", cfg.epochs));
        let model = train_backbone_in_memory(
            cfg.seed,
            {
                let mut bc = cfg.backbone_config(variant);
                bc.verbs = cfg.verbs;
                bc.nouns = cfg.nouns;
                bc
            },
            (cfg.frames, cfg.height, cfg.width),
            &train_data,
            &cfg.train_backbone_config(),
            mode,
            |log| {
                progress(&format!(
                    "  epoch {:>3}: loss {:.4} verb {:.3} noun {:.3}",
                    log.epoch, log.loss, log.verb_accuracy, log.noun_accuracy
                ));
            },
        )?;
        if let Some(dir) = out_dir {
            save_backbone(&dir.join(format!("checkpoints/{}.json", variant.name())), &model)?;
        }
        for (split, clips, truths) in [("s1", &s1_clips, &s1_truths), ("s2", &s2_clips, &s2_truths)] {
            let preds = predict_set(&model, clips, mode);
            if let Some(dir) = out_dir {
                PredictionFile::from_clip_predictions("toy", &preds)
                    .save(&dir.join(format!("predictions/{}_{split}.json", variant.name())))?;
            }
            let row = evaluate_split(name, split, &preds, truths)?;
            progress(&format!(
                "  {split}: verb {:.3} noun {:.3} action {:.3}",
                row.verb.top1, row.noun.top1, row.action.top1
            ));
            report.attention.push(row);
        }
    }
    Ok(report)
}

/// Sample Markov label sequences and simulate first-stage logits for them.
pub fn simulated_context_sequences(
    seed: u64,
    script: &MarkovActionScript,
    n_videos: usize,
    cfg: &RunConfig,
    id_prefix: &str,
) -> Vec<Vec<(ClipLogits<f64>, (usize, usize), String)>> {
    let mut label_rng = rng::derived(seed, 0x111);
    let mut logit_rng = rng::derived(seed, 0x222);
    let model = cfg.logit_noise_model();
    (0..n_videos)
        .map(|v| {
            let labels = script.sample_sequence(&mut label_rng);
            let logits = simulate_first_stage_logits(&mut logit_rng, &labels, cfg.verbs, cfg.nouns, &model);
            logits
                .into_iter()
                .zip(labels)
                .enumerate()
                .map(|(p, (l, label))| (l, label, format!("{id_prefix}_{v:04}_{p:02}")))
                .collect()
        })
        .collect()
}

fn sequences_truths(
    sequences: &[Vec<(ClipLogits<f64>, (usize, usize), String)>],
    prefix: &str,
) -> Vec<GroundTruth> {
    sequences
        .iter()
        .enumerate()
        .flat_map(|(v, video)| {
            video.iter().enumerate().map(move |(p, (_, (verb, noun), id))| GroundTruth {
                clip_id: id.clone(),
                verb: *verb,
                noun: *noun,
                video_id: format!("{prefix}_{v:04}"),
                start_time: p as f64,
            })
        })
        .collect()
}

/// Temporal-context comparison. Verb/noun logits are shared bit-for-bit by
/// the three methods; only action scoring differs.
pub fn context_comparison_experiment(
    cfg: &RunConfig,
    out_dir: Option<&Path>,
    mut progress: impl FnMut(&str),
) -> Result<Vec<ContextRow>> {
    let script = paired_verb_script(cfg.verbs, cfg.nouns, cfg.p_follow, cfg.video_length)?;
    progress(&format!(
        "sampling {} train / {} test context videos (p_follow {})",
        cfg.context_videos, cfg.context_test_videos, cfg.p_follow
    ));
    let train_seqs = simulated_context_sequences(
        cfg.seed + SEED_CTX_TRAIN,
        &script,
        cfg.context_videos,
        cfg,
        "ctxtrain",
    );
    let test_seqs = simulated_context_sequences(
        cfg.seed + SEED_CTX_TEST,
        &script,
        cfg.context_test_videos,
        cfg,
        "ctxtest",
    );

    progress(&format!("training context network ({} epochs)", cfg.ctxt_epochs));
    let vocab = cfg.vocab_config()?;
    let (comparison, ctxt_model) = context_comparison(
        &train_seqs,
        &test_seqs,
        &vocab,
        [cfg.ctxt_hidden, cfg.ctxt_hidden],
        cfg.dropout,
        &cfg.train_ctxt_config(),
    )?;

    let truths = sequences_truths(&test_seqs, "ctxtest");
    if let Some(dir) = out_dir {
        let ctx = dir.join("context");
        fs::create_dir_all(&ctx).map_err(|e| Error::io(&ctx, e))?;
        let script_text = serde_json::to_string_pretty(&script)?;
        fs::write(ctx.join("script.json"), script_text).map_err(|e| Error::io(&ctx, e))?;
        write_manifest(
            &ctx.join("labels_test"),
            &{
                let mut m = label_manifest(cfg, "ctx-test", &truths);
                m.task = "toy".into();
                m
            },
        )?;
        write_manifest(
            &ctx.join("labels_train"),
            &label_manifest(cfg, "ctx-train", &sequences_truths(&train_seqs, "ctxtrain")),
        )?;
        PredictionFile::from_clip_predictions("toy", &comparison.outer)
            .save(&ctx.join("first_stage_test.json"))?;
        let train_preds: Vec<ClipPrediction> = train_seqs
            .iter()
            .flat_map(|video| {
                video.iter().map(|(l, _, id)| ClipPrediction {
                    clip_id: id.clone(),
                    modality: "sim".into(),
                    verb_logits: l.verb.clone(),
                    noun_logits: l.noun.clone(),
                    action_scores: None,
                })
            })
            .collect();
        PredictionFile::from_clip_predictions("toy", &train_preds)
            .save(&ctx.join("first_stage_train.json"))?;
        PredictionFile::from_clip_predictions("toy", &comparison.prior)
            .save(&ctx.join("prior_test.json"))?;
        PredictionFile::from_clip_predictions("toy", &comparison.ctxt)
            .save(&ctx.join("ctxtnet_test.json"))?;
        save_ctxt(&ctx.join("ctxtnet.json"), &ctxt_model)?;
    }

    let mut rows = Vec::new();
    for (method, preds) in [
        ("outer-product", &comparison.outer),
        ("action-prior", &comparison.prior),
        ("ctxtnet", &comparison.ctxt),
    ] {
        let row = evaluate_split(method, "ctx", preds, &truths)?;
        progress(&format!(
            "  {method}: verb {:.3} noun {:.3} action {:.3}",
            row.verb.top1, row.noun.top1, row.action.top1
        ));
        rows.push(ContextRow {
            method: method.into(),
            verb_top1: row.verb.top1,
            noun_top1: row.noun.top1,
            action_top1: row.action.top1,
        });
    }
    Ok(rows)
}

/// Full experiment: both comparisons, reports written to `out_dir`.
pub fn run_experiment(
    cfg: &RunConfig,
    out_dir: &Path,
    force: bool,
    mode: ExecMode,
    mut progress: impl FnMut(&str),
) -> Result<ExperimentReport> {
    cfg.validate()?;
    ensure_output_dir(out_dir, force)?;
    let mut report = attention_comparison(cfg, Some(out_dir), mode, &mut progress)?;
    report.context = context_comparison_experiment(cfg, Some(out_dir), &mut progress)?;

    let text = render_report(&report);
    fs::write(out_dir.join("report.txt"), text.as_bytes())
        .map_err(|e| Error::io(out_dir.join("report.txt"), e))?;
    let json = serde_json::to_string_pretty(&report)?;
    fs::write(out_dir.join("report.json"), json.as_bytes())
        .map_err(|e| Error::io(out_dir.join("report.json"), e))?;
    Ok(report)
}
