//! Flat run configuration shared by the CLI and the experiment runner.
//! Loadable from JSON; individual keys can be overridden with `key=value`
//! strings. Unknown keys are rejected.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::backbone::{AttentionVariant, BackboneConfig};
use crate::ctxt::VocabConfig;
use crate::data::markov::LogitNoiseModel;
use crate::data::{GeneratorConfig, NoiseProfile};
use crate::error::{Error, Result};
use crate::train::{TrainBackboneConfig, TrainCtxtConfig};

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub seed: u64,
    // Vocabulary.
    pub verbs: usize,
    pub nouns: usize,
    // Dataset.
    pub n_train_clips: usize,
    pub n_test_clips: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub n_distractors: usize,
    pub noise_sigma: f64,
    // Backbone.
    pub block_channels: Vec<usize>,
    pub shift_fraction: f64,
    pub reduction_ratio: usize,
    pub k_c_vid: usize,
    pub spatial_kernel: usize,
    pub temporal_enabled: bool,
    // Stage one training.
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub momentum: f64,
    // Temporal context.
    pub t_ctx: usize,
    pub rank: usize,
    pub ctxt_hidden: usize,
    pub dropout: f64,
    pub ctxt_epochs: usize,
    pub ctxt_batch_size: usize,
    pub ctxt_learning_rate: f64,
    pub context_videos: usize,
    pub context_test_videos: usize,
    pub video_length: usize,
    pub p_follow: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            seed: 0,
            verbs: 8,
            nouns: 12,
            n_train_clips: 2000,
            n_test_clips: 400,
            frames: 8,
            height: 32,
            width: 32,
            n_distractors: 4,
            noise_sigma: 0.04,
            block_channels: vec![8, 16, 32],
            shift_fraction: 0.5,
            reduction_ratio: 4,
            k_c_vid: 3,
            spatial_kernel: 7,
            temporal_enabled: true,
            epochs: 20,
            batch_size: 16,
            learning_rate: 0.02,
            momentum: 0.9,
            t_ctx: 5,
            rank: 4,
            ctxt_hidden: 64,
            dropout: 0.1,
            ctxt_epochs: 40,
            ctxt_batch_size: 32,
            ctxt_learning_rate: 1e-3,
            context_videos: 150,
            context_test_videos: 60,
            video_length: 12,
            p_follow: 0.8,
        }
    }
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<RunConfig> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Apply `key=value` overrides on top of this config. Values parse as
    /// JSON first (numbers, booleans, arrays) and fall back to strings.
    /// Unknown keys are rejected by the same deserializer the file path uses.
    pub fn with_overrides(&self, overrides: &[String]) -> Result<RunConfig> {
        let mut value = serde_json::to_value(self)?;
        let map = value
            .as_object_mut()
            .expect("RunConfig serializes to an object");
        for pair in overrides {
            let (key, raw) = pair.split_once('=').ok_or_else(|| {
                Error::Config(format!("override {pair:?} is not of the form key=value"))
            })?;
            let parsed: serde_json::Value = serde_json::from_str(raw)
                .unwrap_or_else(|_| serde_json::Value::String(raw.to_string()));
            map.insert(key.to_string(), parsed);
        }
        let cfg: RunConfig = serde_json::from_value(value)
            .map_err(|e| Error::Config(format!("configuration override: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.generator_config().validate()?;
        self.vocab_config()?;
        if self.batch_size == 0 || self.ctxt_batch_size == 0 {
            return Err(Error::Config("batch sizes must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.p_follow) {
            return Err(Error::Config(format!("p_follow {} outside [0, 1]", self.p_follow)));
        }
        Ok(())
    }

    pub fn generator_config(&self) -> GeneratorConfig {
        GeneratorConfig {
            frames: self.frames,
            height: self.height,
            width: self.width,
            verbs: self.verbs,
            nouns: self.nouns,
            n_distractors: self.n_distractors,
            noise_sigma: self.noise_sigma,
            profile: NoiseProfile::Rgb,
        }
    }

    pub fn backbone_config(&self, attention: AttentionVariant) -> BackboneConfig {
        BackboneConfig {
            verbs: self.verbs,
            nouns: self.nouns,
            in_channels: 3,
            block_channels: self.block_channels.clone(),
            kernel: 3,
            shift_fraction: self.shift_fraction,
            attention,
            reduction_ratio: self.reduction_ratio,
            k_c_vid: self.k_c_vid,
            spatial_kernel: self.spatial_kernel,
            input_offset: 0.5,
        }
    }

    pub fn vocab_config(&self) -> Result<VocabConfig> {
        VocabConfig::new(self.verbs, self.nouns, self.rank, self.t_ctx)
    }

    pub fn train_backbone_config(&self) -> TrainBackboneConfig {
        TrainBackboneConfig {
            epochs: self.epochs,
            batch_size: self.batch_size,
            lr: self.learning_rate,
            momentum: self.momentum,
            seed: self.seed,
        }
    }

    pub fn train_ctxt_config(&self) -> TrainCtxtConfig {
        TrainCtxtConfig {
            epochs: self.ctxt_epochs,
            batch_size: self.ctxt_batch_size,
            lr: self.ctxt_learning_rate,
            seed: self.seed,
        }
    }

    pub fn logit_noise_model(&self) -> LogitNoiseModel {
        LogitNoiseModel::default()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.json");
        std::fs::write(&path, r#"{"seed": 3, "not_a_key": 1}"#).unwrap();
        assert!(RunConfig::load(&path).is_err());
        std::fs::write(&path, r#"{"seed": 3}"#).unwrap();
        let cfg = RunConfig::load(&path).unwrap();
        assert_eq!(cfg.seed, 3);
        assert_eq!(cfg.verbs, 8);
    }

    #[test]
    fn overrides_parse_and_validate() {
        let cfg = RunConfig::default();
        let out = cfg
            .with_overrides(&["seed=9".into(), "block_channels=[4,8]".into()])
            .unwrap();
        assert_eq!(out.seed, 9);
        assert_eq!(out.block_channels, vec![4, 8]);
        assert!(cfg.with_overrides(&["bogus=1".into()]).is_err());
        assert!(cfg.with_overrides(&["p_follow=2.0".into()]).is_err());
    }
}
