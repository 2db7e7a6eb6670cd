//! The prediction file format (bit-exact contract):
//!
//! ```json
//! {"version":"w3kit-v1","task":"toy","results":{
//!    "<clip_id>": {"verb":[...], "noun":[...], "action":[[v,n,score], ...]}}}
//! ```
//!
//! `action` is optional and truncated to the top 100 pairs. Results are keyed
//! by clip id in a sorted map, so serialization is deterministic.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fusion::ClipPrediction;

pub const PREDICTION_VERSION: &str = "w3kit-v1";

/// Ranked actions are truncated to this many pairs on save.
pub const ACTION_TOP_K: usize = 100;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ClipResult {
    pub verb: Vec<f64>,
    pub noun: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub action: Option<Vec<(u32, u32, f64)>>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionFile {
    pub version: String,
    pub task: String,
    pub results: BTreeMap<String, ClipResult>,
}

impl PredictionFile {
    pub fn new(task: &str) -> Self {
        PredictionFile {
            version: PREDICTION_VERSION.into(),
            task: task.into(),
            results: BTreeMap::new(),
        }
    }

    pub fn insert(&mut self, clip_id: &str, verb: Vec<f64>, noun: Vec<f64>, action: Option<Vec<(usize, usize, f64)>>) {
        let action = action.map(|ranked| {
            ranked
                .into_iter()
                .take(ACTION_TOP_K)
                .map(|(v, n, s)| (v as u32, n as u32, s))
                .collect()
        });
        self.results.insert(
            clip_id.to_string(),
            ClipResult {
                verb,
                noun,
                action,
            },
        );
    }

    /// View as fusion-layer predictions under one modality tag.
    pub fn to_clip_predictions(&self, modality: &str) -> Vec<ClipPrediction> {
        self.results
            .iter()
            .map(|(id, r)| ClipPrediction {
                clip_id: id.clone(),
                modality: modality.to_string(),
                verb_logits: r.verb.clone(),
                noun_logits: r.noun.clone(),
                action_scores: r.action.as_ref().map(|a| {
                    a.iter().map(|&(v, n, s)| (v as usize, n as usize, s)).collect()
                }),
            })
            .collect()
    }

    pub fn from_clip_predictions(task: &str, preds: &[ClipPrediction]) -> Self {
        let mut file = PredictionFile::new(task);
        for p in preds {
            file.insert(
                &p.clip_id,
                p.verb_logits.clone(),
                p.noun_logits.clone(),
                p.action_scores.clone(),
            );
        }
        file
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text.as_bytes()).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<PredictionFile> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: PredictionFile = serde_json::from_str(&text)?;
        if file.version != PREDICTION_VERSION {
            return Err(Error::Version {
                expected: PREDICTION_VERSION.into(),
                found: file.version,
            });
        }
        Ok(file)
    }

    /// Vocabulary sizes of the stored logits, from the first entry.
    pub fn vocab(&self) -> Option<(usize, usize)> {
        self.results.values().next().map(|r| (r.verb.len(), r.noun.len()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn roundtrip_and_action_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("preds.json");
        let mut f = PredictionFile::new("toy");
        let long: Vec<(usize, usize, f64)> = (0..150).map(|i| (i % 8, i % 12, 1.0 / (i + 1) as f64)).collect();
        f.insert("clip_b", vec![0.1, 0.9], vec![0.5], Some(long));
        f.insert("clip_a", vec![0.2, 0.8], vec![0.4], None);
        f.save(&path).unwrap();

        let loaded = PredictionFile::load(&path).unwrap();
        assert_eq!(loaded.results.len(), 2);
        assert_eq!(loaded.results["clip_b"].action.as_ref().unwrap().len(), ACTION_TOP_K);
        assert!(loaded.results["clip_a"].action.is_none());
        // BTreeMap keys serialize sorted.
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.find("clip_a").unwrap() < text.find("clip_b").unwrap());
    }

    #[test]
    fn version_field_is_enforced() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("preds.json");
        std::fs::write(&path, r#"{"version":"other","task":"toy","results":{}}"#).unwrap();
        assert!(PredictionFile::load(&path).is_err());
    }

    #[test]
    fn serialization_is_deterministic() {
        let mut f = PredictionFile::new("toy");
        f.insert("z", vec![1.0], vec![2.0], Some(vec![(1, 2, 0.5)]));
        f.insert("a", vec![0.25], vec![0.125], None);
        let s1 = serde_json::to_string(&f).unwrap();
        let s2 = serde_json::to_string(&f).unwrap();
        assert_eq!(s1, s2);
    }
}
