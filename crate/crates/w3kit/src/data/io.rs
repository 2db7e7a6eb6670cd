//! On-disk dataset layout: a JSON manifest plus one little-endian f32 binary
//! tensor per clip under `clips/`.

use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::data::SyntheticClip;
use crate::error::{Error, Result};
use crate::fusion::GroundTruth;
use crate::tensor::FeatureMap;

pub const MANIFEST_VERSION: &str = "w3kit-v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestClip {
    pub clip_id: String,
    pub verb: usize,
    pub noun: usize,
    pub video_id: String,
    pub position: usize,
    /// Relative path of the clip tensor; absent for label-only manifests.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub file: Option<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub version: String,
    pub task: String,
    pub split: String,
    pub verbs: usize,
    pub nouns: usize,
    pub frames: usize,
    pub height: usize,
    pub width: usize,
    pub clips: Vec<ManifestClip>,
}

impl Manifest {
    pub fn truths(&self) -> Vec<GroundTruth> {
        self.clips
            .iter()
            .map(|c| GroundTruth {
                clip_id: c.clip_id.clone(),
                verb: c.verb,
                noun: c.noun,
                video_id: c.video_id.clone(),
                start_time: c.position as f64,
            })
            .collect()
    }

    /// Clip indices grouped by video, ordered by position within each video;
    /// videos ordered by id.
    pub fn video_sequences(&self) -> Vec<Vec<usize>> {
        let mut by_video: std::collections::BTreeMap<&str, Vec<usize>> = Default::default();
        for (i, c) in self.clips.iter().enumerate() {
            by_video.entry(c.video_id.as_str()).or_default().push(i);
        }
        by_video
            .into_values()
            .map(|mut idx| {
                idx.sort_by_key(|&i| self.clips[i].position);
                idx
            })
            .collect()
    }
}

/// Refuse to write into an existing non-empty directory unless forced.
pub fn ensure_output_dir(dir: &Path, force: bool) -> Result<()> {
    if dir.exists() {
        let non_empty = fs::read_dir(dir)
            .map_err(|e| Error::io(dir, e))?
            .next()
            .is_some();
        if non_empty && !force {
            return Err(Error::OutputExists(dir.to_path_buf()));
        }
        if non_empty {
            fs::remove_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        }
    }
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    Ok(())
}

fn clip_bytes(frames: &FeatureMap<f32>) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(frames.as_slice().len() * 4);
    for &v in frames.as_slice() {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    bytes
}

/// Write clips and manifest into `dir`.
pub fn write_dataset(
    dir: &Path,
    split: &str,
    clips: &[SyntheticClip],
    shape: (usize, usize, usize),
    vocab: (usize, usize),
    force: bool,
) -> Result<()> {
    ensure_output_dir(dir, force)?;
    let clip_dir = dir.join("clips");
    fs::create_dir_all(&clip_dir).map_err(|e| Error::io(&clip_dir, e))?;

    let mut entries = Vec::with_capacity(clips.len());
    for clip in clips {
        let rel = format!("clips/{}.bin", clip.clip_id);
        let path = dir.join(&rel);
        let mut f = fs::File::create(&path).map_err(|e| Error::io(&path, e))?;
        f.write_all(&clip_bytes(&clip.frames)).map_err(|e| Error::io(&path, e))?;
        entries.push(ManifestClip {
            clip_id: clip.clip_id.clone(),
            verb: clip.verb,
            noun: clip.noun,
            video_id: clip.video_id.clone(),
            position: clip.position,
            file: Some(rel),
        });
    }
    let manifest = Manifest {
        version: MANIFEST_VERSION.into(),
        task: "toy".into(),
        split: split.into(),
        verbs: vocab.0,
        nouns: vocab.1,
        frames: shape.0,
        height: shape.1,
        width: shape.2,
        clips: entries,
    };
    write_manifest(dir, &manifest)
}

/// Write a label-only manifest (no pixel tensors).
pub fn write_manifest(dir: &Path, manifest: &Manifest) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let path = dir.join("manifest.json");
    let text = serde_json::to_string_pretty(manifest)?;
    fs::write(&path, text.as_bytes()).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// A dataset directory opened for reading.
#[derive(Debug, Clone)]
pub struct Dataset {
    root: PathBuf,
    pub manifest: Manifest,
}

impl Dataset {
    pub fn open(dir: &Path) -> Result<Dataset> {
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: Manifest = serde_json::from_str(&text)?;
        if manifest.version != MANIFEST_VERSION {
            return Err(Error::Version {
                expected: MANIFEST_VERSION.into(),
                found: manifest.version,
            });
        }
        Ok(Dataset {
            root: dir.to_path_buf(),
            manifest,
        })
    }

    pub fn len(&self) -> usize {
        self.manifest.clips.len()
    }

    pub fn is_empty(&self) -> bool {
        self.manifest.clips.is_empty()
    }

    pub fn load_clip(&self, index: usize) -> Result<FeatureMap<f32>> {
        let entry = &self.manifest.clips[index];
        let rel = entry.file.as_ref().ok_or_else(|| {
            Error::Config(format!("clip {:?} has no tensor file", entry.clip_id))
        })?;
        let path = self.root.join(rel);
        let mut bytes = Vec::new();
        fs::File::open(&path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(&path, e))?;
        let (t, h, w) = (self.manifest.frames, self.manifest.height, self.manifest.width);
        let expect = t * 3 * h * w * 4;
        if bytes.len() != expect {
            return Err(Error::shape(
                format!("clip file {rel}"),
                format!("{expect} bytes"),
                format!("{} bytes", bytes.len()),
            ));
        }
        let data: Vec<f32> = bytes
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        FeatureMap::from_vec(t, 3, h, w, data)
    }

    /// Load every clip tensor (index-ordered), in memory.
    pub fn load_all(&self) -> Result<Vec<FeatureMap<f32>>> {
        (0..self.len()).map(|i| self.load_clip(i)).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{generate_planted_dataset, GeneratorConfig};
    use crate::parallel::ExecMode;

    #[test]
    fn roundtrip_preserves_bits_and_labels() {
        let dir = tempfile::tempdir().unwrap();
        let cfg = GeneratorConfig::default();
        let (clips, _, _) = generate_planted_dataset(2, 5, &cfg, ExecMode::Sequential).unwrap();
        write_dataset(dir.path(), "s1", &clips, (8, 32, 32), (8, 12), false).unwrap();
        let ds = Dataset::open(dir.path()).unwrap();
        assert_eq!(ds.len(), 5);
        for (i, clip) in clips.iter().enumerate() {
            let loaded = ds.load_clip(i).unwrap();
            assert_eq!(loaded.as_slice(), clip.frames.as_slice());
            assert_eq!(ds.manifest.clips[i].verb, clip.verb);
        }
    }

    #[test]
    fn refuses_nonempty_dir_without_force() {
        let dir = tempfile::tempdir().unwrap();
        std::fs::write(dir.path().join("existing.txt"), b"x").unwrap();
        let cfg = GeneratorConfig::default();
        let (clips, _, _) = generate_planted_dataset(2, 2, &cfg, ExecMode::Sequential).unwrap();
        let err = write_dataset(dir.path(), "s1", &clips, (8, 32, 32), (8, 12), false);
        assert!(matches!(err, Err(Error::OutputExists(_))));
        write_dataset(dir.path(), "s1", &clips, (8, 32, 32), (8, 12), true).unwrap();
        assert!(!dir.path().join("existing.txt").exists());
    }

    #[test]
    fn video_sequences_group_and_order() {
        let manifest = Manifest {
            version: MANIFEST_VERSION.into(),
            task: "toy".into(),
            split: "ctx".into(),
            verbs: 2,
            nouns: 2,
            frames: 1,
            height: 16,
            width: 16,
            clips: vec![
                ManifestClip { clip_id: "a".into(), verb: 0, noun: 0, video_id: "v1".into(), position: 1, file: None },
                ManifestClip { clip_id: "b".into(), verb: 0, noun: 0, video_id: "v0".into(), position: 0, file: None },
                ManifestClip { clip_id: "c".into(), verb: 0, noun: 0, video_id: "v1".into(), position: 0, file: None },
            ],
        };
        let seqs = manifest.video_sequences();
        assert_eq!(seqs, vec![vec![1], vec![2, 0]]);
    }
}
