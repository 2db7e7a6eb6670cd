//! The "w3kit-v1" checkpoint container: a JSON document carrying a kind tag,
//! model metadata and every parameter tensor as shape + flat f64 values, in
//! registration order (so saves are byte-reproducible).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::elem::{fl, wide, Elem};
use crate::error::{Error, Result};
use crate::params::ParamStore;

pub const CONTAINER_VERSION: &str = "w3kit-v1";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SavedParam {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Container {
    pub version: String,
    pub kind: String,
    pub seed: u64,
    pub meta: serde_json::Value,
    pub params: Vec<SavedParam>,
}

impl Container {
    pub fn from_store<F: Elem>(kind: &str, meta: serde_json::Value, store: &ParamStore<F>) -> Self {
        let params = store
            .iter()
            .map(|(name, shape, values, _)| SavedParam {
                name: name.to_string(),
                shape: shape.to_vec(),
                values: values.iter().map(|&v| wide(v)).collect(),
            })
            .collect();
        Container {
            version: CONTAINER_VERSION.into(),
            kind: kind.into(),
            seed: store.seed(),
            meta,
            params,
        }
    }

    /// Copy values into a freshly built store of the same model; every tensor
    /// must exist with a matching shape.
    pub fn apply_to_store<F: Elem>(&self, store: &mut ParamStore<F>) -> Result<()> {
        if self.params.len() != store.len() {
            return Err(Error::shape(
                "checkpoint",
                format!("{} tensors", store.len()),
                format!("{} tensors", self.params.len()),
            ));
        }
        for saved in &self.params {
            let id = store.lookup(&saved.name).ok_or_else(|| {
                Error::Config(format!("checkpoint tensor {:?} not in model", saved.name))
            })?;
            if store.shape(id) != saved.shape.as_slice() {
                return Err(Error::shape(
                    format!("checkpoint tensor {:?}", saved.name),
                    format!("{:?}", store.shape(id)),
                    format!("{:?}", saved.shape),
                ));
            }
            let dst = store.value_mut(id);
            if dst.len() != saved.values.len() {
                return Err(Error::shape(
                    format!("checkpoint tensor {:?}", saved.name),
                    format!("{} values", dst.len()),
                    format!("{} values", saved.values.len()),
                ));
            }
            for (d, &v) in dst.iter_mut().zip(&saved.values) {
                *d = fl(v);
            }
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        fs::write(path, text.as_bytes()).map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Container> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let container: Container = serde_json::from_str(&text)?;
        if container.version != CONTAINER_VERSION {
            return Err(Error::Version {
                expected: CONTAINER_VERSION.into(),
                found: container.version,
            });
        }
        Ok(container)
    }

    pub fn expect_kind(&self, kind: &str) -> Result<()> {
        if self.kind != kind {
            return Err(Error::Config(format!(
                "checkpoint kind {:?}, expected {:?}",
                self.kind, kind
            )));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::params::Init;

    #[test]
    fn roundtrip_restores_exact_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.json");

        let mut store: ParamStore<f32> = ParamStore::new(17);
        store.register("w", &[2, 2], Init::KaimingUniform { fan_in: 2 });
        store.register_buffer("running", &[2], Init::Const(0.5));
        let container = Container::from_store("backbone", serde_json::json!({"verbs": 8}), &store);
        container.save(&path).unwrap();

        let loaded = Container::load(&path).unwrap();
        assert_eq!(loaded.version, CONTAINER_VERSION);
        assert_eq!(loaded.kind, "backbone");
        assert_eq!(loaded.meta["verbs"], 8);

        let mut fresh: ParamStore<f32> = ParamStore::new(99);
        fresh.register("w", &[2, 2], Init::Zeros);
        fresh.register_buffer("running", &[2], Init::Zeros);
        loaded.apply_to_store(&mut fresh).unwrap();
        let id = store.lookup("w").unwrap();
        let fid = fresh.lookup("w").unwrap();
        assert_eq!(store.value(id), fresh.value(fid));
    }

    #[test]
    fn saves_are_byte_identical() {
        let build = || {
            let mut store: ParamStore<f32> = ParamStore::new(3);
            store.register("a", &[8], Init::KaimingUniform { fan_in: 8 });
            Container::from_store("backbone", serde_json::json!({}), &store)
        };
        let a = serde_json::to_string(&build()).unwrap();
        let b = serde_json::to_string(&build()).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let mut store: ParamStore<f64> = ParamStore::new(0);
        store.register("w", &[4], Init::Zeros);
        let container = Container::from_store("backbone", serde_json::json!({}), &store);
        let mut other: ParamStore<f64> = ParamStore::new(0);
        other.register("w", &[2, 2], Init::Zeros);
        assert!(container.apply_to_store(&mut other).is_err());
    }

    #[test]
    fn wrong_version_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.json");
        std::fs::write(
            &path,
            r#"{"version":"w3kit-v0","kind":"backbone","seed":0,"meta":{},"params":[]}"#,
        )
        .unwrap();
        assert!(matches!(Container::load(&path), Err(Error::Version { .. })));
    }
}
