//! Central parameter registry.
//!
//! Every learnable tensor (and every persistent buffer such as batch-norm
//! running statistics) is registered here under a unique name. Gradients
//! accumulate into a separate [`GradBuffer`] with the identical layout, so a
//! shared `&ParamStore` can serve many worker threads during a forward/backward
//! sweep while each worker owns its own gradient buffer.

use std::collections::HashMap;

use crate::elem::{fl, wide, Elem};
use crate::error::{Error, Result};
use crate::rng::{self, Rng};

/// Handle to one registered tensor.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParamId(usize);

/// Initialization scheme for a registered tensor.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    Zeros,
    Const(f64),
    /// Uniform in `[-sqrt(6 / fan_in), sqrt(6 / fan_in)]`.
    KaimingUniform { fan_in: usize },
}

#[derive(Debug, Clone)]
struct Entry<F> {
    name: String,
    shape: Vec<usize>,
    value: Vec<F>,
    /// Buffers (e.g. batch-norm running stats) persist in checkpoints but are
    /// skipped by optimizers.
    trainable: bool,
}

/// Named parameter tensors plus the seed their initialization was drawn from.
#[derive(Debug, Clone)]
pub struct ParamStore<F> {
    entries: Vec<Entry<F>>,
    index: HashMap<String, usize>,
    seed: u64,
    rng: Rng,
}

impl<F: Elem> ParamStore<F> {
    pub fn new(seed: u64) -> Self {
        ParamStore {
            entries: Vec::new(),
            index: HashMap::new(),
            seed,
            rng: rng::derived(seed, 0x9a7a),
        }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn register(&mut self, name: &str, shape: &[usize], init: Init) -> ParamId {
        self.register_inner(name, shape, init, true)
    }

    pub fn register_buffer(&mut self, name: &str, shape: &[usize], init: Init) -> ParamId {
        self.register_inner(name, shape, init, false)
    }

    fn register_inner(&mut self, name: &str, shape: &[usize], init: Init, trainable: bool) -> ParamId {
        assert!(
            !self.index.contains_key(name),
            "duplicate parameter name {name:?}"
        );
        let n: usize = shape.iter().product();
        let value = match init {
            Init::Zeros => vec![F::zero(); n],
            Init::Const(c) => vec![fl(c); n],
            Init::KaimingUniform { fan_in } => {
                let bound = (6.0 / fan_in.max(1) as f64).sqrt();
                (0..n)
                    .map(|_| rng::uniform(&mut self.rng, -bound, bound))
                    .collect()
            }
        };
        let id = ParamId(self.entries.len());
        self.index.insert(name.to_string(), id.0);
        self.entries.push(Entry {
            name: name.to_string(),
            shape: shape.to_vec(),
            value,
            trainable,
        });
        id
    }

    #[inline]
    pub fn value(&self, id: ParamId) -> &[F] {
        &self.entries[id.0].value
    }

    #[inline]
    pub fn value_mut(&mut self, id: ParamId) -> &mut [F] {
        &mut self.entries[id.0].value
    }

    pub fn shape(&self, id: ParamId) -> &[usize] {
        &self.entries[id.0].shape
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn lookup(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn total_elements(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    /// Iterate `(name, shape, values, trainable)` in registration order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &[usize], &[F], bool)> {
        self.entries
            .iter()
            .map(|e| (e.name.as_str(), e.shape.as_slice(), e.value.as_slice(), e.trainable))
    }

    /// Flatten all trainable parameters into one f64 vector (gradient checks).
    pub fn flatten_trainable(&self) -> Vec<f64> {
        let mut out = Vec::new();
        for e in &self.entries {
            if e.trainable {
                out.extend(e.value.iter().map(|&x| wide(x)));
            }
        }
        out
    }

    /// Overwrite all trainable parameters from one flat f64 vector.
    pub fn load_trainable(&mut self, flat: &[f64]) {
        let mut k = 0;
        for e in &mut self.entries {
            if e.trainable {
                for v in &mut e.value {
                    *v = fl(flat[k]);
                    k += 1;
                }
            }
        }
        assert_eq!(k, flat.len(), "flat parameter vector length mismatch");
    }

    /// Copy values in from another store by name, checking shapes.
    pub fn load_from(&mut self, other: &ParamStore<F>) -> Result<()> {
        if self.entries.len() != other.entries.len() {
            return Err(Error::shape(
                "ParamStore::load_from",
                format!("{} tensors", self.entries.len()),
                format!("{} tensors", other.entries.len()),
            ));
        }
        for e in &mut self.entries {
            let src = other
                .index
                .get(&e.name)
                .map(|&i| &other.entries[i])
                .ok_or_else(|| Error::Config(format!("missing parameter {:?}", e.name)))?;
            if src.shape != e.shape {
                return Err(Error::shape(
                    format!("parameter {:?}", e.name),
                    format!("{:?}", e.shape),
                    format!("{:?}", src.shape),
                ));
            }
            e.value.copy_from_slice(&src.value);
        }
        Ok(())
    }

    /// FNV-1a hash of the exact parameter bytes; used to prove stage-two
    /// training left stage-one parameters untouched.
    pub fn checksum(&self) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |b: u8| {
            h ^= b as u64;
            h = h.wrapping_mul(0x100000001b3);
        };
        for e in &self.entries {
            for b in e.name.as_bytes() {
                eat(*b);
            }
            for v in &e.value {
                for b in wide(*v).to_le_bytes() {
                    eat(b);
                }
            }
        }
        h
    }
}

/// Gradient accumulator with the same layout as a [`ParamStore`].
#[derive(Debug, Clone)]
pub struct GradBuffer<F> {
    bufs: Vec<Vec<F>>,
}

impl<F: Elem> GradBuffer<F> {
    pub fn zeros_like(store: &ParamStore<F>) -> Self {
        GradBuffer {
            bufs: store.entries.iter().map(|e| vec![F::zero(); e.value.len()]).collect(),
        }
    }

    pub fn zero(&mut self) {
        for b in &mut self.bufs {
            b.iter_mut().for_each(|x| *x = F::zero());
        }
    }

    #[inline]
    pub fn grad(&self, id: ParamId) -> &[F] {
        &self.bufs[id.0]
    }

    #[inline]
    pub fn grad_mut(&mut self, id: ParamId) -> &mut [F] {
        &mut self.bufs[id.0]
    }

    /// Elementwise `self += other`.
    pub fn add_assign(&mut self, other: &GradBuffer<F>) {
        assert_eq!(self.bufs.len(), other.bufs.len());
        for (a, b) in self.bufs.iter_mut().zip(other.bufs.iter()) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x = *x + *y;
            }
        }
    }

    pub fn scale(&mut self, s: F) {
        for b in &mut self.bufs {
            for x in b.iter_mut() {
                *x = *x * s;
            }
        }
    }

    /// Flatten gradients of trainable parameters, matching
    /// [`ParamStore::flatten_trainable`] element order.
    pub fn flatten_trainable(&self, store: &ParamStore<F>) -> Vec<f64> {
        let mut out = Vec::new();
        for (i, e) in store.entries.iter().enumerate() {
            if e.trainable {
                out.extend(self.bufs[i].iter().map(|&x| wide(x)));
            }
        }
        out
    }

}

/// Optimizer-facing view: `(values, grads)` pairs for trainable tensors only.
pub(crate) fn trainable_pairs<'a, F: Elem>(
    store: &'a mut ParamStore<F>,
    grads: &'a GradBuffer<F>,
) -> Vec<(&'a mut [F], &'a [F])> {
    store
        .entries
        .iter_mut()
        .zip(grads.bufs.iter())
        .filter(|(e, _)| e.trainable)
        .map(|(e, g)| (e.value.as_mut_slice(), g.as_slice()))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grad_buffer_mirrors_store_shapes() {
        let mut store: ParamStore<f64> = ParamStore::new(3);
        let a = store.register("a", &[2, 3], Init::KaimingUniform { fan_in: 3 });
        let b = store.register("b", &[4], Init::Zeros);
        let g = GradBuffer::zeros_like(&store);
        assert_eq!(g.grad(a).len(), store.value(a).len());
        assert_eq!(g.grad(b).len(), store.value(b).len());
    }

    #[test]
    fn init_is_seed_deterministic() {
        let build = |seed| {
            let mut s: ParamStore<f64> = ParamStore::new(seed);
            s.register("w", &[32], Init::KaimingUniform { fan_in: 8 });
            s.value(s.lookup("w").unwrap()).to_vec()
        };
        assert_eq!(build(11), build(11));
        assert_ne!(build(11), build(12));
    }

    #[test]
    fn flatten_roundtrip_skips_buffers() {
        let mut s: ParamStore<f64> = ParamStore::new(0);
        s.register("w", &[3], Init::Const(2.0));
        s.register_buffer("running", &[2], Init::Const(5.0));
        let flat = s.flatten_trainable();
        assert_eq!(flat, vec![2.0, 2.0, 2.0]);
        s.load_trainable(&[1.0, 2.0, 3.0]);
        assert_eq!(s.value(s.lookup("w").unwrap()), &[1.0, 2.0, 3.0]);
        assert_eq!(s.value(s.lookup("running").unwrap()), &[5.0, 5.0]);
    }
}
