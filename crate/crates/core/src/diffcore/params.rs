use rand_distr::{Distribution, Normal};
use sha2::{Digest, Sha256};

use super::tensor::Tensor;
use crate::rng::rng_from;
use crate::{Error, Result};

/// Ordered, named parameter set. Each entry carries a trainable flag.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    trainable: Vec<bool>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<usize> {
        let name = name.into();
        if self.index_of(&name).is_some() {
            return Err(Error::InvalidArgument(format!("duplicate parameter `{name}`")));
        }
        self.names.push(name);
        self.tensors.push(value);
        self.trainable.push(true);
        Ok(self.tensors.len() - 1)
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.names.iter().position(|n| n == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.index_of(name).map(|i| &self.tensors[i])
    }

    pub fn name(&self, i: usize) -> &str {
        &self.names[i]
    }

    pub fn tensor(&self, i: usize) -> &Tensor {
        &self.tensors[i]
    }

    pub fn tensor_mut(&mut self, i: usize) -> &mut Tensor {
        &mut self.tensors[i]
    }

    pub fn is_trainable(&self, i: usize) -> bool {
        self.trainable[i]
    }

    pub fn set_trainable(&mut self, i: usize, on: bool) {
        self.trainable[i] = on;
    }

    pub fn freeze_all(&mut self) {
        self.trainable.iter_mut().for_each(|t| *t = false);
    }

    /// Removes the entry with this name, returning its value.
    pub fn remove(&mut self, name: &str) -> Option<Tensor> {
        let i = self.index_of(name)?;
        self.names.remove(i);
        self.trainable.remove(i);
        Some(self.tensors.remove(i))
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor, bool)> {
        self.names.iter().zip(&self.tensors).zip(&self.trainable).map(|((n, t), &tr)| (n.as_str(), t, tr))
    }

    pub fn total_count(&self) -> usize {
        self.tensors.iter().map(Tensor::len).sum()
    }

    pub fn trainable_count(&self) -> usize {
        self.iter().filter(|(_, _, tr)| *tr).map(|(_, t, _)| t.len()).sum()
    }

    /// SHA-256 over names, shapes and value bits.
    /// Adds independent `N(0, std²)` noise to every entry.
    pub fn perturb(&mut self, std: f64, seed: u64) -> Result<()> {
        let normal = Normal::new(0.0, std).map_err(|e| Error::InvalidArgument(format!("noise std {std}: {e}")))?;
        let mut rng = rng_from(seed);
        for t in &mut self.tensors {
            for v in t.data_mut() {
                *v += normal.sample(&mut rng);
            }
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        let mut h = Sha256::new();
        for (name, t, _) in self.iter() {
            h.update((name.len() as u64).to_le_bytes());
            h.update(name.as_bytes());
            for &e in t.shape() {
                h.update((e as u64).to_le_bytes());
            }
            for v in t.data() {
                h.update(v.to_bits().to_le_bytes());
            }
        }
        h.finalize().iter().map(|b| format!("{b:02x}")).collect()
    }
}
