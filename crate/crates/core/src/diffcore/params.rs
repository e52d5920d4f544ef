use std::collections::HashMap;

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{DiffError, Tensor};

/// Handle to a parameter inside a [`ParamStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

/// Named trainable tensors, each paired with a gradient slot of equal shape.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    names: Vec<String>,
    values: Vec<Tensor>,
    grads: Vec<Tensor>,
    index: HashMap<String, usize>,
}

/// One serialized parameter. The checkpoint format is a list of these.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId, DiffError> {
        let name = name.into();
        if self.index.contains_key(&name) {
            return Err(DiffError::DuplicateParam(name));
        }
        let id = self.values.len();
        self.grads.push(Tensor::zeros(value.shape()));
        self.values.push(value);
        self.index.insert(name.clone(), id);
        self.names.push(name);
        Ok(ParamId(id))
    }

    /// Inserts a `[rows, cols]` parameter with N(0, std^2) entries.
    pub fn insert_normal(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        std: f64,
        rng: &mut impl Rng,
    ) -> Result<ParamId, DiffError> {
        let values = (0..rows * cols).map(|_| std * rng.sample::<f64, _>(StandardNormal)).collect();
        self.insert(name, Tensor::matrix(rows, cols, values))
    }

    pub fn insert_zeros(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> Result<ParamId, DiffError> {
        self.insert(name, Tensor::zeros(&[rows, cols]))
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.index.get(name).copied().map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.names[id.0]
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.values[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.values[id.0]
    }

    pub fn by_name(&self, name: &str) -> Option<&Tensor> {
        self.id(name).map(|id| self.get(id))
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.grads[id.0]
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.values.len()).map(ParamId)
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.names.iter().map(String::as_str).zip(&self.values)
    }

    pub fn zero_grads(&mut self) {
        for g in &mut self.grads {
            g.values_mut().fill(0.0);
        }
    }

    /// Overwrites every gradient slot.
    pub fn set_grads(&mut self, grads: &Gradients) {
        assert_eq!(grads.len(), self.len(), "gradient count mismatch");
        for (slot, g) in self.grads.iter_mut().zip(&grads.0) {
            slot.clone_from(g);
        }
    }

    pub fn zero_gradients(&self) -> Gradients {
        Gradients(self.values.iter().map(|v| Tensor::zeros(v.shape())).collect())
    }

    pub fn to_named(&self) -> Vec<NamedTensor> {
        self.iter()
            .map(|(name, t)| NamedTensor { name: name.to_string(), shape: t.shape().to_vec(), values: t.values().to_vec() })
            .collect()
    }

    /// Copies values from a serialized list into the existing parameters.
    /// Every stored parameter must be present with a matching shape.
    pub fn load_named(&mut self, named: &[NamedTensor]) -> Result<(), DiffError> {
        let lookup: HashMap<&str, &NamedTensor> = named.iter().map(|n| (n.name.as_str(), n)).collect();
        for i in 0..self.values.len() {
            let name = &self.names[i];
            let src = lookup.get(name.as_str()).ok_or_else(|| DiffError::UnknownParam(name.clone()))?;
            if src.shape != self.values[i].shape() {
                return Err(DiffError::Shape(format!(
                    "parameter {name}: stored shape {:?}, model shape {:?}",
                    src.shape,
                    self.values[i].shape()
                )));
            }
            self.values[i] = Tensor::new(src.shape.clone(), src.values.clone())?;
        }
        Ok(())
    }
}

/// Gradient of a scalar loss with respect to every parameter of a store,
/// indexed by [`ParamId`]. Parameters the loss does not touch hold zeros.
#[derive(Clone, Debug, PartialEq)]
pub struct Gradients(pub(crate) Vec<Tensor>);

impl Gradients {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.0[id.0]
    }

    pub fn iter(&self) -> impl Iterator<Item = &Tensor> {
        self.0.iter()
    }

    pub fn accumulate(&mut self, other: &Gradients) {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, f: f64) {
        for g in &mut self.0 {
            g.scale_assign(f);
        }
    }

    pub fn global_norm(&self) -> f64 {
        self.0.iter().map(Tensor::sum_sq).sum::<f64>().sqrt()
    }

    /// Rescales so the global L2 norm is at most `max_norm`.
    pub fn clip_global_norm(&mut self, max_norm: f64) {
        let norm = self.global_norm();
        if norm > max_norm && norm.is_finite() {
            self.scale(max_norm / norm);
        }
    }

    pub fn all_finite(&self) -> bool {
        self.0.iter().all(Tensor::all_finite)
    }
}
