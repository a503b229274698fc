use std::collections::BTreeMap;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::Tensor;
use crate::error::{Result, ShineError};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

#[derive(Debug, Clone, PartialEq)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// Named trainable tensors plus their gradient accumulators, kept in
/// registration order.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ParamStore {
    params: Vec<Parameter>,
    by_name: BTreeMap<String, usize>,
}

/// Initialization schemes for fresh parameters.
#[derive(Debug, Clone, Copy)]
pub enum Init {
    /// Uniform in ±sqrt(6 / (fan_in + fan_out)).
    Xavier,
    Zeros,
    Ones,
    /// Normal(0, 0.02).
    Embedding,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(ShineError::Config(format!("duplicate parameter {name}")));
        }
        let id = self.params.len();
        self.by_name.insert(name.clone(), id);
        let grad = Tensor::zeros_like(&value);
        self.params.push(Parameter { name, value, grad });
        Ok(ParamId(id))
    }

    pub fn init<R: Rng>(
        &mut self,
        name: impl Into<String>,
        rows: usize,
        cols: usize,
        init: Init,
        rng: &mut R,
    ) -> Result<ParamId> {
        let value = match init {
            Init::Zeros => Tensor::zeros(rows, cols),
            Init::Ones => Tensor::filled(rows, cols, 1.0),
            Init::Xavier => {
                let bound = (6.0 / (rows + cols) as f64).sqrt();
                let data = (0..rows * cols).map(|_| rng.random_range(-bound..bound)).collect();
                Tensor::from_rows(rows, cols, data)?
            }
            Init::Embedding => {
                let normal = Normal::new(0.0, 0.02).expect("valid normal");
                let data = (0..rows * cols).map(|_| normal.sample(rng)).collect();
                Tensor::from_rows(rows, cols, data)?
            }
        };
        self.insert(name, value)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn id(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).map(|&i| ParamId(i))
    }

    pub fn get(&self, id: ParamId) -> &Parameter {
        &self.params[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Parameter {
        &mut self.params[id.0]
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Parameter)> {
        self.params.iter().enumerate().map(|(i, p)| (ParamId(i), p))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn zero_grad(&mut self) {
        for p in &mut self.params {
            p.grad.data_mut().fill(0.0);
        }
    }

    pub fn accumulate(&mut self, grads: &[(ParamId, Tensor)]) {
        for (id, g) in grads {
            self.params[id.0].grad.add_assign(g);
        }
    }

    /// Scales every accumulated gradient, e.g. to average over a batch.
    pub fn scale_grads(&mut self, factor: f64) {
        for p in &mut self.params {
            for g in p.grad.data_mut() {
                *g *= factor;
            }
        }
    }

    pub fn num_scalars(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    /// Copies values from `other` for every parameter, matching by name and shape.
    pub fn copy_values_from(&mut self, other: &ParamStore) -> Result<()> {
        if self.len() != other.len() {
            return Err(ShineError::Config(format!(
                "parameter count mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        for p in &mut self.params {
            let src = other
                .id(&p.name)
                .map(|id| other.value(id))
                .ok_or_else(|| ShineError::Config(format!("missing parameter {}", p.name)))?;
            if !src.same_shape(&p.value) {
                return Err(ShineError::shape("copy_values_from", p.value.shape(), src.shape()));
            }
            p.value = src.clone();
        }
        Ok(())
    }
}
