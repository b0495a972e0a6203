use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::Tensor;
use crate::error::{Error, Result};

/// Handle into a [`ParamStore`]; stable for the lifetime of the model.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct ParamId(pub(crate) usize);

#[derive(Clone, Debug)]
pub struct Parameter {
    pub name: String,
    pub value: Tensor,
    pub grad: Tensor,
}

/// Named parameters in registration order.
#[derive(Clone, Debug, Default)]
pub struct ParamStore {
    params: Vec<Parameter>,
}

impl ParamStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: impl Into<String>, value: Tensor) -> Result<ParamId> {
        let name = name.into();
        if self.params.iter().any(|p| p.name == name) {
            return Err(Error::invalid(format!("duplicate parameter name {name}")));
        }
        let grad = Tensor::zeros(value.shape());
        self.params.push(Parameter { name, value, grad });
        Ok(ParamId(self.params.len() - 1))
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.params[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.params[id.0].grad
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Parameter> {
        self.params.iter()
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut Parameter> {
        self.params.iter_mut()
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.params.iter().position(|p| p.name == name).map(ParamId)
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.value.len()).sum()
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.grad.fill(0.0);
        }
    }

    /// Fresh gradient buffer with one zero tensor per parameter.
    pub fn new_grads(&self) -> Grads {
        Grads {
            tensors: self
                .params
                .iter()
                .map(|p| Tensor::zeros(p.value.shape()))
                .collect(),
        }
    }

    /// Replace every parameter's gradient with the buffer's contents.
    pub fn set_grads(&mut self, grads: Grads) {
        debug_assert_eq!(grads.tensors.len(), self.params.len());
        for (p, g) in self.params.iter_mut().zip(grads.tensors) {
            p.grad = g;
        }
    }

    pub fn to_named(&self) -> BTreeMap<String, NamedTensor> {
        self.params
            .iter()
            .map(|p| {
                (
                    p.name.clone(),
                    NamedTensor {
                        shape: p.value.shape().to_vec(),
                        data: p.value.data().to_vec(),
                    },
                )
            })
            .collect()
    }

    /// Overwrite values from a name→tensor map. Every registered parameter
    /// must be present with the exact shape; extra entries are rejected.
    pub fn load_named(&mut self, named: &BTreeMap<String, NamedTensor>) -> Result<()> {
        if named.len() != self.params.len() {
            return Err(Error::data(format!(
                "checkpoint has {} parameters, model expects {}",
                named.len(),
                self.params.len()
            )));
        }
        for p in &mut self.params {
            let src = named
                .get(&p.name)
                .ok_or_else(|| Error::data(format!("checkpoint lacks parameter {}", p.name)))?;
            if src.shape != p.value.shape() {
                return Err(Error::shape(format!(
                    "parameter {}: checkpoint shape {:?}, model shape {:?}",
                    p.name,
                    src.shape,
                    p.value.shape()
                )));
            }
            let t = Tensor::from_vec(&src.shape, src.data.clone())?;
            t.check_finite(&p.name)?;
            p.value = t;
        }
        Ok(())
    }
}

/// Serialized form of one parameter: `{"shape": [...], "data": [...]}`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NamedTensor {
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

/// Gradient accumulator parallel to a [`ParamStore`].
#[derive(Clone, Debug)]
pub struct Grads {
    tensors: Vec<Tensor>,
}

impl Grads {
    pub fn get(&self, id: ParamId) -> &Tensor {
        &self.tensors[id.0]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.tensors[id.0]
    }

    pub fn add(&mut self, other: &Grads) {
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            a.add_assign(b);
        }
    }

    pub fn scale(&mut self, k: f64) {
        self.tensors.iter_mut().for_each(|t| t.scale(k));
    }

    pub fn fill(&mut self, v: f64) {
        self.tensors.iter_mut().for_each(|t| t.fill(v));
    }
}
