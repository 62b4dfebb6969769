//! Named parameter tensors: the unit models expose to optimizers and the
//! unit the federated layer ships between clients and server.
//!
//! JSON layout (stable):
//!
//! ```json
//! { "format": "fedqlstm-params/1",
//!   "tensors": [ { "name": "vqc1", "shape": [2, 4, 3], "data": [ ... ] }, ... ] }
//! ```
//!
//! `data` is row-major over `shape`; a scalar has an empty shape and one value.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const PARAMS_FORMAT: &str = "fedqlstm-params/1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Tensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f64>,
}

impl Tensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f64>) -> Result<Self> {
        let name = name.into();
        let expected: usize = shape.iter().product();
        if expected != data.len() {
            return Err(Error::shape(format!(
                "tensor {name}: shape {shape:?} needs {expected} values, got {}",
                data.len()
            )));
        }
        Ok(Self { name, shape, data })
    }

    pub fn scalar(name: impl Into<String>, value: f64) -> Self {
        Self { name: name.into(), shape: Vec::new(), data: vec![value] }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ParamSet {
    pub format: String,
    pub tensors: Vec<Tensor>,
}

impl ParamSet {
    pub fn new(tensors: Vec<Tensor>) -> Self {
        Self { format: PARAMS_FORMAT.to_string(), tensors }
    }

    /// Same names and shapes, all values zero.
    pub fn zeros_like(&self) -> Self {
        let tensors = self
            .tensors
            .iter()
            .map(|t| Tensor { name: t.name.clone(), shape: t.shape.clone(), data: vec![0.0; t.data.len()] })
            .collect();
        Self::new(tensors)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.tensors.iter().find(|t| t.name == name)
    }

    /// Looks up a tensor and checks its length.
    pub fn expect(&self, name: &str, len: usize) -> Result<&[f64]> {
        let t = self.get(name).ok_or_else(|| Error::shape(format!("missing tensor {name}")))?;
        if t.data.len() != len {
            return Err(Error::shape(format!(
                "tensor {name} has {} values, expected {len}",
                t.data.len()
            )));
        }
        Ok(&t.data)
    }

    pub fn num_scalars(&self) -> usize {
        self.tensors.iter().map(|t| t.data.len()).sum()
    }

    pub fn flatten(&self) -> Vec<f64> {
        self.tensors.iter().flat_map(|t| t.data.iter().copied()).collect()
    }

    /// Errors unless `other` has the same tensor names, order and shapes.
    pub fn check_same_layout(&self, other: &ParamSet) -> Result<()> {
        if self.tensors.len() != other.tensors.len() {
            return Err(Error::shape(format!(
                "parameter sets hold {} and {} tensors",
                self.tensors.len(),
                other.tensors.len()
            )));
        }
        for (a, b) in self.tensors.iter().zip(&other.tensors) {
            if a.name != b.name || a.shape != b.shape || a.data.len() != b.data.len() {
                return Err(Error::shape(format!(
                    "tensor mismatch: {} {:?} vs {} {:?}",
                    a.name, a.shape, b.name, b.shape
                )));
            }
        }
        Ok(())
    }

    /// `self += scale * other`, element-wise.
    pub fn add_scaled(&mut self, other: &ParamSet, scale: f64) -> Result<()> {
        self.check_same_layout(other)?;
        for (a, b) in self.tensors.iter_mut().zip(&other.tensors) {
            for (x, y) in a.data.iter_mut().zip(&b.data) {
                *x += scale * y;
            }
        }
        Ok(())
    }

    pub fn scale(&mut self, factor: f64) {
        for t in &mut self.tensors {
            for x in &mut t.data {
                *x *= factor;
            }
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let set: ParamSet = serde_json::from_str(text)?;
        if set.format != PARAMS_FORMAT {
            return Err(Error::Format(format!("unknown parameter format {:?}", set.format)));
        }
        for t in &set.tensors {
            Tensor::new(t.name.clone(), t.shape.clone(), t.data.clone())?;
        }
        Ok(set)
    }
}
