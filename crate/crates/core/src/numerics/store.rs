use std::collections::BTreeMap;

use rand::Rng;

use super::Tensor;
use crate::error::{Error, Result};

/// Handle to a parameter inside one [`ParameterStore`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct ParamId(pub(crate) usize);

impl ParamId {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Entry {
    name: String,
    value: Tensor,
    grad: Tensor,
}

/// Named parameters, each paired with a gradient accumulator of the same
/// shape.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParameterStore {
    entries: Vec<Entry>,
    by_name: BTreeMap<String, usize>,
}

impl ParameterStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn add(&mut self, name: &str, value: Tensor) -> Result<ParamId> {
        if self.by_name.contains_key(name) {
            return Err(Error::InvalidArgument(format!("duplicate parameter `{name}`")));
        }
        let id = self.entries.len();
        let grad = Tensor::zeros(value.shape());
        self.entries.push(Entry { name: name.to_owned(), value, grad });
        self.by_name.insert(name.to_owned(), id);
        Ok(ParamId(id))
    }

    /// Adds a parameter drawn uniformly from `[-scale, scale]`.
    pub fn add_uniform<R: Rng>(
        &mut self,
        name: &str,
        shape: &[usize],
        scale: f64,
        rng: &mut R,
    ) -> Result<ParamId> {
        let n: usize = shape.iter().product();
        let values = (0..n).map(|_| rng.gen_range(-scale..=scale)).collect();
        self.add(name, Tensor::new(shape.to_vec(), values)?)
    }

    pub fn id(&self, name: &str) -> Result<ParamId> {
        self.by_name
            .get(name)
            .map(|&i| ParamId(i))
            .ok_or_else(|| Error::UnknownParameter(name.to_owned()))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = ParamId> {
        (0..self.entries.len()).map(ParamId)
    }

    pub fn name(&self, id: ParamId) -> &str {
        &self.entries[id.0].name
    }

    pub fn value(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].value
    }

    pub fn value_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].value
    }

    pub fn grad(&self, id: ParamId) -> &Tensor {
        &self.entries[id.0].grad
    }

    pub fn grad_mut(&mut self, id: ParamId) -> &mut Tensor {
        &mut self.entries[id.0].grad
    }

    /// Total number of scalar parameters.
    pub fn scalar_count(&self) -> usize {
        self.entries.iter().map(|e| e.value.len()).sum()
    }

    pub fn zero_grad(&mut self) {
        for e in &mut self.entries {
            e.grad.fill(0.0);
        }
    }

    pub fn zero_values(&mut self) {
        for e in &mut self.entries {
            e.value.fill(0.0);
        }
    }

    /// Adds `scale * buffer` into the accumulators.
    pub fn accumulate(&mut self, buffer: &GradBuffer, scale: f64) {
        for (e, slot) in self.entries.iter_mut().zip(&buffer.slots) {
            if let Some(g) = slot {
                super::tensor::axpy(scale, g, e.grad.values_mut());
            }
        }
    }

    pub fn grad_norm(&self) -> f64 {
        self.entries.iter().map(|e| e.grad.squared_norm()).sum::<f64>().sqrt()
    }

    /// Parameters in name order, for serialization.
    pub fn iter_named(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.by_name.iter().map(|(n, &i)| (n.as_str(), &self.entries[i].value))
    }

    /// Gradient accumulators flattened in insertion order.
    pub fn flat_grads(&self) -> Vec<f64> {
        self.entries.iter().flat_map(|e| e.grad.values().iter().copied()).collect()
    }

    pub fn flat_values(&self) -> Vec<f64> {
        self.entries.iter().flat_map(|e| e.value.values().iter().copied()).collect()
    }

    /// Overwrites every value from a flat slice in insertion order.
    pub fn set_flat_values(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.scalar_count() {
            return Err(Error::Shape {
                op: "set_flat_values",
                detail: format!("expected {} values, got {}", self.scalar_count(), flat.len()),
            });
        }
        let mut offset = 0;
        for e in &mut self.entries {
            let n = e.value.len();
            e.value.values_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(())
    }

    pub fn new_buffer(&self) -> GradBuffer {
        GradBuffer { slots: vec![None; self.entries.len()], sizes: self.entries.iter().map(|e| e.value.len()).collect() }
    }
}

/// Private gradient accumulator aligned with a [`ParameterStore`]. Slots are
/// allocated on first touch.
#[derive(Clone, Debug)]
pub struct GradBuffer {
    slots: Vec<Option<Vec<f64>>>,
    sizes: Vec<usize>,
}

impl GradBuffer {
    pub(crate) fn slot_mut(&mut self, id: ParamId) -> &mut [f64] {
        let size = self.sizes[id.0];
        self.slots[id.0].get_or_insert_with(|| vec![0.0; size])
    }

    pub fn get(&self, id: ParamId) -> Option<&[f64]> {
        self.slots[id.0].as_deref()
    }

    /// Adds `scale * other` into this buffer.
    pub fn add_scaled(&mut self, other: &GradBuffer, scale: f64) {
        for (i, slot) in other.slots.iter().enumerate() {
            if let Some(g) = slot {
                let dst = self.slot_mut(ParamId(i));
                super::tensor::axpy(scale, g, dst);
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn duplicate_names_rejected() {
        let mut s = ParameterStore::new();
        s.add("w", Tensor::zeros(&[2])).unwrap();
        assert!(s.add("w", Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn grads_match_value_shapes() {
        let mut s = ParameterStore::new();
        let id = s.add("m", Tensor::zeros(&[3, 4])).unwrap();
        assert_eq!(s.grad(id).shape(), &[3, 4]);
        assert_eq!(s.id("m").unwrap(), id);
        assert!(s.id("nope").is_err());
    }
}
