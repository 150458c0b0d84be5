use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ParameterStore, Tensor};
use crate::error::{Error, Result};

pub const FORMAT_VERSION: u32 = 1;

/// Position of the deterministic data stream a checkpoint was taken at.
/// Batch order is a pure function of `(seed, iteration)`, so these two
/// numbers are the entire sampler state.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: u64,
    pub iteration: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub model_config: serde_json::Value,
    pub rng_state: RngState,
    pub params: BTreeMap<String, Tensor>,
}

impl Checkpoint {
    pub fn capture(store: &ParameterStore, model_config: serde_json::Value, rng_state: RngState) -> Self {
        let params = store.iter_named().map(|(n, t)| (n.to_owned(), t.clone())).collect();
        Checkpoint { format_version: FORMAT_VERSION, model_config, rng_state, params }
    }

    /// Copies values into `store`; names and shapes must match exactly.
    pub fn restore_into(&self, store: &mut ParameterStore) -> Result<()> {
        if self.params.len() != store.len() {
            return Err(Error::VocabMismatch(format!(
                "checkpoint has {} parameters, model has {}",
                self.params.len(),
                store.len()
            )));
        }
        for (name, tensor) in &self.params {
            let id = store.id(name)?;
            if store.value(id).shape() != tensor.shape() {
                return Err(Error::VocabMismatch(format!(
                    "parameter `{name}` has shape {:?} in checkpoint, {:?} in model",
                    tensor.shape(),
                    store.value(id).shape()
                )));
            }
            *store.value_mut(id) = tensor.clone();
        }
        Ok(())
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let ck: Checkpoint = serde_json::from_str(text)?;
        if ck.format_version != FORMAT_VERSION {
            return Err(Error::Malformed {
                what: "checkpoint".into(),
                line: 1,
                detail: format!("unsupported format_version {}", ck.format_version),
            });
        }
        // Re-validate through the checked constructor.
        for (name, t) in &ck.params {
            Tensor::new(t.shape().to_vec(), t.values().to_vec()).map_err(|e| Error::Malformed {
                what: "checkpoint".into(),
                line: 1,
                detail: format!("parameter `{name}`: {e}"),
            })?;
        }
        Ok(ck)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_json()?).map_err(|e| Error::file(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::file(path, e))?;
        Self::from_json(&text)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn round_trip_is_value_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut s = ParameterStore::new();
        s.add_uniform("a.w", &[5, 7], 0.08, &mut rng).unwrap();
        s.add("b", Tensor::vector(vec![1e-300, -0.1 + 0.2, std::f64::consts::PI]).unwrap()).unwrap();
        let ck = Checkpoint::capture(&s, serde_json::json!({"hidden_dim": 4}), RngState { seed: 3, iteration: 12 });
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        let mut s2 = s.clone();
        s2.zero_values();
        back.restore_into(&mut s2).unwrap();
        assert_eq!(s2.flat_values(), s.flat_values());
    }

    #[test]
    fn shape_mismatch_rejected() {
        let mut s = ParameterStore::new();
        s.add("w", Tensor::zeros(&[2, 2])).unwrap();
        let ck = Checkpoint::capture(&s, serde_json::Value::Null, RngState::default());
        let mut other = ParameterStore::new();
        other.add("w", Tensor::zeros(&[2, 3])).unwrap();
        assert!(ck.restore_into(&mut other).is_err());
    }
}
