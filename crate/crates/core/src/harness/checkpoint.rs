use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::ad::{NamedArray, ParamStore};
use crate::{Error, Result};

use super::config::TrainConfig;
use super::model::{Architecture, NdmModel};

pub const CHECKPOINT_FORMAT: &str = "ndm-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A model's configuration and parameters as one JSON document. Arrays
/// are stored with their names and shapes, values as decimal floats that
/// round-trip exactly.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub steps_completed: usize,
    pub config: TrainConfig,
    pub params: Vec<NamedArray>,
}

impl Checkpoint {
    pub fn new(config: &TrainConfig, model: &NdmModel, steps_completed: usize) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            steps_completed,
            config: config.clone(),
            params: model.params().to_named(),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let c: Self = serde_json::from_str(text)?;
        if c.format != CHECKPOINT_FORMAT || c.version != CHECKPOINT_VERSION {
            return Err(Error::Invalid(format!(
                "unsupported checkpoint {} version {}",
                c.format, c.version
            )));
        }
        c.config.validate()?;
        Ok(c)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn model(&self) -> Result<NdmModel> {
        let params = ParamStore::from_named(self.params.clone())?;
        NdmModel::from_params(Architecture::from_config(&self.config), params)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn round_trip_is_exact() {
        let config = TrainConfig { n_layers: 2, hidden: 5, ..Default::default() };
        let arch = Architecture::from_config(&config);
        let model = NdmModel::init(arch, &mut rand_chacha::ChaCha8Rng::seed_from_u64(1), 0.3).unwrap();
        let ck = Checkpoint::new(&config, &model, 17);
        let back = Checkpoint::from_json(&ck.to_json().unwrap()).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.model().unwrap(), model);
    }

    #[test]
    fn rejects_foreign_documents() {
        let config = TrainConfig { n_layers: 1, hidden: 2, ..Default::default() };
        let m = NdmModel::init(Architecture::from_config(&config), &mut rand_chacha::ChaCha8Rng::seed_from_u64(1), 0.0).unwrap();
        let mut ck = Checkpoint::new(&config, &m, 0);
        ck.format = "other".into();
        assert!(Checkpoint::from_json(&ck.to_json().unwrap()).is_err());
        let mut ck = Checkpoint::new(&config, &m, 0);
        ck.config.hidden = 3;
        assert!(Checkpoint::from_json(&ck.to_json().unwrap()).unwrap().model().is_err());
    }
}
