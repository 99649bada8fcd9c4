use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{GpModel, NoiseModel, TrainingSet, TrendSpec};
use crate::error::{Error, Result};
use crate::io::write_atomic;
use crate::kernels::KernelSpec;
use crate::scalar::Scalar;

const FORMAT: &str = "gpgreeks-model";
const VERSION: u32 = 1;

#[derive(Serialize, Deserialize)]
#[serde(bound(serialize = "T: Serialize", deserialize = "T: Deserialize<'de>"))]
struct Saved<T> {
    format: String,
    version: u32,
    kernel: KernelSpec<T>,
    trend: TrendSpec,
    beta: Vec<T>,
    noise: NoiseModel<T>,
    log_likelihood: T,
    training_set: TrainingSet<T>,
}

impl<T: Scalar + Serialize + for<'de> Deserialize<'de>> GpModel<T> {
    /// Self-describing JSON. The factorisation is not stored; loading
    /// recomputes it from the training set and hyperparameters.
    pub fn to_json(&self) -> Result<String> {
        let saved = Saved {
            format: FORMAT.to_string(),
            version: VERSION,
            kernel: self.kernel.clone(),
            trend: self.trend,
            beta: self.beta.clone(),
            noise: self.noise,
            log_likelihood: self.log_likelihood,
            training_set: self.ts.clone(),
        };
        Ok(serde_json::to_string(&saved)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let saved: Saved<T> = serde_json::from_str(text)?;
        if saved.format != FORMAT || saved.version != VERSION {
            return Err(Error::Serde(format!(
                "unsupported model format {} v{}",
                saved.format, saved.version
            )));
        }
        GpModel::condition(saved.training_set, saved.kernel, saved.trend, saved.noise)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }
}
