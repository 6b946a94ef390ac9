//! TOML model files.
//!
//! ```toml
//! n = 2
//!
//! [constants]
//! mu_min = 1.0
//! mu_max = 1.0
//! w_min = 0.5
//! w_max = 0.5
//! w_sep = 0.5
//! smoothness = 2.1
//! kernel_mass = 0.5
//! stability_margin = 0.2
//! max_degree = 1
//!
//! [[baselines]]
//! family = "constant"
//! level = 1.0
//!
//! [[baselines]]
//! family = "sinusoidal"
//! level = 2.0
//! amplitude = 0.5
//! frequency = 6.283185307179586
//! phase = 0.0
//!
//! [kernels.default]
//! family = "exponential"
//! decay = 2.0
//!
//! [[kernels.overrides]]
//! i = 1
//! j = 0
//! kernel = { family = "modulated_exponential", base_decay = 2.0, modulation = 0.5, frequency = 1.0 }
//!
//! [[weights]]
//! i = 1
//! j = 0
//! w = 0.5
//! ```
//!
//! A `weights` entry `(i, j, w)` sets `w_ij`, the excitation of node `i` by
//! events of node `j`. Entries not listed are zero.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{BaselineSpec, HawkesModel, KernelSpec, ModelConstants};
use crate::error::{Error, Result};

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ModelFile {
    n: usize,
    constants: ModelConstants,
    baselines: Vec<BaselineSpec>,
    kernels: KernelSection,
    #[serde(default)]
    weights: Vec<WeightEntry>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelSection {
    default: KernelSpec,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    overrides: Vec<KernelOverride>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct KernelOverride {
    i: usize,
    j: usize,
    kernel: KernelSpec,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WeightEntry {
    i: usize,
    j: usize,
    w: f64,
}

impl HawkesModel {
    pub fn to_toml_string(&self) -> String {
        let file = ModelFile {
            n: self.n,
            constants: self.constants,
            baselines: self.baselines.clone(),
            kernels: KernelSection {
                default: self.default_kernel,
                overrides: self
                    .kernel_overrides()
                    .iter()
                    .map(|(&(i, j), &kernel)| KernelOverride { i, j, kernel })
                    .collect(),
            },
            weights: self
                .nonzero_weights()
                .map(|((i, j), w)| WeightEntry { i, j, w })
                .collect(),
        };
        toml::to_string(&file).expect("model serializes to TOML")
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let file: ModelFile = toml::from_str(text).map_err(|e| Error::ModelFile(e.to_string()))?;
        if file.baselines.len() != file.n {
            return Err(Error::ModelFile(format!(
                "n = {} but {} baselines given",
                file.n,
                file.baselines.len()
            )));
        }
        let mut model = HawkesModel::new(file.baselines, file.kernels.default, file.constants)?;
        for o in file.kernels.overrides {
            model.set_kernel(o.i, o.j, o.kernel)?;
        }
        for e in file.weights {
            if model.weight(e.i, e.j) != 0.0 {
                return Err(Error::ModelFile(format!(
                    "duplicate weight entry ({}, {})",
                    e.i, e.j
                )));
            }
            model.set_weight(e.i, e.j, e.w)?;
        }
        Ok(model)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_toml_str(&fs::read_to_string(path)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        fs::write(path, self.to_toml_string())?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const DOC_EXAMPLE: &str = r#"
n = 2

[constants]
mu_min = 1.0
mu_max = 2.5
w_min = 0.5
w_max = 0.5
w_sep = 0.5
smoothness = 2.6
kernel_mass = 0.5
stability_margin = 0.2
max_degree = 1

[[baselines]]
family = "constant"
level = 1.0

[[baselines]]
family = "sinusoidal"
level = 2.0
amplitude = 0.5
frequency = 6.283185307179586
phase = 0.0

[kernels.default]
family = "exponential"
decay = 2.0

[[kernels.overrides]]
i = 1
j = 0
kernel = { family = "modulated_exponential", base_decay = 2.0, modulation = 0.5, frequency = 1.0 }

[[weights]]
i = 1
j = 0
w = 0.5
"#;

    #[test]
    fn parses_documented_layout() {
        let m = HawkesModel::from_toml_str(DOC_EXAMPLE).unwrap();
        assert_eq!(m.node_count(), 2);
        assert_eq!(m.weight(1, 0), 0.5);
        assert_eq!(m.weight(0, 1), 0.0);
        assert_eq!(*m.kernel(1, 0), KernelSpec::modulated(2.0, 0.5, 1.0));
        assert_eq!(*m.kernel(0, 1), KernelSpec::exponential(2.0));
    }

    #[test]
    fn round_trips_exactly() {
        let m = HawkesModel::from_toml_str(DOC_EXAMPLE).unwrap();
        let again = HawkesModel::from_toml_str(&m.to_toml_string()).unwrap();
        assert_eq!(m, again);
        assert_eq!(m.fingerprint(), again.fingerprint());
    }

    #[test]
    fn rejects_malformed_files() {
        let wrong_count = DOC_EXAMPLE.replace("n = 2", "n = 3");
        assert!(HawkesModel::from_toml_str(&wrong_count).is_err());
        let unknown = DOC_EXAMPLE.replace("w = 0.5", "w = 0.5\nweight = 1.0");
        assert!(HawkesModel::from_toml_str(&unknown).is_err());
        let out_of_range = DOC_EXAMPLE.replace("i = 1\nj = 0\nw", "i = 4\nj = 0\nw");
        assert!(HawkesModel::from_toml_str(&out_of_range).is_err());
    }
}
