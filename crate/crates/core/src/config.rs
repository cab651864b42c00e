//! Workbench configuration file (TOML).
//!
//! ```toml
//! [generator]            # GeneratorGeometry; every key optional
//! layers = 6
//! grouping = [2, 2, 2]
//!
//! [[scenarios]]          # extra or replacement SceneSpecs, matched by id
//!
//! [dataset]              # DatasetConfig
//! [training]             # TrainConfig
//! [inversion]            # InversionConfig
//! [directions]           # n_train, n_val, lambdas, [directions.fit]
//! [attribution]          # samples, sigma, seed, steps
//! [service]              # host, port, workers, data_dir
//! ```
//!
//! The port can be overridden with `STYLEPROBE_PORT`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::attribution::{DEFAULT_IG_STEPS, DEFAULT_SMOOTHGRAD_SAMPLES, DEFAULT_SMOOTHGRAD_SIGMA};
use crate::classifier::TrainConfig;
use crate::directions::{
    DirectionFitConfig, DEFAULT_LAMBDAS, DEFAULT_LATENT_TRAIN, DEFAULT_LATENT_VAL,
};
use crate::error::{Error, Result};
use crate::generator::GeneratorGeometry;
use crate::inversion::InversionConfig;
use crate::scenario::{builtin_scenarios, DatasetConfig, SceneSpec};

pub const PORT_ENV: &str = "STYLEPROBE_PORT";

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DirectionsConfig {
    pub n_train: usize,
    pub n_val: usize,
    pub lambdas: Vec<f64>,
    pub fit: DirectionFitConfig,
    pub seed: u64,
}

impl Default for DirectionsConfig {
    fn default() -> Self {
        Self {
            n_train: DEFAULT_LATENT_TRAIN,
            n_val: DEFAULT_LATENT_VAL,
            lambdas: DEFAULT_LAMBDAS.to_vec(),
            fit: DirectionFitConfig::default(),
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AttributionConfig {
    pub samples: usize,
    pub sigma: f64,
    pub seed: u64,
    pub steps: usize,
}

impl Default for AttributionConfig {
    fn default() -> Self {
        Self {
            samples: DEFAULT_SMOOTHGRAD_SAMPLES,
            sigma: DEFAULT_SMOOTHGRAD_SIGMA,
            seed: 0,
            steps: DEFAULT_IG_STEPS,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ServiceConfig {
    pub host: String,
    pub port: u16,
    /// Inversion jobs allowed to run at once across all sessions.
    pub workers: usize,
    /// Holds `models/*.spm`, `directions/*.json` and `sessions/*.json`.
    pub data_dir: PathBuf,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            host: "127.0.0.1".into(),
            port: 8080,
            workers: 2,
            data_dir: PathBuf::from("data"),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkbenchConfig {
    pub generator: GeneratorGeometry,
    pub scenarios: Vec<SceneSpec>,
    pub dataset: DatasetConfig,
    pub training: TrainConfig,
    pub inversion: InversionConfig,
    pub directions: DirectionsConfig,
    pub attribution: AttributionConfig,
    pub service: ServiceConfig,
}

impl WorkbenchConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Relative `data_dir` values are resolved against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut cfg = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        if cfg.service.data_dir.is_relative() {
            if let Some(parent) = path.parent() {
                cfg.service.data_dir = parent.join(&cfg.service.data_dir);
            }
        }
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// Applies environment overrides read through `lookup`.
    pub fn apply_env(&mut self, lookup: impl Fn(&str) -> Option<String>) -> Result<()> {
        if let Some(port) = lookup(PORT_ENV) {
            self.service.port = port
                .trim()
                .parse()
                .map_err(|_| Error::Config(format!("{PORT_ENV} is not a port number: `{port}`")))?;
        }
        Ok(())
    }

    /// Built-in scenarios with configured ones replacing same-id entries
    /// and new ids appended.
    pub fn scenarios(&self) -> Vec<SceneSpec> {
        let mut all = builtin_scenarios();
        for s in &self.scenarios {
            match all.iter_mut().find(|b| b.id == s.id) {
                Some(slot) => *slot = s.clone(),
                None => all.push(s.clone()),
            }
        }
        all
    }

    pub fn validate(&self) -> Result<()> {
        self.generator.validate()?;
        for s in self.scenarios() {
            s.validate(self.generator.layers, self.generator.style_dim)?;
        }
        self.inversion.validate()?;
        if self.directions.n_train == 0
            || self.directions.n_val == 0
            || self.directions.lambdas.is_empty()
        {
            return Err(Error::Config(
                "directions need positive sizes and at least one lambda".into(),
            ));
        }
        if self.attribution.samples == 0
            || self.attribution.steps == 0
            || !(self.attribution.sigma >= 0.0)
        {
            return Err(Error::Config(
                "attribution samples/steps must be positive, sigma non-negative".into(),
            ));
        }
        if self.service.workers == 0 {
            return Err(Error::Config("service.workers must be at least 1".into()));
        }
        Ok(())
    }
}
