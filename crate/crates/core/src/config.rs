//! Toolkit configuration: every tunable constant of the pipeline in one TOML file.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::AnalysisParams;
use crate::discretize::{enumerate_valid, BinningSpec, Discretizer, ValidStates, ValidityMask};
use crate::metrics::MetricParams;
use crate::policy::{default_roster, GenerationPlan, PolicyVariant, QParams};
use crate::reliability::ReliabilityParams;
use crate::sim::{default_experiments, Experiment, SimConfig};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read config {path}: {source}")]
    Read { path: PathBuf, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// State component `component` may not exceed bin `max_bin`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ValidityRule {
    pub component: usize,
    pub max_bin: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    pub variants: Vec<String>,
    pub noise_scale: f64,
    /// per-label noise scale replacing `noise_scale`
    pub noise_overrides: BTreeMap<String, f64>,
    pub train_episodes: usize,
    pub exploit_episodes: usize,
    pub seed: u64,
    pub q_learning: QParams,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        Self {
            variants: default_roster().iter().map(PolicyVariant::label).collect(),
            noise_scale: 0.1,
            noise_overrides: BTreeMap::new(),
            train_episodes: 30,
            exploit_episodes: 10,
            seed: 20240601,
            q_learning: QParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ToolkitConfig {
    pub output_dir: PathBuf,
    pub binning: BinningSpec,
    pub validity: Vec<ValidityRule>,
    pub analysis: AnalysisParams,
    pub metrics: MetricParams,
    pub reliability: ReliabilityParams,
    pub generation: GenerationConfig,
    pub simulator: SimConfig,
    pub experiments: Vec<Experiment>,
}

impl Default for ToolkitConfig {
    fn default() -> Self {
        Self {
            output_dir: PathBuf::from("out"),
            binning: BinningSpec::default(),
            validity: vec![ValidityRule {
                component: 1,
                max_bin: 1,
            }],
            analysis: AnalysisParams::default(),
            metrics: MetricParams::default(),
            reliability: ReliabilityParams::default(),
            generation: GenerationConfig::default(),
            simulator: SimConfig::default(),
            experiments: default_experiments(),
        }
    }
}

impl ToolkitConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let cfg: ToolkitConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is always representable as TOML")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |m: String| ConfigError::Invalid(m);
        self.binning.validate().map_err(|e| invalid(e.to_string()))?;
        let components = self.binning.state_edges.len();
        for r in &self.validity {
            if r.component >= components {
                return Err(invalid(format!(
                    "validity rule names state component {} but there are {components}",
                    r.component
                )));
            }
        }
        self.simulator.validate().map_err(|e| invalid(e.to_string()))?;
        if self.binning.state_edges.len() != 3 || self.binning.action_edges.len() != 8 {
            return Err(invalid("binning must describe 3 observation and 8 action components".into()));
        }
        if self.experiments.is_empty() {
            return Err(invalid("no experiments defined".into()));
        }
        let mut seen = BTreeMap::new();
        for e in &self.experiments {
            if seen.insert(e.name.as_str(), ()).is_some() {
                return Err(invalid(format!("experiment {} defined twice", e.name)));
            }
        }
        self.variants().map_err(|e| invalid(e.to_string()))?;
        let g = &self.generation;
        if g.noise_scale < 0.0 || g.noise_overrides.values().any(|s| *s < 0.0) {
            return Err(invalid("noise scales must be non-negative".into()));
        }
        for label in g.noise_overrides.keys() {
            self.variant(label).map_err(|e| invalid(e.to_string()))?;
        }
        if self.generation.exploit_episodes == 0 {
            return Err(invalid("at least one exploit episode is needed".into()));
        }
        Ok(())
    }

    pub fn experiment(&self, name: &str) -> Option<&Experiment> {
        self.experiments.iter().find(|e| e.name == name)
    }

    pub fn experiment_names(&self) -> Vec<&str> {
        self.experiments.iter().map(|e| e.name.as_str()).collect()
    }

    /// The configured roster with noise scales resolved.
    pub fn variants(&self) -> Result<Vec<PolicyVariant>, crate::policy::PolicyError> {
        self.generation.variants.iter().map(|l| self.variant(l)).collect()
    }

    /// Any variant label, with the configured noise scale for it.
    pub fn variant(&self, label: &str) -> Result<PolicyVariant, crate::policy::PolicyError> {
        let scale = self.generation.noise_overrides.get(label).copied().unwrap_or(self.generation.noise_scale);
        Ok(label.parse::<PolicyVariant>()?.with_noise_scale(scale))
    }

    pub fn validity_mask(&self) -> ValidityMask {
        ValidityMask {
            max_bin: self.validity.iter().map(|r| (r.component, r.max_bin)).collect(),
        }
    }

    pub fn discretizer(&self) -> Discretizer {
        Discretizer::new(self.binning.clone()).expect("binning validated on load")
    }

    pub fn valid_states(&self) -> ValidStates {
        enumerate_valid(&self.validity_mask(), &self.binning.state_space().radices)
    }

    pub fn generation_plan(&self, experiment: &str) -> GenerationPlan {
        GenerationPlan {
            experiment_name: experiment.to_string(),
            train_episodes: self.generation.train_episodes,
            exploit_episodes: self.generation.exploit_episodes,
            base_seed: self.generation.seed,
            binning: self.binning.clone(),
            q_params: self.generation.q_learning.clone(),
            record_curves: false,
        }
    }
}
