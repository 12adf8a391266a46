//! Interestingness analyses over discretized interaction traces: state and
//! state-action frequencies, reward outliers, an empirical transition/value
//! model with its extrema, and planned/observed state-action sequences.

mod frequency;
mod model;
mod report;
mod sequence;

pub use frequency::{
    reward_analysis, state_action_frequency_analysis, state_frequency_analysis, FrequencyTable,
    RewardAnalysis, StateActionFrequency, StateFrequency,
};
pub use model::{build_empirical_model, transition_value_analysis, EmpiricalModel, ExtremaReport};
pub use report::{analyze, read_report, write_report, AnalysisReport, EpisodeSummary, ReportError};
pub use sequence::{extract_exploit_sequences, sequence_analysis, SequenceRecord};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::discretize::{DiscretizeError, Discretizer};
use crate::trace::{Episode, EpisodeKind};

#[derive(Debug, Error, PartialEq)]
pub enum AnalysisError {
    #[error("no {0} steps to analyze")]
    Empty(&'static str),
    #[error("no valid states: coverage is undefined")]
    NoValidStates,
    #[error("episode {episode} step {step}: {source}")]
    Discretize {
        episode: String,
        step: usize,
        #[source]
        source: DiscretizeError,
    },
}

/// Tunables of the analyses. Thresholds the source method leaves open are
/// exposed here with their defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AnalysisParams {
    pub gamma: f64,
    /// Frequent states have count >= mean + k*std, infrequent <= max(1, mean - k*std).
    pub frequency_k: f64,
    pub certain_max_dispersion: f64,
    pub uncertain_min_dispersion: f64,
    /// Reward outliers lie beyond mean +- k*std of per-pair mean rewards.
    pub reward_k: f64,
    pub p_min: f64,
    pub max_sequence_len: usize,
    pub best_state: usize,
    pub candidate_actions_per_state: usize,
}

impl Default for AnalysisParams {
    fn default() -> Self {
        Self {
            gamma: 0.95,
            frequency_k: 1.0,
            certain_max_dispersion: 0.25,
            uncertain_min_dispersion: 0.75,
            reward_k: 1.0,
            p_min: 0.1,
            max_sequence_len: 10,
            best_state: 0,
            candidate_actions_per_state: 8,
        }
    }
}

/// An episode with every step reduced to (state index, action index, reward).
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteEpisode {
    pub run_name: String,
    pub kind: EpisodeKind,
    pub states: Vec<usize>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
}

impl DiscreteEpisode {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    /// Test helper and synthetic-trace constructor.
    pub fn new(run_name: impl Into<String>, kind: EpisodeKind, steps: &[(usize, usize, f64)]) -> Self {
        Self {
            run_name: run_name.into(),
            kind,
            states: steps.iter().map(|s| s.0).collect(),
            actions: steps.iter().map(|s| s.1).collect(),
            rewards: steps.iter().map(|s| s.2).collect(),
        }
    }
}

pub fn discretize_episode(ep: &Episode, d: &Discretizer) -> Result<DiscreteEpisode, AnalysisError> {
    let mut out = DiscreteEpisode {
        run_name: ep.run_name.clone(),
        kind: ep.kind,
        states: Vec::with_capacity(ep.steps.len()),
        actions: Vec::with_capacity(ep.steps.len()),
        rewards: Vec::with_capacity(ep.steps.len()),
    };
    for (i, step) in ep.steps.iter().enumerate() {
        let (s, a) = d.discretize_step(step).map_err(|source| AnalysisError::Discretize {
            episode: ep.run_name.clone(),
            step: i,
            source,
        })?;
        out.states.push(s);
        out.actions.push(a);
        out.rewards.push(step.reward);
    }
    Ok(out)
}

/// Integer-keyed maps as `[[key, value], ...]`; JSON object keys are strings,
/// which tagged records cannot turn back into integers.
pub(crate) mod map_as_pairs {
    use std::collections::BTreeMap;

    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<K: Serialize, V: Serialize, S: Serializer>(map: &BTreeMap<K, V>, s: S) -> Result<S::Ok, S::Error> {
        s.collect_seq(map.iter())
    }

    pub fn deserialize<'de, K, V, D>(d: D) -> Result<BTreeMap<K, V>, D::Error>
    where
        K: Deserialize<'de> + Ord,
        V: Deserialize<'de>,
        D: Deserializer<'de>,
    {
        Ok(Vec::<(K, V)>::deserialize(d)?.into_iter().collect())
    }
}
