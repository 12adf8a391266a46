use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::frequency::classify_rewards;
use super::{
    build_empirical_model, discretize_episode, extract_exploit_sequences, reward_analysis,
    sequence_analysis, state_action_frequency_analysis, state_frequency_analysis,
    transition_value_analysis, AnalysisError, AnalysisParams, DiscreteEpisode, EmpiricalModel,
    ExtremaReport, FrequencyTable, RewardAnalysis, SequenceRecord, StateActionFrequency,
    StateFrequency,
};
use crate::discretize::{Discretizer, ValidStates};
use crate::trace::{EpisodeKind, TraceSet};

pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSummary {
    pub run_name: String,
    pub kind: EpisodeKind,
    pub steps: usize,
    pub reward_sum: f64,
}

impl EpisodeSummary {
    pub fn mean_reward(&self) -> f64 {
        self.reward_sum / self.steps as f64
    }
}

/// Everything the analyses produce for one algorithm's trace set.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisReport {
    pub algorithm_name: String,
    pub experiment_name: String,
    pub params: AnalysisParams,
    pub frequencies: FrequencyTable,
    pub state_frequency: StateFrequency,
    pub state_action_frequency: StateActionFrequency,
    pub rewards: RewardAnalysis,
    pub model: EmpiricalModel,
    pub extrema: ExtremaReport,
    pub planned_sequences: Vec<SequenceRecord>,
    pub exploit_sequences: Vec<SequenceRecord>,
    /// every episode in trace order
    pub episodes: Vec<EpisodeSummary>,
}

impl AnalysisReport {
    pub fn train_episodes(&self) -> impl Iterator<Item = &EpisodeSummary> {
        self.episodes.iter().filter(|e| e.kind == EpisodeKind::Train)
    }

    pub fn exploit_episodes(&self) -> impl Iterator<Item = &EpisodeSummary> {
        self.episodes.iter().filter(|e| e.kind == EpisodeKind::Exploit)
    }
}

/// Runs all analyses on one trace set. Frequencies, rewards and the value
/// model use train episodes; observed sequences use exploit episodes.
pub fn analyze(
    set: &TraceSet,
    discretizer: &Discretizer,
    valid: &ValidStates,
    params: &AnalysisParams,
) -> Result<AnalysisReport, AnalysisError> {
    let discrete: Vec<DiscreteEpisode> = set
        .episodes
        .iter()
        .map(|e| discretize_episode(e, discretizer))
        .collect::<Result<_, _>>()?;
    let train: Vec<&DiscreteEpisode> = discrete.iter().filter(|e| e.kind == EpisodeKind::Train).collect();
    let exploit: Vec<&DiscreteEpisode> =
        discrete.iter().filter(|e| e.kind == EpisodeKind::Exploit).collect();
    if exploit.is_empty() {
        return Err(AnalysisError::Empty("exploit"));
    }

    let frequencies = FrequencyTable::from_episodes(train.iter().copied());
    let state_frequency = state_frequency_analysis(&frequencies, valid, params)?;
    let state_action_frequency = state_action_frequency_analysis(&frequencies, params)?;
    let rewards = reward_analysis(train.iter().copied(), params.reward_k)?;
    let model = build_empirical_model(train.iter().copied(), params.gamma)?;
    let extrema = transition_value_analysis(&model);
    let planned_sequences =
        sequence_analysis(&model, &extrema, params.p_min, params.max_sequence_len, params.best_state);
    let exploit_sequences = extract_exploit_sequences(exploit.iter().copied(), params.best_state);
    let episodes = set
        .episodes
        .iter()
        .map(|e| EpisodeSummary {
            run_name: e.run_name.clone(),
            kind: e.kind,
            steps: e.steps.len(),
            reward_sum: e.steps.iter().map(|s| s.reward).sum(),
        })
        .collect();

    Ok(AnalysisReport {
        algorithm_name: set.algorithm_name.clone(),
        experiment_name: set.experiment_name.clone(),
        params: params.clone(),
        frequencies,
        state_frequency,
        state_action_frequency,
        rewards,
        model,
        extrema,
        planned_sequences,
        exploit_sequences,
        episodes,
    })
}

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("report write failed: {0}")]
    Write(#[from] std::io::Error),
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("report is missing its {0} record")]
    Missing(&'static str),
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum Record {
    Header {
        format_version: u32,
        algorithm_name: String,
        experiment_name: String,
        params: AnalysisParams,
    },
    Episode(EpisodeSummary),
    StateCount {
        state: usize,
        count: u64,
    },
    Pair {
        state: usize,
        action: usize,
        count: u64,
        mean_reward: f64,
        q: f64,
    },
    Transition {
        state: usize,
        action: usize,
        next: usize,
        count: u64,
    },
    StateFrequency(StateFrequency),
    StateActionFrequency(StateActionFrequency),
    RewardSummary {
        mean: f64,
        std_dev: f64,
        high: Vec<(usize, usize)>,
        low: Vec<(usize, usize)>,
    },
    Extrema(ExtremaReport),
    PlannedSequence(SequenceRecord),
    ExploitSequence(SequenceRecord),
}

pub fn write_report<W: Write>(report: &AnalysisReport, mut sink: W) -> Result<(), ReportError> {
    let mut put = |r: &Record| -> Result<(), ReportError> {
        serde_json::to_writer(&mut sink, r).map_err(std::io::Error::from)?;
        sink.write_all(b"\n")?;
        Ok(())
    };
    put(&Record::Header {
        format_version: REPORT_FORMAT_VERSION,
        algorithm_name: report.algorithm_name.clone(),
        experiment_name: report.experiment_name.clone(),
        params: report.params.clone(),
    })?;
    for e in &report.episodes {
        put(&Record::Episode(e.clone()))?;
    }
    for (&state, &count) in &report.frequencies.state_counts {
        put(&Record::StateCount { state, count })?;
    }
    for (&(state, action), &count) in &report.frequencies.pair_counts {
        put(&Record::Pair {
            state,
            action,
            count,
            mean_reward: report.rewards.pair_means[&(state, action)],
            q: report.model.q_table[&(state, action)],
        })?;
    }
    for (&(state, action), row) in &report.model.transitions {
        for (&next, &count) in row {
            put(&Record::Transition {
                state,
                action,
                next,
                count,
            })?;
        }
    }
    put(&Record::StateFrequency(report.state_frequency.clone()))?;
    put(&Record::StateActionFrequency(report.state_action_frequency.clone()))?;
    put(&Record::RewardSummary {
        mean: report.rewards.mean,
        std_dev: report.rewards.std_dev,
        high: report.rewards.high.iter().copied().collect(),
        low: report.rewards.low.iter().copied().collect(),
    })?;
    put(&Record::Extrema(report.extrema.clone()))?;
    for s in &report.planned_sequences {
        put(&Record::PlannedSequence(s.clone()))?;
    }
    for s in &report.exploit_sequences {
        put(&Record::ExploitSequence(s.clone()))?;
    }
    sink.flush()?;
    Ok(())
}

pub fn read_report<R: BufRead>(source: R) -> Result<AnalysisReport, ReportError> {
    let mut header = None;
    let mut episodes = Vec::new();
    let mut frequencies = FrequencyTable::default();
    let mut pair_means = BTreeMap::new();
    let mut q_table = BTreeMap::new();
    let mut transitions: BTreeMap<(usize, usize), BTreeMap<usize, u64>> = BTreeMap::new();
    let mut state_frequency = None;
    let mut state_action_frequency = None;
    let mut reward_summary = None;
    let mut extrema = None;
    let mut planned_sequences = Vec::new();
    let mut exploit_sequences = Vec::new();

    for (i, line) in source.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: Record = serde_json::from_str(&line).map_err(|e| ReportError::Malformed {
            line: i + 1,
            message: e.to_string(),
        })?;
        match rec {
            Record::Header {
                format_version,
                algorithm_name,
                experiment_name,
                params,
            } => {
                if format_version != REPORT_FORMAT_VERSION {
                    return Err(ReportError::Malformed {
                        line: i + 1,
                        message: format!("unsupported report version {format_version}"),
                    });
                }
                header = Some((algorithm_name, experiment_name, params));
            }
            Record::Episode(e) => episodes.push(e),
            Record::StateCount { state, count } => {
                frequencies.state_counts.insert(state, count);
                frequencies.total_steps += count;
            }
            Record::Pair {
                state,
                action,
                count,
                mean_reward,
                q,
            } => {
                frequencies.pair_counts.insert((state, action), count);
                pair_means.insert((state, action), mean_reward);
                q_table.insert((state, action), q);
            }
            Record::Transition {
                state,
                action,
                next,
                count,
            } => {
                transitions.entry((state, action)).or_default().insert(next, count);
            }
            Record::StateFrequency(s) => state_frequency = Some(s),
            Record::StateActionFrequency(s) => state_action_frequency = Some(s),
            Record::RewardSummary {
                mean,
                std_dev,
                high,
                low,
            } => reward_summary = Some((mean, std_dev, high, low)),
            Record::Extrema(e) => extrema = Some(e),
            Record::PlannedSequence(s) => planned_sequences.push(s),
            Record::ExploitSequence(s) => exploit_sequences.push(s),
        }
    }

    let (algorithm_name, experiment_name, params) = header.ok_or(ReportError::Missing("header"))?;
    let (mean, std_dev, high, low) = reward_summary.ok_or(ReportError::Missing("reward_summary"))?;
    let mut rewards = classify_rewards(pair_means, params.reward_k);
    rewards.mean = mean;
    rewards.std_dev = std_dev;
    rewards.high = high.into_iter().collect::<BTreeSet<_>>();
    rewards.low = low.into_iter().collect::<BTreeSet<_>>();
    let model = EmpiricalModel::from_parts(
        transitions,
        frequencies.pair_counts.clone(),
        q_table,
        params.gamma,
    );
    Ok(AnalysisReport {
        algorithm_name,
        experiment_name,
        params,
        frequencies,
        state_frequency: state_frequency.ok_or(ReportError::Missing("state_frequency"))?,
        state_action_frequency: state_action_frequency
            .ok_or(ReportError::Missing("state_action_frequency"))?,
        rewards,
        model,
        extrema: extrema.ok_or(ReportError::Missing("extrema"))?,
        planned_sequences,
        exploit_sequences,
        episodes,
    })
}
