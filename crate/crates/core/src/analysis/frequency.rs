use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AnalysisError, AnalysisParams, DiscreteEpisode};
use crate::discretize::ValidStates;
use crate::stats;

/// Visit counts of states and executed (state, action) pairs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FrequencyTable {
    pub state_counts: BTreeMap<usize, u64>,
    pub pair_counts: BTreeMap<(usize, usize), u64>,
    pub total_steps: u64,
}

impl FrequencyTable {
    pub fn from_episodes<'a, I>(episodes: I) -> Self
    where
        I: IntoIterator<Item = &'a DiscreteEpisode>,
    {
        let mut t = Self::default();
        for ep in episodes {
            for (&s, &a) in ep.states.iter().zip(&ep.actions) {
                *t.state_counts.entry(s).or_default() += 1;
                *t.pair_counts.entry((s, a)).or_default() += 1;
                t.total_steps += 1;
            }
        }
        t
    }

    pub fn visited_states(&self) -> usize {
        self.state_counts.len()
    }

    pub fn distinct_pairs(&self) -> usize {
        self.pair_counts.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateFrequency {
    pub visited_valid: usize,
    pub valid_count: usize,
    /// visited valid states / valid states
    pub coverage: f64,
    /// normalized entropy of visit counts; 1 when at most one state was visited
    pub dispersion: f64,
    pub frequent: BTreeSet<usize>,
    pub infrequent: BTreeSet<usize>,
}

pub fn state_frequency_analysis(
    table: &FrequencyTable,
    valid: &ValidStates,
    params: &AnalysisParams,
) -> Result<StateFrequency, AnalysisError> {
    if table.total_steps == 0 {
        return Err(AnalysisError::Empty("train"));
    }
    if valid.valid_count() == 0 {
        return Err(AnalysisError::NoValidStates);
    }
    let visited_valid = table.state_counts.keys().filter(|&&s| valid.contains(s)).count();
    let counts: Vec<f64> = table.state_counts.values().map(|&c| c as f64).collect();
    let mu = stats::mean(&counts).expect("non-empty");
    let sigma = stats::std_dev(&counts).expect("non-empty");
    let hi = mu + params.frequency_k * sigma;
    let lo = (mu - params.frequency_k * sigma).max(1.0);
    Ok(StateFrequency {
        visited_valid,
        valid_count: valid.valid_count(),
        coverage: visited_valid as f64 / valid.valid_count() as f64,
        dispersion: stats::normalized_entropy(table.state_counts.values().copied()).unwrap_or(1.0),
        frequent: select(&table.state_counts, |c| c >= hi),
        infrequent: select(&table.state_counts, |c| c <= lo),
    })
}

fn select(counts: &BTreeMap<usize, u64>, keep: impl Fn(f64) -> bool) -> BTreeSet<usize> {
    counts
        .iter()
        .filter(|(_, &c)| keep(c as f64))
        .map(|(&s, _)| s)
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateActionFrequency {
    /// min(1, distinct pairs / (visited states * candidate actions per state))
    pub pair_coverage: f64,
    /// normalized entropy of action counts per visited state; 0 for a single action
    #[serde(with = "super::map_as_pairs")]
    pub action_dispersion: BTreeMap<usize, f64>,
    pub mean_dispersion: f64,
    pub certain: BTreeSet<usize>,
    pub uncertain: BTreeSet<usize>,
}

pub fn state_action_frequency_analysis(
    table: &FrequencyTable,
    params: &AnalysisParams,
) -> Result<StateActionFrequency, AnalysisError> {
    if table.total_steps == 0 {
        return Err(AnalysisError::Empty("train"));
    }
    let mut per_state: BTreeMap<usize, Vec<u64>> = BTreeMap::new();
    for (&(s, _), &c) in &table.pair_counts {
        per_state.entry(s).or_default().push(c);
    }
    let action_dispersion: BTreeMap<usize, f64> = per_state
        .into_iter()
        .map(|(s, counts)| (s, stats::normalized_entropy(counts).unwrap_or(0.0)))
        .collect();
    let values: Vec<f64> = action_dispersion.values().copied().collect();
    let budget = (table.visited_states() * params.candidate_actions_per_state) as f64;
    let pair_coverage = if budget > 0.0 {
        (table.distinct_pairs() as f64 / budget).min(1.0)
    } else {
        1.0
    };
    Ok(StateActionFrequency {
        pair_coverage,
        mean_dispersion: stats::mean(&values).unwrap_or(0.0),
        certain: action_dispersion
            .iter()
            .filter(|(_, &d)| d <= params.certain_max_dispersion)
            .map(|(&s, _)| s)
            .collect(),
        uncertain: action_dispersion
            .iter()
            .filter(|(_, &d)| d >= params.uncertain_min_dispersion)
            .map(|(&s, _)| s)
            .collect(),
        action_dispersion,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct RewardAnalysis {
    pub pair_means: BTreeMap<(usize, usize), f64>,
    pub mean: f64,
    pub std_dev: f64,
    pub high: BTreeSet<(usize, usize)>,
    pub low: BTreeSet<(usize, usize)>,
}

/// Flags (state, action) pairs whose mean reward lies more than `k` standard
/// deviations away from the mean over all pairs.
pub fn reward_analysis<'a, I>(episodes: I, k: f64) -> Result<RewardAnalysis, AnalysisError>
where
    I: IntoIterator<Item = &'a DiscreteEpisode>,
{
    let mut sums: BTreeMap<(usize, usize), (f64, u64)> = BTreeMap::new();
    for ep in episodes {
        for ((&s, &a), &r) in ep.states.iter().zip(&ep.actions).zip(&ep.rewards) {
            let e = sums.entry((s, a)).or_default();
            e.0 += r;
            e.1 += 1;
        }
    }
    if sums.is_empty() {
        return Err(AnalysisError::Empty("train"));
    }
    let pair_means: BTreeMap<(usize, usize), f64> =
        sums.into_iter().map(|(p, (sum, n))| (p, sum / n as f64)).collect();
    Ok(classify_rewards(pair_means, k))
}

pub(crate) fn classify_rewards(pair_means: BTreeMap<(usize, usize), f64>, k: f64) -> RewardAnalysis {
    let values: Vec<f64> = pair_means.values().copied().collect();
    let mean = stats::mean(&values).unwrap_or(0.0);
    let std_dev = stats::std_dev(&values).unwrap_or(0.0);
    let pick = |keep: &dyn Fn(f64) -> bool| {
        pair_means
            .iter()
            .filter(|(_, &m)| keep(m))
            .map(|(&p, _)| p)
            .collect::<BTreeSet<_>>()
    };
    let high = pick(&|m| m > mean + k * std_dev);
    let low = pick(&|m| m < mean - k * std_dev);
    RewardAnalysis {
        pair_means,
        mean,
        std_dev,
        high,
        low,
    }
}
