//! Domain-driven metrics: best-sequence percentage, median exploit reward,
//! state coverage, unified coverage and training mean reward, plus per-metric
//! ranking and the aggregate ranking built from them.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analysis::{AnalysisReport, EpisodeSummary, FrequencyTable, SequenceRecord};
use crate::discretize::ValidStates;
use crate::ranking::{self, Direction, RankError};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricError {
    #[error("no exploit sequences")]
    NoSequences,
    #[error("no {0} episodes")]
    NoEpisodes(&'static str),
    #[error("no valid states")]
    NoValidStates,
    #[error("no visited states")]
    NoVisitedStates,
    #[error("missing ranks for metric {0}")]
    MissingMetric(Metric),
    #[error("metric {metric} has {found} ranks for {expected} algorithms")]
    Misaligned {
        metric: Metric,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Rank(#[from] RankError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Metric {
    MeanReward,
    StateCoverage,
    UnifiedCoverage,
    BestSequences,
    MedianReward,
}

impl Metric {
    /// Column order of the domain ranking table.
    pub const ALL: [Metric; 5] = [
        Metric::MeanReward,
        Metric::StateCoverage,
        Metric::UnifiedCoverage,
        Metric::BestSequences,
        Metric::MedianReward,
    ];

    pub fn title(self) -> &'static str {
        match self {
            Metric::MeanReward => "Mean Reward",
            Metric::StateCoverage => "State Coverage",
            Metric::UnifiedCoverage => "Unified Coverage",
            Metric::BestSequences => "Best sequences %",
            Metric::MedianReward => "Median Reward",
        }
    }

    pub fn direction(self) -> Direction {
        Direction::HigherIsBetter
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.title())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetricParams {
    /// Weight of state coverage in unified coverage; the rest goes to
    /// state-action coverage.
    pub unified_weight: f64,
}

impl Default for MetricParams {
    fn default() -> Self {
        Self { unified_weight: 0.5 }
    }
}

/// Percentage of exploit sequences ending in the best state.
pub fn sequence_comparison_metric(sequences: &[SequenceRecord]) -> Result<f64, MetricError> {
    if sequences.is_empty() {
        return Err(MetricError::NoSequences);
    }
    let best = sequences.iter().filter(|s| s.is_best).count();
    Ok(100.0 * best as f64 / sequences.len() as f64)
}

/// Median over exploit episodes of each episode's mean reward.
pub fn median_mean_reward_metric<'a, I>(exploit: I) -> Result<f64, MetricError>
where
    I: IntoIterator<Item = &'a EpisodeSummary>,
{
    let means: Vec<f64> = exploit.into_iter().map(EpisodeSummary::mean_reward).collect();
    stats::median(&means).ok_or(MetricError::NoEpisodes("exploit"))
}

pub fn state_coverage_metric(train: &FrequencyTable, valid: &ValidStates) -> Result<f64, MetricError> {
    state_coverage_pct(train.state_counts.keys().copied(), valid)
}

fn state_coverage_pct(visited: impl Iterator<Item = usize>, valid: &ValidStates) -> Result<f64, MetricError> {
    if valid.valid_count() == 0 {
        return Err(MetricError::NoValidStates);
    }
    let hit = visited.filter(|&s| valid.contains(s)).count();
    Ok(100.0 * hit as f64 / valid.valid_count() as f64)
}

/// `100 * (w * state_frac + (1 - w) * pair_frac)` where `pair_frac` caps the
/// distinct visited pairs at `candidate_actions_per_state` per visited state.
pub fn unified_coverage_metric(
    train: &FrequencyTable,
    valid: &ValidStates,
    candidate_actions_per_state: usize,
    weight: f64,
) -> Result<f64, MetricError> {
    let state_frac = state_coverage_metric(train, valid)? / 100.0;
    unified_from_parts(
        state_frac,
        train.visited_states(),
        train.distinct_pairs(),
        candidate_actions_per_state,
        weight,
    )
}

fn unified_from_parts(
    state_frac: f64,
    visited_states: usize,
    distinct_pairs: usize,
    candidate_actions_per_state: usize,
    weight: f64,
) -> Result<f64, MetricError> {
    if visited_states == 0 {
        return Err(MetricError::NoVisitedStates);
    }
    let budget = (visited_states * candidate_actions_per_state) as f64;
    let pair_frac = (distinct_pairs as f64 / budget).min(1.0);
    Ok(100.0 * (weight * state_frac + (1.0 - weight) * pair_frac))
}

/// Mean reward over all training steps pooled across episodes.
pub fn mean_reward_metric<'a, I>(train: I) -> Result<f64, MetricError>
where
    I: IntoIterator<Item = &'a EpisodeSummary>,
{
    let (sum, n) = train
        .into_iter()
        .fold((0.0, 0usize), |(sum, n), e| (sum + e.reward_sum, n + e.steps));
    if n == 0 {
        return Err(MetricError::NoEpisodes("train"));
    }
    Ok(sum / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub algorithm: String,
    pub mean_reward_train: f64,
    pub state_coverage_pct: f64,
    pub unified_coverage_pct: f64,
    pub best_sequence_pct: f64,
    pub median_mean_reward_exploit: f64,
}

impl MetricRow {
    pub fn get(&self, m: Metric) -> f64 {
        match m {
            Metric::MeanReward => self.mean_reward_train,
            Metric::StateCoverage => self.state_coverage_pct,
            Metric::UnifiedCoverage => self.unified_coverage_pct,
            Metric::BestSequences => self.best_sequence_pct,
            Metric::MedianReward => self.median_mean_reward_exploit,
        }
    }

    pub fn set(&mut self, m: Metric, value: f64) {
        match m {
            Metric::MeanReward => self.mean_reward_train = value,
            Metric::StateCoverage => self.state_coverage_pct = value,
            Metric::UnifiedCoverage => self.unified_coverage_pct = value,
            Metric::BestSequences => self.best_sequence_pct = value,
            Metric::MedianReward => self.median_mean_reward_exploit = value,
        }
    }
}

/// Computes all five metrics from an analysis report.
pub fn metric_row(report: &AnalysisReport, params: &MetricParams) -> Result<MetricRow, MetricError> {
    let sf = &report.state_frequency;
    if sf.valid_count == 0 {
        return Err(MetricError::NoValidStates);
    }
    let state_frac = sf.visited_valid as f64 / sf.valid_count as f64;
    Ok(MetricRow {
        algorithm: report.algorithm_name.clone(),
        mean_reward_train: mean_reward_metric(report.train_episodes())?,
        state_coverage_pct: 100.0 * state_frac,
        unified_coverage_pct: unified_from_parts(
            state_frac,
            report.frequencies.visited_states(),
            report.frequencies.distinct_pairs(),
            report.params.candidate_actions_per_state,
            params.unified_weight,
        )?,
        best_sequence_pct: sequence_comparison_metric(&report.exploit_sequences)?,
        median_mean_reward_exploit: median_mean_reward_metric(report.exploit_episodes())?,
    })
}

/// Dense ranks of `values` keyed by algorithm.
pub fn rank_by_metric(
    values: &[(String, f64)],
    direction: Direction,
) -> Result<Vec<(String, usize)>, MetricError> {
    let names: Vec<String> = values.iter().map(|v| v.0.clone()).collect();
    let vals: Vec<f64> = values.iter().map(|v| v.1).collect();
    let ranks = ranking::dense_ranks(&names, &vals, direction)?;
    Ok(names.into_iter().zip(ranks).collect())
}

/// Per-metric ranks aligned with `algorithms`.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MetricRanks {
    pub algorithms: Vec<String>,
    pub ranks: BTreeMap<Metric, Vec<usize>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankRow {
    pub algorithm: String,
    /// in [`Metric::ALL`] order
    pub ranks: [usize; 5],
    pub aggregate_rank: usize,
    pub final_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTable {
    /// sorted by final rank, then algorithm name
    pub rows: Vec<RankRow>,
}

impl RankTable {
    pub fn row(&self, algorithm: &str) -> Option<&RankRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm)
    }
}

/// Sums the five metric ranks and assigns dense final ranks by ascending sum.
pub fn aggregate_ranking(per_metric: &MetricRanks) -> Result<RankTable, MetricError> {
    let n = per_metric.algorithms.len();
    if n < 2 {
        return Err(RankError::TooFew(n).into());
    }
    let mut columns = Vec::with_capacity(5);
    for m in Metric::ALL {
        let col = per_metric.ranks.get(&m).ok_or(MetricError::MissingMetric(m))?;
        if col.len() != n {
            return Err(MetricError::Misaligned {
                metric: m,
                expected: n,
                found: col.len(),
            });
        }
        columns.push(col);
    }
    let aggregates: Vec<f64> = (0..n)
        .map(|i| columns.iter().map(|c| c[i]).sum::<usize>() as f64)
        .collect();
    let finals = ranking::dense_ranks_unchecked(&aggregates, Direction::LowerIsBetter);
    let mut rows: Vec<RankRow> = (0..n)
        .map(|i| RankRow {
            algorithm: per_metric.algorithms[i].clone(),
            ranks: std::array::from_fn(|k| columns[k][i]),
            aggregate_rank: aggregates[i] as usize,
            final_rank: finals[i] as f64,
        })
        .collect();
    rows.sort_by(|a, b| a.final_rank.total_cmp(&b.final_rank).then_with(|| a.algorithm.cmp(&b.algorithm)));
    Ok(RankTable { rows })
}

/// Ranks every metric column of `rows` and aggregates.
pub fn rank_metric_table(rows: &[MetricRow]) -> Result<RankTable, MetricError> {
    let algorithms: Vec<String> = rows.iter().map(|r| r.algorithm.clone()).collect();
    let mut ranks = BTreeMap::new();
    for m in Metric::ALL {
        let values: Vec<f64> = rows.iter().map(|r| r.get(m)).collect();
        ranks.insert(m, ranking::dense_ranks(&algorithms, &values, m.direction())?);
    }
    aggregate_ranking(&MetricRanks { algorithms, ranks })
}
