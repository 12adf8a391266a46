//! Reliability metrics over a training performance curve: dispersion as the
//! windowed IQR of the detrended curve, short-term risk as CVaR of
//! step-to-step differences, long-term risk as CVaR of drawdowns, and median
//! performance. Ranked with tie-averaged ordinal ranks and combined with the
//! domain aggregate rank.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::metrics::RankTable;
use crate::ranking::{self, dense_ranks_unchecked, Direction, RankError};
use crate::stats;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ReliabilityError {
    #[error("series needs at least {needed} values, got {got}")]
    TooShort { needed: usize, got: usize },
    #[error("empty input")]
    Empty,
    #[error("alpha {0} outside (0, 1)")]
    Alpha(f64),
    #[error("algorithm sets differ: {}", .0.join(", "))]
    AlgorithmMismatch(Vec<String>),
    #[error(transparent)]
    Rank(#[from] RankError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ReliabilityParams {
    pub alpha: f64,
    /// IQR windows over the training curve (early, middle, end by default)
    pub windows: usize,
}

impl Default for ReliabilityParams {
    fn default() -> Self {
        Self { alpha: 0.05, windows: 3 }
    }
}

/// First differences `y[t+1] - y[t]`.
pub fn detrend(series: &[f64]) -> Result<Vec<f64>, ReliabilityError> {
    if series.len() < 2 {
        return Err(ReliabilityError::TooShort {
            needed: 2,
            got: series.len(),
        });
    }
    Ok(series.windows(2).map(|w| w[1] - w[0]).collect())
}

pub fn iqr(values: &[f64]) -> Option<f64> {
    let s = stats::sorted(values);
    if s.is_empty() {
        return None;
    }
    Some(stats::quantile_sorted(&s, 0.75) - stats::quantile_sorted(&s, 0.25))
}

/// IQR of the detrended series in `windows` contiguous segments; the last
/// segment takes the remainder.
pub fn iqr_dispersion(series: &[f64], windows: usize) -> Result<Vec<f64>, ReliabilityError> {
    let windows = windows.max(1);
    if series.len() < 2 * windows {
        return Err(ReliabilityError::TooShort {
            needed: 2 * windows,
            got: series.len(),
        });
    }
    let diffs = detrend(series)?;
    let len = diffs.len() / windows;
    Ok((0..windows)
        .map(|w| {
            let end = if w + 1 == windows { diffs.len() } else { (w + 1) * len };
            iqr(&diffs[w * len..end]).expect("segments are non-empty")
        })
        .collect())
}

/// Mean of the values at or below the `alpha` quantile.
pub fn cvar(values: &[f64], alpha: f64) -> Result<f64, ReliabilityError> {
    if values.is_empty() {
        return Err(ReliabilityError::Empty);
    }
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(ReliabilityError::Alpha(alpha));
    }
    let sorted = stats::sorted(values);
    let var = stats::quantile_sorted(&sorted, alpha);
    let tail: Vec<f64> = sorted.iter().copied().take_while(|&v| v <= var).collect();
    Ok(stats::mean(&tail).unwrap_or(sorted[0]))
}

/// Short-term risk: CVaR of the step-to-step differences. Higher is better.
pub fn cvar_on_differences(series: &[f64], alpha: f64) -> Result<f64, ReliabilityError> {
    cvar(&detrend(series)?, alpha)
}

/// Running peak minus current value, never negative.
pub fn drawdowns(series: &[f64]) -> Vec<f64> {
    let mut peak = f64::NEG_INFINITY;
    series
        .iter()
        .map(|&v| {
            peak = peak.max(v);
            peak - v
        })
        .collect()
}

/// Long-term risk: CVaR of negated drawdowns, so the deepest drawdowns form
/// the lower tail. Higher (closer to zero) is better.
pub fn cvar_on_drawdown(series: &[f64], alpha: f64) -> Result<f64, ReliabilityError> {
    if series.is_empty() {
        return Err(ReliabilityError::Empty);
    }
    let neg: Vec<f64> = drawdowns(series).into_iter().map(|d| -d).collect();
    cvar(&neg, alpha).map(|v| v + 0.0) // normalize -0.0
}

pub fn median_performance(series: &[f64]) -> Result<f64, ReliabilityError> {
    stats::median(series).ok_or(ReliabilityError::Empty)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityScores {
    pub algorithm: String,
    pub iqr_scores: Vec<f64>,
    pub cvar_diff: f64,
    pub cvar_drawdown: f64,
    pub median_performance: f64,
}

impl ReliabilityScores {
    /// Per-window IQRs reduced by their mean.
    pub fn dispersion(&self) -> f64 {
        stats::mean(&self.iqr_scores).unwrap_or(0.0)
    }
}

/// Scores one training curve (per-episode mean reward in episode order).
pub fn reliability_scores(
    algorithm: &str,
    series: &[f64],
    params: &ReliabilityParams,
) -> Result<ReliabilityScores, ReliabilityError> {
    Ok(ReliabilityScores {
        algorithm: algorithm.to_string(),
        iqr_scores: iqr_dispersion(series, params.windows)?,
        cvar_diff: cvar_on_differences(series, params.alpha)?,
        cvar_drawdown: cvar_on_drawdown(series, params.alpha)?,
        median_performance: median_performance(series)?,
    })
}

/// Ranks in the order IQR, CVaR on differences, CVaR on drawdown, median.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReliabilityRanks {
    pub algorithm: String,
    pub ranks: [f64; 4],
}

pub const RELIABILITY_COLUMNS: [&str; 4] = ["IQR", "LCVaRonDiff", "LCVaRonDrawDown", "Median Performance"];

/// Tie-averaged ordinal ranks: IQR lower-is-better, the rest higher-is-better.
pub fn rank_reliability(scores: &[ReliabilityScores]) -> Result<Vec<ReliabilityRanks>, ReliabilityError> {
    let names: Vec<String> = scores.iter().map(|s| s.algorithm.clone()).collect();
    let columns: [(Vec<f64>, Direction); 4] = [
        (scores.iter().map(ReliabilityScores::dispersion).collect(), Direction::LowerIsBetter),
        (scores.iter().map(|s| s.cvar_diff).collect(), Direction::HigherIsBetter),
        (scores.iter().map(|s| s.cvar_drawdown).collect(), Direction::HigherIsBetter),
        (scores.iter().map(|s| s.median_performance).collect(), Direction::HigherIsBetter),
    ];
    let mut ranked = Vec::with_capacity(4);
    for (values, dir) in &columns {
        ranked.push(ranking::fractional_ranks(&names, values, *dir)?);
    }
    Ok(names
        .into_iter()
        .enumerate()
        .map(|(i, algorithm)| ReliabilityRanks {
            algorithm,
            ranks: std::array::from_fn(|k| ranked[k][i]),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedRow {
    pub algorithm: String,
    pub reliability_ranks: [f64; 4],
    pub reliability_rank_sum: f64,
    pub domain_rank: usize,
    pub overall_aggregate: f64,
    pub final_rank: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CombinedRankTable {
    /// sorted by final rank, then algorithm name
    pub rows: Vec<CombinedRow>,
}

impl CombinedRankTable {
    pub fn row(&self, algorithm: &str) -> Option<&CombinedRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm)
    }
}

/// Adds each algorithm's reliability rank sum to its domain aggregate rank and
/// assigns dense final ranks by ascending total.
pub fn combine_rankings(
    reliability: &[ReliabilityRanks],
    domain: &RankTable,
) -> Result<CombinedRankTable, ReliabilityError> {
    let rel: BTreeSet<&str> = reliability.iter().map(|r| r.algorithm.as_str()).collect();
    let dom: BTreeSet<&str> = domain.rows.iter().map(|r| r.algorithm.as_str()).collect();
    if rel != dom || rel.len() != reliability.len() {
        let diff: Vec<String> = rel.symmetric_difference(&dom).map(|s| s.to_string()).collect();
        return Err(ReliabilityError::AlgorithmMismatch(diff));
    }
    if reliability.len() < 2 {
        return Err(RankError::TooFew(reliability.len()).into());
    }
    let mut rows: Vec<CombinedRow> = reliability
        .iter()
        .map(|r| {
            let domain_rank = domain.row(&r.algorithm).expect("same set").aggregate_rank;
            let sum: f64 = r.ranks.iter().sum();
            CombinedRow {
                algorithm: r.algorithm.clone(),
                reliability_ranks: r.ranks,
                reliability_rank_sum: sum,
                domain_rank,
                overall_aggregate: sum + domain_rank as f64,
                final_rank: 0.0,
            }
        })
        .collect();
    let totals: Vec<f64> = rows.iter().map(|r| r.overall_aggregate).collect();
    for (row, rank) in rows.iter_mut().zip(dense_ranks_unchecked(&totals, Direction::LowerIsBetter)) {
        row.final_rank = rank as f64;
    }
    rows.sort_by(|a, b| a.final_rank.total_cmp(&b.final_rank).then_with(|| a.algorithm.cmp(&b.algorithm)));
    Ok(CombinedRankTable { rows })
}
