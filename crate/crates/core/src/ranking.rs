//! Rank assignment with ties.
//!
//! Two tie conventions are in use: dense ranks (equal values share a rank, the
//! next distinct value gets rank + 1) for domain metrics and final positions,
//! and tie-averaged ordinal ranks (equal values share the mean of the ordinal
//! positions they occupy) for reliability metrics.

use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    HigherIsBetter,
    LowerIsBetter,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum RankError {
    #[error("ranking needs at least 2 algorithms, got {0}")]
    TooFew(usize),
    #[error("value for {0} is not a number")]
    NotANumber(String),
}

/// Indices of `values` from best to worst; stable for equal values.
fn order(values: &[f64], direction: Direction) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..values.len()).collect();
    idx.sort_by(|&a, &b| {
        let ord = values[a].total_cmp(&values[b]);
        match direction {
            Direction::HigherIsBetter => ord.reverse(),
            Direction::LowerIsBetter => ord,
        }
    });
    idx
}

fn check(names: &[String], values: &[f64]) -> Result<(), RankError> {
    if values.len() < 2 {
        return Err(RankError::TooFew(values.len()));
    }
    if let Some(i) = values.iter().position(|v| v.is_nan()) {
        return Err(RankError::NotANumber(names[i].clone()));
    }
    Ok(())
}

/// Dense ranks aligned with the input order.
pub fn dense_ranks(names: &[String], values: &[f64], direction: Direction) -> Result<Vec<usize>, RankError> {
    check(names, values)?;
    Ok(dense_ranks_unchecked(values, direction))
}

pub(crate) fn dense_ranks_unchecked(values: &[f64], direction: Direction) -> Vec<usize> {
    let mut ranks = vec![0; values.len()];
    let mut rank = 0;
    let mut prev: Option<f64> = None;
    for i in order(values, direction) {
        if prev != Some(values[i]) {
            rank += 1;
            prev = Some(values[i]);
        }
        ranks[i] = rank;
    }
    ranks
}

/// Tie-averaged ordinal ranks aligned with the input order.
pub fn fractional_ranks(
    names: &[String],
    values: &[f64],
    direction: Direction,
) -> Result<Vec<f64>, RankError> {
    check(names, values)?;
    let ord = order(values, direction);
    let mut ranks = vec![0.0; values.len()];
    let mut start = 0;
    while start < ord.len() {
        let mut end = start + 1;
        while end < ord.len() && values[ord[end]] == values[ord[start]] {
            end += 1;
        }
        // positions start+1 ..= end share their mean
        let shared = (start + 1 + end) as f64 / 2.0;
        for &i in &ord[start..end] {
            ranks[i] = shared;
        }
        start = end;
    }
    Ok(ranks)
}
