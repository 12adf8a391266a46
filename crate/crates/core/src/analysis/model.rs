use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AnalysisError, DiscreteEpisode};

/// Empirical transition counts and Monte-Carlo value estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalModel {
    /// (s, a) -> s' -> count, from consecutive steps within an episode
    pub transitions: BTreeMap<(usize, usize), BTreeMap<usize, u64>>,
    /// (s, a) -> number of times executed
    pub executions: BTreeMap<(usize, usize), u64>,
    pub q_table: BTreeMap<(usize, usize), f64>,
    pub v_table: BTreeMap<usize, f64>,
    pub gamma: f64,
}

impl EmpiricalModel {
    /// Assembles a model from explicit tables; `v` is derived from `q`.
    pub fn from_parts(
        transitions: BTreeMap<(usize, usize), BTreeMap<usize, u64>>,
        executions: BTreeMap<(usize, usize), u64>,
        q_table: BTreeMap<(usize, usize), f64>,
        gamma: f64,
    ) -> Self {
        let v_table = state_values(&q_table);
        Self {
            transitions,
            executions,
            q_table,
            v_table,
            gamma,
        }
    }

    pub fn transition_probability(&self, s: usize, a: usize, next: usize) -> f64 {
        match self.transitions.get(&(s, a)) {
            Some(row) => {
                let total: u64 = row.values().sum();
                row.get(&next).map_or(0.0, |&c| c as f64 / total as f64)
            }
            None => 0.0,
        }
    }

    /// Distinct observed successors of `s` over all actions, excluding `s`.
    pub fn successors(&self, s: usize) -> BTreeSet<usize> {
        self.transitions
            .range((s, 0)..=(s, usize::MAX))
            .flat_map(|(_, row)| row.keys().copied())
            .filter(|&n| n != s)
            .collect()
    }

    pub fn states(&self) -> impl Iterator<Item = usize> + '_ {
        self.v_table.keys().copied()
    }
}

fn state_values(q: &BTreeMap<(usize, usize), f64>) -> BTreeMap<usize, f64> {
    let mut v: BTreeMap<usize, f64> = BTreeMap::new();
    for (&(s, _), &value) in q {
        v.entry(s)
            .and_modify(|best| *best = best.max(value))
            .or_insert(value);
    }
    v
}

/// Counts transitions and estimates `q(s, a)` as the mean discounted return
/// observed after every occurrence of `(s, a)`.
pub fn build_empirical_model<'a, I>(episodes: I, gamma: f64) -> Result<EmpiricalModel, AnalysisError>
where
    I: IntoIterator<Item = &'a DiscreteEpisode>,
{
    let mut transitions: BTreeMap<(usize, usize), BTreeMap<usize, u64>> = BTreeMap::new();
    let mut executions: BTreeMap<(usize, usize), u64> = BTreeMap::new();
    let mut return_sums: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut any = false;
    for ep in episodes {
        let n = ep.len();
        // discounted return from each step to episode end, computed backwards
        let mut returns = vec![0.0; n];
        let mut acc = 0.0;
        for t in (0..n).rev() {
            acc = ep.rewards[t] + gamma * acc;
            returns[t] = acc;
        }
        for (t, g) in returns.into_iter().enumerate() {
            any = true;
            let pair = (ep.states[t], ep.actions[t]);
            *executions.entry(pair).or_default() += 1;
            *return_sums.entry(pair).or_default() += g;
            if t + 1 < n {
                *transitions.entry(pair).or_default().entry(ep.states[t + 1]).or_default() += 1;
            }
        }
    }
    if !any {
        return Err(AnalysisError::Empty("train"));
    }
    let q_table = return_sums
        .into_iter()
        .map(|(p, sum)| (p, sum / executions[&p] as f64))
        .collect();
    Ok(EmpiricalModel::from_parts(transitions, executions, q_table, gamma))
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ExtremaReport {
    pub local_maxima: BTreeSet<usize>,
    pub local_minima: BTreeSet<usize>,
    pub absolute_max: Option<usize>,
    pub absolute_min: Option<usize>,
}

/// A state is a local maximum (minimum) when its value is strictly greater
/// (smaller) than that of every distinct observed successor. States without a
/// distinct successor are neither.
pub fn transition_value_analysis(model: &EmpiricalModel) -> ExtremaReport {
    let mut report = ExtremaReport::default();
    for (&s, &v) in &model.v_table {
        let succ = model.successors(s);
        if succ.is_empty() {
            continue;
        }
        let values: Vec<f64> = succ.iter().filter_map(|n| model.v_table.get(n).copied()).collect();
        if values.iter().all(|&w| v > w) {
            report.local_maxima.insert(s);
        }
        if values.iter().all(|&w| v < w) {
            report.local_minima.insert(s);
        }
    }
    // ties resolve to the lowest state index
    let values = || model.v_table.iter().map(|(&s, &v)| (s, v));
    report.absolute_max = values()
        .reduce(|best, x| if x.1 > best.1 { x } else { best })
        .map(|p| p.0);
    report.absolute_min = values()
        .reduce(|best, x| if x.1 < best.1 { x } else { best })
        .map(|p| p.0);
    report
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::trace::EpisodeKind;

    #[test]
    fn two_step_episode() {
        let ep = DiscreteEpisode::new("e", EpisodeKind::Train, &[(0, 4, 1.0), (1, 4, 0.0)]);
        let m = build_empirical_model([&ep], 0.5).unwrap();
        assert_eq!(m.q_table[&(0, 4)], 1.0);
        assert_eq!(m.transition_probability(0, 4, 1), 1.0);
        assert_eq!(m.v_table[&0], 1.0);
    }

    #[test]
    fn zero_gamma_is_immediate_reward() {
        let ep = DiscreteEpisode::new("e", EpisodeKind::Train, &[(0, 0, 1.0), (1, 0, 1.0), (2, 0, 1.0)]);
        let m = build_empirical_model([&ep], 0.0).unwrap();
        assert!(m.q_table.values().all(|&q| q == 1.0));
    }

    #[test]
    fn empty_model_is_an_error() {
        assert!(build_empirical_model(std::iter::empty(), 0.9).is_err());
    }

    #[test]
    fn transition_rows_normalize() {
        let a = DiscreteEpisode::new("a", EpisodeKind::Train, &[(0, 0, 0.0), (1, 0, 0.0)]);
        let b = DiscreteEpisode::new("b", EpisodeKind::Train, &[(0, 0, 0.0), (2, 0, 0.0), (0, 0, 0.0), (2, 0, 0.0)]);
        let m = build_empirical_model([&a, &b], 0.9).unwrap();
        let p1 = m.transition_probability(0, 0, 1);
        let p2 = m.transition_probability(0, 0, 2);
        assert!((p1 - 1.0 / 3.0).abs() < 1e-12 && (p2 - 2.0 / 3.0).abs() < 1e-12);
        assert!((p1 + p2 - 1.0).abs() < 1e-12);
    }

    fn chain_model(values: &[(usize, f64)], edges: &[(usize, usize)]) -> EmpiricalModel {
        let mut transitions: BTreeMap<(usize, usize), BTreeMap<usize, u64>> = BTreeMap::new();
        for &(s, n) in edges {
            *transitions.entry((s, 0)).or_default().entry(n).or_default() += 1;
        }
        let q = values.iter().map(|&(s, v)| ((s, 0), v)).collect();
        let exec = values.iter().map(|&(s, _)| ((s, 0), 1)).collect();
        EmpiricalModel::from_parts(transitions, exec, q, 0.9)
    }

    #[test]
    fn monotone_chain_extrema() {
        let m = chain_model(&[(0, 1.0), (1, 2.0), (2, 3.0)], &[(0, 1), (1, 2), (2, 1)]);
        let r = transition_value_analysis(&m);
        assert_eq!(r.local_maxima, BTreeSet::from([2]));
        // only successors count: 1 sits below its sole successor 2
        assert_eq!(r.local_minima, BTreeSet::from([0, 1]));
        assert_eq!(r.absolute_max, Some(2));
        assert_eq!(r.absolute_min, Some(0));
    }

    #[test]
    fn self_loop_is_neither() {
        let m = chain_model(&[(5, 1.0)], &[(5, 5)]);
        let r = transition_value_analysis(&m);
        assert!(r.local_maxima.is_empty() && r.local_minima.is_empty());
    }
}
