use serde::{Deserialize, Serialize};

use super::{DiscreteEpisode, EmpiricalModel, ExtremaReport};

/// A chain `s0, a0, s1, a1, ..., s_end` with no two consecutive equal states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SequenceRecord {
    pub run_name: String,
    pub states: Vec<usize>,
    /// `actions[i]` was executed in `states[i]`; one fewer than `states`.
    pub actions: Vec<usize>,
    pub reach_probability: f64,
    pub is_best: bool,
    /// false when no target was reachable above the probability threshold
    pub reachable: bool,
}

impl SequenceRecord {
    /// Alternating state/action chain as printed in reports.
    pub fn chain(&self) -> Vec<usize> {
        let mut out = Vec::with_capacity(self.states.len() + self.actions.len());
        for (i, &s) in self.states.iter().enumerate() {
            out.push(s);
            if let Some(&a) = self.actions.get(i) {
                out.push(a);
            }
        }
        out
    }

    pub fn start_state(&self) -> Option<usize> {
        self.states.first().copied()
    }

    pub fn end_state(&self) -> Option<usize> {
        self.states.last().copied()
    }
}

/// Most executed action in `s` among those with a distinct observed successor;
/// ties go to the lower action index.
fn likeliest_action(model: &EmpiricalModel, s: usize) -> Option<usize> {
    model
        .transitions
        .range((s, 0)..=(s, usize::MAX))
        .filter(|(_, row)| row.keys().any(|&n| n != s))
        .map(|(&(_, a), _)| (a, model.executions.get(&(s, a)).copied().unwrap_or(0)))
        .fold(None, |best: Option<(usize, u64)>, x| match best {
            Some(b) if b.1 >= x.1 => Some(b),
            _ => Some(x),
        })
        .map(|(a, _)| a)
}

/// Likeliest distinct successor of `(s, a)` and its probability conditioned on
/// leaving `s`; ties go to the lower state index.
fn likeliest_successor(model: &EmpiricalModel, s: usize, a: usize) -> Option<(usize, f64)> {
    let row = model.transitions.get(&(s, a))?;
    let leaving: u64 = row.iter().filter(|(&n, _)| n != s).map(|(_, &c)| c).sum();
    row.iter()
        .filter(|(&n, _)| n != s)
        .fold(None, |best: Option<(usize, u64)>, (&n, &c)| match best {
            Some(b) if b.1 >= c => Some(b),
            _ => Some((n, c)),
        })
        .map(|(n, c)| (n, c as f64 / leaving as f64))
}

/// Plans one sequence per local minimum by greedily following the likeliest
/// action and successor. Among local maxima reached with accumulated
/// probability at least `p_min`, the target maximizing probability times
/// value wins.
pub fn sequence_analysis(
    model: &EmpiricalModel,
    extrema: &ExtremaReport,
    p_min: f64,
    max_len: usize,
    best_state: usize,
) -> Vec<SequenceRecord> {
    extrema
        .local_minima
        .iter()
        .map(|&start| {
            let mut states = vec![start];
            let mut actions = Vec::new();
            let mut probs = vec![1.0];
            let mut target: Option<(usize, f64)> = None; // (position, score)
            let mut cur = start;
            let mut p = 1.0;
            for _ in 0..max_len {
                let Some(a) = likeliest_action(model, cur) else { break };
                let Some((next, q)) = likeliest_successor(model, cur, a) else { break };
                if states.contains(&next) {
                    break;
                }
                p *= q;
                actions.push(a);
                states.push(next);
                probs.push(p);
                cur = next;
                if extrema.local_maxima.contains(&next) && p >= p_min {
                    let score = p * model.v_table.get(&next).copied().unwrap_or(0.0);
                    if target.is_none_or(|(_, best)| score > best) {
                        target = Some((states.len() - 1, score));
                    }
                }
            }
            let run_name = format!("Planned-from-{start}");
            match target {
                Some((pos, _)) => {
                    states.truncate(pos + 1);
                    actions.truncate(pos);
                    SequenceRecord {
                        run_name,
                        is_best: states[pos] == best_state,
                        reach_probability: probs[pos],
                        states,
                        actions,
                        reachable: true,
                    }
                }
                None => SequenceRecord {
                    run_name,
                    states: Vec::new(),
                    actions: Vec::new(),
                    reach_probability: 0.0,
                    is_best: false,
                    reachable: false,
                },
            }
        })
        .collect()
}

/// The observed trajectory of each exploit episode with consecutive repeated
/// states collapsed; each kept state carries the action executed on entering it.
pub fn extract_exploit_sequences<'a, I>(episodes: I, best_state: usize) -> Vec<SequenceRecord>
where
    I: IntoIterator<Item = &'a DiscreteEpisode>,
{
    episodes
        .into_iter()
        .map(|ep| {
            let mut states: Vec<usize> = Vec::new();
            let mut entry_actions: Vec<usize> = Vec::new();
            for (&s, &a) in ep.states.iter().zip(&ep.actions) {
                if states.last() != Some(&s) {
                    states.push(s);
                    entry_actions.push(a);
                }
            }
            entry_actions.pop();
            SequenceRecord {
                run_name: ep.run_name.clone(),
                is_best: states.last() == Some(&best_state),
                states,
                actions: entry_actions,
                reach_probability: 1.0,
                reachable: true,
            }
        })
        .collect()
}
