//! Property checks of the core arithmetic against independent brute-force oracles.

use std::collections::{BTreeMap, BTreeSet};

use domrl_core::analysis::{build_empirical_model, transition_value_analysis, DiscreteEpisode};
use domrl_core::discretize::{decode, encode};
use domrl_core::metrics::Metric;
use domrl_core::reliability::cvar;
use domrl_core::{rank_metric_table, Direction, EpisodeKind, MetricRow};
use proptest::prelude::*;

fn oracle_cvar(values: &[f64], alpha: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = alpha * (v.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    let var = v[lo] + (h - lo as f64) * (v[hi] - v[lo]);
    let tail: Vec<f64> = v.iter().copied().filter(|&x| x <= var).collect();
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn episodes() -> impl Strategy<Value = Vec<Vec<(usize, usize, f64)>>> {
    prop::collection::vec(prop::collection::vec((0usize..5, 0usize..3, -1.0f64..1.0), 1..20), 1..4)
}

proptest! {
    #[test]
    fn encode_decode_round_trip(radices in prop::collection::vec(1usize..6, 1..6), seed in any::<u64>()) {
        let total: usize = radices.iter().product();
        let index = (seed % total as u64) as usize;
        let bins = decode(index, &radices).unwrap();
        prop_assert!(bins.iter().zip(&radices).all(|(b, r)| b < r));
        prop_assert_eq!(encode(&bins, &radices).unwrap(), index);
        prop_assert!(decode(total, &radices).is_err());
    }

    #[test]
    fn cvar_matches_tail_average(values in prop::collection::vec(-100.0f64..100.0, 1..50)) {
        let mut last = f64::NEG_INFINITY;
        for alpha in [0.05, 0.1, 0.25] {
            let c = cvar(&values, alpha).unwrap();
            prop_assert!((c - oracle_cvar(&values, alpha)).abs() < 1e-9);
            prop_assert!(c >= last - 1e-12);
            let mean = values.iter().sum::<f64>() / values.len() as f64;
            let min = values.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!(c <= mean + 1e-9 && c >= min - 1e-9);
            last = c;
        }
    }

    #[test]
    fn q_table_is_mean_discounted_return(eps in episodes(), gamma in 0.0f64..1.0) {
        let discrete: Vec<DiscreteEpisode> = eps
            .iter()
            .enumerate()
            .map(|(i, steps)| DiscreteEpisode::new(format!("Run-{i}-Train"), EpisodeKind::Train, steps))
            .collect();
        let model = build_empirical_model(&discrete, gamma).unwrap();

        let mut returns: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        for steps in &eps {
            for t in 0..steps.len() {
                let g: f64 = steps[t..].iter().enumerate().map(|(k, s)| gamma.powi(k as i32) * s.2).sum();
                returns.entry((steps[t].0, steps[t].1)).or_default().push(g);
            }
        }
        prop_assert_eq!(model.q_table.len(), returns.len());
        for (pair, gs) in &returns {
            let expected = gs.iter().sum::<f64>() / gs.len() as f64;
            prop_assert!((model.q_table[pair] - expected).abs() < 1e-9);
        }

        let mut v: BTreeMap<usize, f64> = BTreeMap::new();
        for (&(s, _), &q) in &model.q_table {
            let e = v.entry(s).or_insert(f64::NEG_INFINITY);
            *e = e.max(q);
        }
        let mut succ: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for steps in &eps {
            for w in steps.windows(2) {
                if w[1].0 != w[0].0 {
                    succ.entry(w[0].0).or_default().insert(w[1].0);
                }
            }
        }
        let (mut maxima, mut minima) = (BTreeSet::new(), BTreeSet::new());
        for (s, next) in &succ {
            if next.iter().all(|n| v[s] > v[n]) {
                maxima.insert(*s);
            }
            if next.iter().all(|n| v[s] < v[n]) {
                minima.insert(*s);
            }
        }
        let report = transition_value_analysis(&model);
        prop_assert_eq!(report.local_maxima, maxima);
        prop_assert_eq!(report.local_minima, minima);
    }

    #[test]
    fn improving_a_metric_never_hurts(
        values in prop::collection::vec(prop::collection::vec(0u8..4, 5), 2..8),
        who in any::<prop::sample::Index>(),
        which in 0usize..5,
        gain in 1u8..4,
    ) {
        let rows: Vec<MetricRow> = values
            .iter()
            .enumerate()
            .map(|(i, v)| {
                let mut r = MetricRow {
                    algorithm: format!("A{i}"),
                    mean_reward_train: 0.0,
                    state_coverage_pct: 0.0,
                    unified_coverage_pct: 0.0,
                    best_sequence_pct: 0.0,
                    median_mean_reward_exploit: 0.0,
                };
                for (m, x) in Metric::ALL.iter().zip(v) {
                    r.set(*m, f64::from(*x));
                }
                r
            })
            .collect();
        let i = who.index(rows.len());
        let metric = Metric::ALL[which];
        let mut better = rows.clone();
        let delta = f64::from(gain) * if metric.direction() == Direction::HigherIsBetter { 1.0 } else { -1.0 };
        better[i].set(metric, rows[i].get(metric) + delta);

        let name = &rows[i].algorithm;
        let before = rank_metric_table(&rows).unwrap();
        let after = rank_metric_table(&better).unwrap();
        let (b, a) = (before.row(name).unwrap(), after.row(name).unwrap());
        prop_assert!(a.aggregate_rank <= b.aggregate_rank);
        // dense final ranks can still grow when others' ties split, but nobody new gets ahead
        let ahead = |t: &domrl_core::RankTable, own: usize| t.rows.iter().filter(|r| r.aggregate_rank < own).count();
        prop_assert!(ahead(&after, a.aggregate_rank) <= ahead(&before, b.aggregate_rank));
    }
}
