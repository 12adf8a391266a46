//! Acceptance suite: one PASS/FAIL line per criterion. Exits non-zero when
//! any criterion fails.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::panic::{self, AssertUnwindSafe};
use std::path::Path;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use domrl_cli::commands::{self, COMBINED_CSV, COMBINED_TXT, DOMAIN_TXT, METRICS_CSV, RANKS_CSV, RELIABILITY_CSV};
use domrl_core::analysis::{build_empirical_model, transition_value_analysis, DiscreteEpisode, FrequencyTable};
use domrl_core::discretize::{Discretizer, ValidStates};
use domrl_core::metrics::{rank_by_metric, state_coverage_metric, Metric, RankRow};
use domrl_core::policy::{QParams, QTable};
use domrl_core::reliability::{combine_rankings, cvar, ReliabilityRanks};
use domrl_core::sim::{simulate, SimConfig, Simulation};
use domrl_core::{policy::RandomPolicy, rank_metric_table, BinningSpec, Direction, EpisodeKind, MetricRow, RankTable, ToolkitConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Check = Box<dyn Fn() -> Outcome>;

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn within(elapsed: Duration, budget: Duration) -> Result<(), String> {
    ensure(elapsed < budget, || format!("took {elapsed:.2?}, budget {budget:?}"))
}

fn index_examples() -> Outcome {
    let d = Discretizer::new(BinningSpec::default()).map_err(|e| e.to_string())?;
    let states: [(usize, [(f64, f64); 3]); 4] = [
        (0, [(0.0, 0.05), (0.0, 0.05), (0.0, 0.05)]),
        (25, [(0.05, 0.1), (0.0, 0.05), (0.0, 0.05)]),
        (50, [(0.1, 0.15), (0.0, 0.05), (0.0, 0.05)]),
        (100, [(0.2, 1.0), (0.0, 0.05), (0.0, 0.05)]),
    ];
    let (lo, mid, hi) = ((0.0, 2.5), (2.5, 5.0), (5.0, 7.0));
    let actions: [(usize, [(f64, f64); 8]); 3] = [
        (2431, [mid, lo, mid, lo, lo, lo, lo, mid]),
        (2432, [mid, lo, mid, lo, lo, lo, lo, hi]),
        (2435, [mid, lo, mid, lo, lo, lo, mid, hi]),
    ];
    for (index, expected) in states {
        let got = d.state_ranges(index).map_err(|e| e.to_string())?;
        ensure(got == expected, || format!("state {index}: {got:?}"))?;
        let bins = d.state_space().decode(index).map_err(|e| e.to_string())?;
        ensure(d.state_space().encode(&bins) == Ok(index), || format!("state {index} re-encode"))?;
    }
    for (index, expected) in actions {
        let got = d.action_ranges(index).map_err(|e| e.to_string())?;
        ensure(got == expected, || format!("action {index}: {got:?}"))?;
        let bins = d.action_space().decode(index).map_err(|e| e.to_string())?;
        ensure(d.action_space().encode(&bins) == Ok(index), || format!("action {index} re-encode"))?;
    }
    Ok("states 0/25/50/100, actions 2431/2432/2435".into())
}

fn combined_tables() -> Outcome {
    // (algorithm, reliability ranks, domain rank, reliability sum, aggregate, final rank)
    type Row = (&'static str, [f64; 4], usize, f64, f64, f64);
    let high: [Row; 8] = [
        ("TD3", [1.0, 8.0, 1.0, 4.0], 9, 14.0, 23.0, 1.0),
        ("NR_BN_TD3", [4.0, 5.0, 4.0, 2.0], 14, 15.0, 29.0, 2.0),
        ("DDPG", [6.0, 3.0, 6.0, 2.0], 15, 17.0, 32.0, 3.0),
        ("BN_DDPG", [8.0, 1.0, 8.0, 2.0], 15, 19.0, 34.0, 4.0),
        ("NR_BN_DDPG", [5.0, 4.0, 5.0, 6.5], 18, 20.5, 38.5, 5.0),
        ("NR_DDPG", [3.0, 6.0, 3.0, 6.5], 22, 18.5, 40.5, 6.0),
        ("NR_TD3", [2.0, 7.0, 2.0, 6.5], 26, 17.5, 43.5, 7.0),
        ("BN_TD3", [7.0, 2.0, 7.0, 6.5], 21, 22.5, 43.5, 7.0),
    ];
    let low: [Row; 8] = [
        ("NR_DDPG", [4.0, 5.0, 4.0, 3.0], 5, 16.0, 21.0, 1.0),
        ("NR_TD3", [3.0, 6.0, 3.0, 3.0], 11, 15.0, 26.0, 2.0),
        ("NR_BN_TD3", [5.0, 4.0, 5.0, 3.0], 12, 17.0, 29.0, 3.0),
        ("DDPG", [7.0, 2.0, 7.0, 3.0], 15, 19.0, 34.0, 4.0),
        ("TD3", [2.0, 7.0, 2.0, 3.0], 22, 14.0, 36.0, 5.0),
        ("NR_BN_DDPG", [6.0, 3.0, 6.0, 7.0], 20, 22.0, 42.0, 6.0),
        ("BN_DDPG", [1.0, 8.0, 1.0, 7.0], 28, 17.0, 45.0, 7.0),
        ("BN_TD3", [8.0, 1.0, 8.0, 7.0], 27, 24.0, 51.0, 8.0),
    ];
    let start = Instant::now();
    let mut checked = 0;
    for table in [&high, &low] {
        let rel: Vec<ReliabilityRanks> = table
            .iter()
            .map(|r| ReliabilityRanks {
                algorithm: r.0.into(),
                ranks: r.1,
            })
            .collect();
        let domain = RankTable {
            rows: table
                .iter()
                .map(|r| RankRow {
                    algorithm: r.0.into(),
                    ranks: [0; 5],
                    aggregate_rank: r.2,
                    final_rank: 0.0,
                })
                .collect(),
        };
        let combined = combine_rankings(&rel, &domain).map_err(|e| e.to_string())?;
        for r in table {
            let got = combined.row(r.0).ok_or_else(|| format!("{} missing", r.0))?;
            ensure(
                got.reliability_rank_sum == r.3 && got.overall_aggregate == r.4 && got.final_rank == r.5,
                || format!("{}: got {} / {} / {}", r.0, got.reliability_rank_sum, got.overall_aggregate, got.final_rank),
            )?;
            checked += 1;
        }
    }
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{checked} rows reproduced"))
}

fn dense_rank_oracle() -> Outcome {
    let values: Vec<(String, f64)> = [100.0, 100.0, 78.57, 34.55, 0.0, 0.0, 0.0, 0.0]
        .iter()
        .enumerate()
        .map(|(i, &v)| (format!("A{i}"), v))
        .collect();
    let ranks: Vec<usize> = rank_by_metric(&values, Direction::HigherIsBetter)
        .map_err(|e| e.to_string())?
        .into_iter()
        .map(|r| r.1)
        .collect();
    ensure(ranks == [1, 1, 2, 3, 4, 4, 4, 4], || format!("{ranks:?}"))?;
    Ok(format!("{ranks:?}"))
}

fn state_coverage_example() -> Outcome {
    let valid = ValidStates::from_indices((0..45).collect());
    let mut table = FrequencyTable::default();
    for s in 0..13 {
        table.state_counts.insert(s, 3);
        table.total_steps += 3;
    }
    let v = state_coverage_metric(&table, &valid).map_err(|e| e.to_string())?;
    let shown = format!("{v:.3}");
    ensure(shown == "28.889", || shown.clone())?;
    Ok(format!("13 of 45 -> {shown}%"))
}

fn exhaustive_round_trip() -> Outcome {
    let start = Instant::now();
    let d = Discretizer::new(BinningSpec::default()).map_err(|e| e.to_string())?;
    let mut n = 0;
    for space in [d.state_space(), d.action_space()] {
        for index in 0..space.total() {
            let bins = space.decode(index).map_err(|e| e.to_string())?;
            ensure(space.encode(&bins) == Ok(index), || format!("index {index}"))?;
            n += 1;
        }
    }
    ensure(n == 125 + 6561, || format!("{n} indices"))?;
    within(start.elapsed(), Duration::from_secs(1))?;
    Ok(format!("{n} indices, 0 failures"))
}

fn tail_average(values: &[f64], alpha: f64) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let h = alpha * (v.len() - 1) as f64;
    let (lo, hi) = (h.floor() as usize, h.ceil() as usize);
    let var = v[lo] + (h - lo as f64) * (v[hi] - v[lo]);
    let tail: Vec<f64> = v.into_iter().filter(|&x| x <= var).collect();
    tail.iter().sum::<f64>() / tail.len() as f64
}

fn cvar_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(6);
    let mut worst = 0.0f64;
    for sample in 0..200 {
        let n = rng.random_range(1..=50);
        let values: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let mut last = f64::NEG_INFINITY;
        for alpha in [0.05, 0.1, 0.25] {
            let got = cvar(&values, alpha).map_err(|e| e.to_string())?;
            let err = (got - tail_average(&values, alpha)).abs();
            worst = worst.max(err);
            ensure(err < 1e-9, || format!("sample {sample}, alpha {alpha}: off by {err}"))?;
            ensure(got >= last, || format!("sample {sample}: not monotone at alpha {alpha}"))?;
            last = got;
        }
    }
    Ok(format!("200 samples, max error {worst:.1e}, monotone"))
}

fn empirical_q_oracle() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    for trace in 0..100 {
        let gamma = rng.random_range(0.0..1.0);
        let steps: Vec<(usize, usize, f64)> = (0..rng.random_range(1..=20))
            .map(|_| (rng.random_range(0..5), rng.random_range(0..3), rng.random_range(-1.0..1.0)))
            .collect();
        let ep = DiscreteEpisode::new("Run-1-Train", EpisodeKind::Train, &steps);
        let model = build_empirical_model([&ep], gamma).map_err(|e| e.to_string())?;

        let mut returns: BTreeMap<(usize, usize), Vec<f64>> = BTreeMap::new();
        for t in 0..steps.len() {
            let mut g = 0.0;
            let mut discount = 1.0;
            for s in &steps[t..] {
                g += discount * s.2;
                discount *= gamma;
            }
            returns.entry((steps[t].0, steps[t].1)).or_default().push(g);
        }
        ensure(model.q_table.len() == returns.len(), || format!("trace {trace}: pair count"))?;
        for (pair, gs) in &returns {
            let expected = gs.iter().sum::<f64>() / gs.len() as f64;
            let err = (model.q_table[pair] - expected).abs();
            ensure(err < 1e-9, || format!("trace {trace}, pair {pair:?}: off by {err}"))?;
        }

        let mut v: BTreeMap<usize, f64> = BTreeMap::new();
        for (&(s, _), gs) in &returns {
            let q = gs.iter().sum::<f64>() / gs.len() as f64;
            let e = v.entry(s).or_insert(f64::NEG_INFINITY);
            *e = e.max(q);
        }
        let mut succ: BTreeMap<usize, BTreeSet<usize>> = BTreeMap::new();
        for w in steps.windows(2) {
            if w[0].0 != w[1].0 {
                succ.entry(w[0].0).or_default().insert(w[1].0);
            }
        }
        let maxima: BTreeSet<usize> =
            succ.iter().filter(|(s, n)| n.iter().all(|x| v[s] > v[x])).map(|(s, _)| *s).collect();
        let minima: BTreeSet<usize> =
            succ.iter().filter(|(s, n)| n.iter().all(|x| v[s] < v[x])).map(|(s, _)| *s).collect();
        let report = transition_value_analysis(&model);
        ensure(report.local_maxima == maxima && report.local_minima == minima, || {
            format!("trace {trace}: extrema {:?}/{:?} vs {maxima:?}/{minima:?}", report.local_maxima, report.local_minima)
        })?;
    }
    Ok("100 traces, q within 1e-9, extrema exact".into())
}

fn simulator_conservation() -> Outcome {
    let start = Instant::now();
    let cfg = SimConfig::default();
    let n = cfg.population.population;
    let cap = (cfg.disease.hospital_cap_fraction * n as f64) as usize;
    let mut peak_h = 0;
    for seed in 0..20 {
        let mut policy = RandomPolicy::new(seed);
        let run = simulate(&cfg, &mut policy, seed, "Run-1-Train", EpisodeKind::Train, true).map_err(|e| e.to_string())?;
        ensure(run.curve.len() == 600, || format!("seed {seed}: {} ticks", run.curve.len()))?;
        for (tick, counts) in run.curve.iter().enumerate() {
            ensure(counts.iter().sum::<usize>() == n, || format!("seed {seed}, tick {tick}: {counts:?}"))?;
            ensure(counts[5] <= cap, || format!("seed {seed}, tick {tick}: {} hospitalized", counts[5]))?;
            peak_h = peak_h.max(counts[5]);
        }
    }
    let mut still = cfg.clone();
    still.disease.beta = 0.0;
    for seed in 0..20 {
        let mut sim = Simulation::new(&still, seed).map_err(|e| e.to_string())?;
        while !sim.finished() {
            sim.step();
        }
        ensure(sim.ever_infected == still.population.initial_exposed, || {
            format!("beta 0, seed {seed}: {} infected", sim.ever_infected)
        })?;
    }
    within(start.elapsed(), Duration::from_secs(120))?;
    Ok(format!("20+20 runs, peak hospitalized {peak_h} <= {cap}, {:.1?}", start.elapsed()))
}

const TABLES: [&str; 6] = [METRICS_CSV, RANKS_CSV, DOMAIN_TXT, RELIABILITY_CSV, COMBINED_CSV, COMBINED_TXT];

fn pipeline(cfg: &ToolkitConfig, dir: &Path) -> anyhow::Result<()> {
    commands::simulate(cfg, "HighMask", &[], dir, false)?;
    commands::analyze(cfg, dir, dir)?;
    commands::rank(cfg, dir, true, dir)?;
    Ok(())
}

fn end_to_end_determinism(work: &Path) -> Outcome {
    let start = Instant::now();
    let cfg = ToolkitConfig::default();
    let (a, b) = (work.join("a"), work.join("b"));
    pipeline(&cfg, &a).map_err(|e| format!("{e:#}"))?;
    pipeline(&cfg, &b).map_err(|e| format!("{e:#}"))?;
    for name in TABLES {
        let x = fs::read(a.join(name)).map_err(|e| format!("{name}: {e}"))?;
        let y = fs::read(b.join(name)).map_err(|e| format!("{name}: {e}"))?;
        ensure(x == y, || format!("{name} differs"))?;
    }
    within(start.elapsed(), Duration::from_secs(600))?;
    Ok(format!("{} tables byte-identical, {:.1?}", TABLES.len(), start.elapsed()))
}

fn ranking_sanity(work: &Path) -> Outcome {
    // the crippled variant joins the run produced by the determinism check
    let crippled = "BN_Random";
    let mut cfg = ToolkitConfig::default();
    cfg.generation.noise_overrides.insert(crippled.into(), 1.0);
    let extra = work.join("crippled");
    commands::simulate(&cfg, "HighMask", &[crippled.into()], &extra, false).map_err(|e| format!("{e:#}"))?;
    commands::analyze(&cfg, &extra, &extra).map_err(|e| format!("{e:#}"))?;
    let mut reports = commands::load_reports(&work.join("a")).map_err(|e| format!("{e:#}"))?;
    reports.extend(commands::load_reports(&extra).map_err(|e| format!("{e:#}"))?);
    ensure(reports.len() == 9, || format!("{} reports", reports.len()))?;
    let outcome = commands::rank_reports(&cfg, &reports, true).map_err(|e| format!("{e:#}"))?;
    let domain = outcome.domain.row(crippled).ok_or("crippled variant not ranked")?.final_rank;
    let (_, combined) = outcome.reliability.as_ref().ok_or("no reliability ranking")?;
    let overall = combined.row(crippled).ok_or("crippled variant not combined")?.final_rank;
    ensure(domain > 1.0 && overall > 1.0, || format!("crippled variant ranked {domain} / {overall}"))?;

    let mut cases = 0;
    let mut check = |rows: &[MetricRow], i: usize, m: Metric, delta: f64| -> Result<(), String> {
        let mut better = rows.to_vec();
        let signed = if m.direction() == Direction::HigherIsBetter { delta } else { -delta };
        better[i].set(m, rows[i].get(m) + signed);
        let name = &rows[i].algorithm;
        let before = rank_metric_table(rows).map_err(|e| e.to_string())?.row(name).unwrap().aggregate_rank;
        let after = rank_metric_table(&better).map_err(|e| e.to_string())?.row(name).unwrap().aggregate_rank;
        cases += 1;
        ensure(after <= before, || format!("{name} {m:?} +{delta}: aggregate {before} -> {after}"))
    };
    for i in 0..outcome.metrics.len() {
        for m in Metric::ALL {
            for delta in [1e-9, 0.01, 1.0, 100.0] {
                check(&outcome.metrics, i, m, delta)?;
            }
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    for _ in 0..1000 {
        let rows: Vec<MetricRow> = (0..rng.random_range(2..10))
            .map(|k| {
                let mut r = outcome.metrics[0].clone();
                r.algorithm = format!("A{k}");
                for m in Metric::ALL {
                    r.set(m, f64::from(rng.random_range(0u8..4)));
                }
                r
            })
            .collect();
        let i = rng.random_range(0..rows.len());
        let m = Metric::ALL[rng.random_range(0..5)];
        check(&rows, i, m, f64::from(rng.random_range(1u8..4)))?;
    }
    Ok(format!("{crippled} ranked {domain} (domain) / {overall} (combined) of 9; {cases} perturbations"))
}

fn bandit_convergence() -> Outcome {
    let mut wins = 0;
    for seed in 0..10u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let best = (seed % 3) as usize;
        let payout: Vec<f64> = (0..3).map(|a| if a == best { 1.0 } else { 0.25 * a as f64 }).collect();
        let mut table = QTable::new(1, 3, QParams::default());
        for _ in 0..500 {
            let a = table.select(0, true, &mut rng);
            let r = payout[a] + rng.random_range(-0.1..0.1);
            table.update(0, a, r, None);
        }
        if table.greedy(0) == best {
            wins += 1;
        }
    }
    ensure(wins == 10, || format!("{wins}/10 seeds"))?;
    Ok("10/10 seeds".into())
}

fn main() -> ExitCode {
    let work = tempfile::tempdir().expect("temp dir");
    let work = work.path().to_path_buf();
    let checks: Vec<(&str, Check)> = vec![
        ("index arithmetic examples", Box::new(index_examples)),
        ("combined ranking arithmetic", Box::new(combined_tables)),
        ("dense-rank oracle", Box::new(dense_rank_oracle)),
        ("state-coverage arithmetic", Box::new(state_coverage_example)),
        ("exhaustive encode/decode round trip", Box::new(exhaustive_round_trip)),
        ("CVaR oracle equivalence", Box::new(cvar_oracle)),
        ("empirical-Q and extrema oracle", Box::new(empirical_q_oracle)),
        ("simulator conservation", Box::new(simulator_conservation)),
        ("end-to-end determinism", Box::new({
            let w = work.clone();
            move || end_to_end_determinism(&w)
        })),
        ("ranking sanity", Box::new({
            let w = work.clone();
            move || ranking_sanity(&w)
        })),
        ("BinnedQ bandit convergence", Box::new(bandit_convergence)),
    ];
    let mut failed = 0;
    for (i, (name, check)) in checks.iter().enumerate() {
        let start = Instant::now();
        let outcome = panic::catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|p| {
            let msg = p
                .downcast_ref::<String>()
                .cloned()
                .or_else(|| p.downcast_ref::<&str>().map(|s| s.to_string()))
                .unwrap_or_default();
            Err(format!("panicked: {msg}"))
        });
        let elapsed = start.elapsed();
        match outcome {
            Ok(detail) => println!("PASS {:>2} {name}: {detail} [{elapsed:.2?}]", i + 1),
            Err(why) => {
                failed += 1;
                println!("FAIL {:>2} {name}: {why} [{elapsed:.2?}]", i + 1);
            }
        }
    }
    println!("{} passed, {failed} failed", checks.len() - failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
