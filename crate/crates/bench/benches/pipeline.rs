use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BatchSize, Criterion};
use domrl_bench::trace_fixture;
use domrl_core::analysis::read_report;
use domrl_core::metrics::metric_row;
use domrl_core::policy::HeuristicPolicy;
use domrl_core::reliability::cvar;
use domrl_core::sim::{run_episode, SimConfig};
use domrl_core::{analyze, rank_metric_table, read_traces, write_traces, BinningSpec, Discretizer, EpisodeKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn indices(c: &mut Criterion) {
    let d = Discretizer::new(BinningSpec::default()).unwrap();
    c.bench_function("encode/decode all action indices", |b| {
        b.iter(|| {
            let space = d.action_space();
            for i in 0..space.total() {
                let bins = space.decode(black_box(i)).unwrap();
                black_box(space.encode(&bins).unwrap());
            }
        })
    });
    let obs = [0.07, 0.03, 0.12];
    c.bench_function("state index of one observation", |b| b.iter(|| d.state_index(black_box(&obs)).unwrap()));
}

fn risk(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let values: Vec<f64> = (0..1000).map(|_| rng.random_range(-1.0..1.0)).collect();
    c.bench_function("cvar of 1000 values", |b| b.iter(|| cvar(black_box(&values), 0.05).unwrap()));
}

fn simulator(c: &mut Criterion) {
    let cfg = SimConfig::default();
    let mut seed = 0;
    c.bench_function("heuristic episode (1000 agents, 600 ticks)", |b| {
        b.iter(|| {
            seed += 1;
            run_episode(&cfg, &mut HeuristicPolicy, seed, "Run-1-Exploit", EpisodeKind::Exploit).unwrap()
        })
    });
}

fn analysis(c: &mut Criterion) {
    let (cfg, sets) = trace_fixture(&["BinnedQ", "Heuristic", "NR_BN_BinnedQ"], 30);
    let d = cfg.discretizer();
    let valid = cfg.valid_states();
    c.bench_function("analyze one trace set (35 episodes)", |b| {
        b.iter(|| analyze(black_box(&sets[0]), &d, &valid, &cfg.analysis).unwrap())
    });

    let mut buf = Vec::new();
    write_traces(&sets[0], &mut buf).unwrap();
    c.bench_function("read one trace file", |b| b.iter(|| read_traces(black_box(&buf[..])).unwrap()));

    let reports: Vec<_> = sets.iter().map(|s| analyze(s, &d, &valid, &cfg.analysis).unwrap()).collect();
    let mut report_buf = Vec::new();
    domrl_core::analysis::write_report(&reports[0], &mut report_buf).unwrap();
    c.bench_function("read one report", |b| b.iter(|| read_report(black_box(&report_buf[..])).unwrap()));
    c.bench_function("metrics and ranking of 3 reports", |b| {
        b.iter_batched(
            || reports.clone(),
            |reports| {
                let rows: Vec<_> = reports.iter().map(|r| metric_row(r, &cfg.metrics).unwrap()).collect();
                rank_metric_table(&rows).unwrap()
            },
            BatchSize::SmallInput,
        )
    });
}

criterion_group!(benches, indices, risk, simulator, analysis);
criterion_main!(benches);
