//! Shared fixtures for the criterion benchmarks in benches/.

use domrl_core::policy::generate;
use domrl_core::{ToolkitConfig, TraceSet};

/// Trace sets for `labels` on the HighMask experiment with a reduced episode count.
pub fn trace_fixture(labels: &[&str], train_episodes: usize) -> (ToolkitConfig, Vec<TraceSet>) {
    let mut cfg = ToolkitConfig::default();
    cfg.generation.train_episodes = train_episodes;
    cfg.generation.exploit_episodes = 5;
    let variants: Vec<_> = labels.iter().map(|l| cfg.variant(l).expect("known label")).collect();
    let exp = cfg.experiment("HighMask").expect("default experiment").clone();
    let sets = generate(&exp.apply(&cfg.simulator), &variants, &cfg.generation_plan(&exp.name))
        .expect("default config simulates")
        .into_iter()
        .map(|g| g.traces)
        .collect();
    (cfg, sets)
}
