use std::collections::BTreeSet;
use std::fs::File;
use std::io::BufReader;
use std::path::{Path, PathBuf};

use domrl_core::analysis::{analyze as analyze_traces, read_report, write_report, AnalysisReport};
use domrl_core::metrics::{metric_row, rank_metric_table, MetricRow, RankTable};
use domrl_core::policy::{generate, PolicyVariant};
use domrl_core::reliability::{combine_rankings, rank_reliability, reliability_scores, CombinedRankTable, ReliabilityScores};
use domrl_core::sim::Compartment;
use domrl_core::stats;
use domrl_core::trace::{read_traces, write_traces};
use domrl_core::ToolkitConfig;
use rayon::prelude::*;

use crate::fsio::{display_name, files_with_suffix, write_atomic, write_string};
use crate::tables::{combined_table, domain_table, full, rank_table, reliability_scores_table, Table};
use crate::user_error;

pub const TRACE_SUFFIX: &str = ".traces.jsonl";
pub const REPORT_SUFFIX: &str = ".analysis.jsonl";
pub const CURVE_SUFFIX: &str = ".curves.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct SimulateOutcome {
    pub variant: String,
    pub train_episodes: usize,
    pub exploit_episodes: usize,
    pub path: PathBuf,
}

/// Generates one trace file per variant for `experiment`. An empty filter
/// runs the configured roster; otherwise exactly the listed labels run.
pub fn simulate(
    cfg: &ToolkitConfig,
    experiment: &str,
    filter: &[String],
    out: &Path,
    curves: bool,
) -> anyhow::Result<Vec<SimulateOutcome>> {
    let exp = cfg.experiment(experiment).ok_or_else(|| {
        user_error(format!(
            "unknown experiment {experiment:?}; known experiments: {}",
            cfg.experiment_names().join(", ")
        ))
    })?;
    let variants: Vec<PolicyVariant> = if filter.is_empty() {
        cfg.variants().map_err(|e| user_error(e.to_string()))?
    } else {
        let mut seen = BTreeSet::new();
        filter
            .iter()
            .filter(|l| seen.insert(l.as_str()))
            .map(|l| cfg.variant(l).map_err(|e| user_error(e.to_string())))
            .collect::<anyhow::Result<_>>()?
    };
    let mut plan = cfg.generation_plan(&exp.name);
    plan.record_curves = curves;
    let generated = generate(&exp.apply(&cfg.simulator), &variants, &plan)?;

    let mut outcomes = Vec::new();
    for g in generated {
        let label = g.traces.algorithm_name.clone();
        let path = out.join(format!("{label}{TRACE_SUFFIX}"));
        write_atomic(&path, |w| {
            write_traces(&g.traces, w)?;
            Ok(())
        })?;
        if curves {
            write_curves(&out.join(format!("{label}{CURVE_SUFFIX}")), &g.curves)?;
        }
        outcomes.push(SimulateOutcome {
            variant: label,
            train_episodes: g.traces.train().count(),
            exploit_episodes: g.traces.exploit().count(),
            path,
        });
    }
    Ok(outcomes)
}

fn write_curves(path: &Path, curves: &[(String, domrl_core::sim::Curve)]) -> anyhow::Result<()> {
    let mut header = vec!["run_name".to_string(), "tick".to_string()];
    header.extend(Compartment::ALL.iter().map(|c| c.short_name().to_string()));
    let mut t = Table::new(header);
    for (name, curve) in curves {
        for (tick, counts) in curve.iter().enumerate() {
            let mut row = vec![name.clone(), (tick + 1).to_string()];
            row.extend(counts.iter().map(usize::to_string));
            t.push(row);
        }
    }
    t.save_csv(path)
}

/// Analyzes every trace file in `traces` and writes one report per file.
pub fn analyze(cfg: &ToolkitConfig, traces: &Path, out: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let files = files_with_suffix(traces, TRACE_SUFFIX)?;
    if files.is_empty() {
        return Err(user_error(format!("no *{TRACE_SUFFIX} files in {}", traces.display())));
    }
    let discretizer = cfg.discretizer();
    let valid = cfg.valid_states();
    let reports: Vec<AnalysisReport> = files
        .par_iter()
        .map(|f| {
            let file = File::open(f).map_err(|e| user_error(format!("{}: {e}", f.display())))?;
            let set = read_traces(BufReader::new(file)).map_err(|e| user_error(format!("{}: {e}", display_name(f))))?;
            analyze_traces(&set, &discretizer, &valid, &cfg.analysis)
                .map_err(|e| user_error(format!("{}: {e}", display_name(f))))
        })
        .collect::<anyhow::Result<_>>()?;

    let mut names = BTreeSet::new();
    for r in &reports {
        if !names.insert(r.algorithm_name.as_str()) {
            return Err(user_error(format!("algorithm {} appears in more than one trace file", r.algorithm_name)));
        }
    }
    let mut written = Vec::new();
    for r in &reports {
        let path = out.join(format!("{}{REPORT_SUFFIX}", r.algorithm_name));
        write_atomic(&path, |w| Ok(write_report(r, w)?))?;
        written.push(path);
    }
    Ok(written)
}

pub fn load_reports(dir: &Path) -> anyhow::Result<Vec<AnalysisReport>> {
    let files = files_with_suffix(dir, REPORT_SUFFIX)?;
    files
        .iter()
        .map(|f| {
            let file = File::open(f).map_err(|e| user_error(format!("{}: {e}", f.display())))?;
            read_report(BufReader::new(file)).map_err(|e| user_error(format!("{}: {e}", display_name(f))))
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankOutcome {
    pub metrics: Vec<MetricRow>,
    pub domain: RankTable,
    pub reliability: Option<(Vec<ReliabilityScores>, CombinedRankTable)>,
}

/// Per-episode mean rewards of the training episodes, in order.
pub fn training_curve(report: &AnalysisReport) -> Vec<f64> {
    report.train_episodes().map(|e| e.mean_reward()).collect()
}

/// Ranks the algorithms of the given reports.
pub fn rank_reports(cfg: &ToolkitConfig, reports: &[AnalysisReport], with_reliability: bool) -> anyhow::Result<RankOutcome> {
    if reports.len() < 2 {
        return Err(user_error(format!("ranking needs at least 2 algorithms, found {}", reports.len())));
    }
    let metrics: Vec<MetricRow> = reports
        .iter()
        .map(|r| metric_row(r, &cfg.metrics).map_err(|e| user_error(format!("{}: {e}", r.algorithm_name))))
        .collect::<anyhow::Result<_>>()?;
    let domain = rank_metric_table(&metrics).map_err(|e| user_error(e.to_string()))?;
    let reliability = if with_reliability {
        let scores: Vec<ReliabilityScores> = reports
            .iter()
            .map(|r| {
                reliability_scores(&r.algorithm_name, &training_curve(r), &cfg.reliability)
                    .map_err(|e| user_error(format!("{}: training curve: {e}", r.algorithm_name)))
            })
            .collect::<anyhow::Result<_>>()?;
        let ranks = rank_reliability(&scores).map_err(|e| user_error(e.to_string()))?;
        let combined = combine_rankings(&ranks, &domain).map_err(|e| user_error(e.to_string()))?;
        Some((scores, combined))
    } else {
        None
    };
    Ok(RankOutcome {
        metrics,
        domain,
        reliability,
    })
}

pub const METRICS_CSV: &str = "metrics.csv";
pub const RANKS_CSV: &str = "ranks.csv";
pub const DOMAIN_TXT: &str = "domain_table.txt";
pub const RELIABILITY_CSV: &str = "reliability.csv";
pub const COMBINED_CSV: &str = "combined.csv";
pub const COMBINED_TXT: &str = "combined_table.txt";
pub const REPORT_MD: &str = "report.md";
pub const MEAN_REWARDS_CSV: &str = "mean_rewards.csv";

/// Reads the reports in `reports_dir`, ranks them and writes the tables to `out`.
pub fn rank(cfg: &ToolkitConfig, reports_dir: &Path, with_reliability: bool, out: &Path) -> anyhow::Result<RankOutcome> {
    let reports = load_reports(reports_dir)?;
    let outcome = rank_reports(cfg, &reports, with_reliability)?;
    domain_table(&outcome.metrics, &outcome.domain, false).save_csv(&out.join(METRICS_CSV))?;
    rank_table(&outcome.domain).save_csv(&out.join(RANKS_CSV))?;
    write_string(&out.join(DOMAIN_TXT), &domain_table(&outcome.metrics, &outcome.domain, true).to_text())?;
    if let Some((scores, combined)) = &outcome.reliability {
        reliability_scores_table(scores).save_csv(&out.join(RELIABILITY_CSV))?;
        let t = combined_table(combined);
        t.save_csv(&out.join(COMBINED_CSV))?;
        write_string(&out.join(COMBINED_TXT), &t.to_text())?;
    }
    Ok(outcome)
}

#[derive(Debug, Clone, PartialEq)]
pub struct MeanRewards {
    pub algorithm: String,
    /// mean over exploit episodes of each episode's mean step reward
    pub exploit: f64,
    pub train: f64,
}

pub fn mean_of_mean_rewards(report: &AnalysisReport) -> MeanRewards {
    let means = |it: &mut dyn Iterator<Item = f64>| stats::mean(&it.collect::<Vec<_>>()).unwrap_or(f64::NAN);
    MeanRewards {
        algorithm: report.algorithm_name.clone(),
        exploit: means(&mut report.exploit_episodes().map(|e| e.mean_reward())),
        train: means(&mut report.train_episodes().map(|e| e.mean_reward())),
    }
}

/// Renders `report.md` from the rank tables in `rank_dir` and writes the
/// per-algorithm mean-of-mean rewards computed from the reports.
pub fn report(rank_dir: &Path, reports_dir: &Path, out: &Path) -> anyhow::Result<PathBuf> {
    let metrics_path = rank_dir.join(METRICS_CSV);
    let ranks_path = rank_dir.join(RANKS_CSV);
    for p in [&metrics_path, &ranks_path] {
        if !p.is_file() {
            return Err(user_error(format!("missing {}; run `rank` first", p.display())));
        }
    }
    let reports = load_reports(reports_dir)?;
    if reports.is_empty() {
        return Err(user_error(format!("no *{REPORT_SUFFIX} files in {}", reports_dir.display())));
    }
    let experiments: BTreeSet<&str> = reports.iter().map(|r| r.experiment_name.as_str()).collect();
    let experiment = experiments.into_iter().collect::<Vec<_>>().join(", ");

    let mut rewards: Vec<MeanRewards> = reports.iter().map(mean_of_mean_rewards).collect();
    rewards.sort_by(|a, b| b.exploit.total_cmp(&a.exploit).then_with(|| a.algorithm.cmp(&b.algorithm)));
    let mut reward_table = Table::new(["Algorithm", "Exploit mean of mean rewards", "Train mean of mean rewards"]);
    for r in &rewards {
        reward_table.push(vec![r.algorithm.clone(), full(r.exploit), full(r.train)]);
    }
    reward_table.save_csv(&out.join(MEAN_REWARDS_CSV))?;

    let round = |t: &Table, digits: usize| {
        let mut t = t.clone();
        for row in &mut t.rows {
            for c in row.iter_mut().skip(1) {
                if let Ok(v) = c.parse::<f64>() {
                    *c = format!("{v:.digits$}");
                }
            }
        }
        t
    };
    let metrics = Table::read_csv(&metrics_path)?;
    let ranks = Table::read_csv(&ranks_path)?;
    let mut md = String::new();
    md.push_str(&format!("# Algorithm ranking: {experiment}\n\n"));
    md.push_str("## Domain metrics\n\n");
    md.push_str(&round(&metrics, 3).to_markdown());
    md.push_str("\n## Per-metric ranks\n\n");
    md.push_str(&ranks.to_markdown());
    let combined_path = rank_dir.join(COMBINED_CSV);
    if combined_path.is_file() {
        md.push_str("\n## Reliability and combined ranking\n\n");
        md.push_str(&Table::read_csv(&combined_path)?.to_markdown());
    }
    md.push_str("\n## Mean of mean rewards\n\n");
    md.push_str(&round(&reward_table, 4).to_markdown());
    md.push_str(&format!("\nPlot data: `{MEAN_REWARDS_CSV}`.\n"));

    let path = out.join(REPORT_MD);
    write_atomic(&path, |w| Ok(w.write_all(md.as_bytes())?))?;
    Ok(path)
}

/// Resolves an optional `--out`, defaulting to `fallback`.
pub fn out_dir(out: Option<&Path>, fallback: &Path) -> PathBuf {
    out.map(Path::to_path_buf).unwrap_or_else(|| fallback.to_path_buf())
}
