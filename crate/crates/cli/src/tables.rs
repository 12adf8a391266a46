//! Rank and metric tables as CSV (full precision), aligned text and markdown.

use std::io::Write;
use std::path::Path;

use anyhow::Context;
use domrl_core::metrics::{Metric, MetricRow, RankTable};
use domrl_core::reliability::{CombinedRankTable, ReliabilityScores, RELIABILITY_COLUMNS};

use crate::fsio::write_atomic;
use crate::user_error;

/// Header plus rows of already-formatted cells.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Self {
            header: header.into_iter().map(Into::into).collect(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    pub fn write_csv<W: Write>(&self, w: W) -> anyhow::Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record(&self.header)?;
        for r in &self.rows {
            out.write_record(r)?;
        }
        out.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> anyhow::Result<()> {
        write_atomic(path, |w| self.write_csv(w))
    }

    pub fn read_csv(path: &Path) -> anyhow::Result<Table> {
        let mut rdr = csv::Reader::from_path(path).map_err(|e| user_error(format!("{}: {e}", path.display())))?;
        let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
        let mut table = Table::new(header);
        for rec in rdr.records() {
            let rec = rec.with_context(|| format!("reading {}", path.display())).map_err(|e| user_error(format!("{e:#}")))?;
            table.rows.push(rec.iter().map(str::to_string).collect());
        }
        Ok(table)
    }

    fn widths(&self) -> Vec<usize> {
        let mut w: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (i, c) in r.iter().enumerate() {
                w[i] = w[i].max(c.chars().count());
            }
        }
        w
    }

    /// Space-aligned columns: the first left-aligned, the rest right-aligned.
    pub fn to_text(&self) -> String {
        let w = self.widths();
        let line = |cells: &[String]| {
            let parts: Vec<String> = cells
                .iter()
                .enumerate()
                .map(|(i, c)| if i == 0 { format!("{c:<0$}", w[i]) } else { format!("{c:>0$}", w[i]) })
                .collect();
            parts.join("  ").trim_end().to_string() + "\n"
        };
        let mut out = line(&self.header);
        let total: usize = w.iter().sum::<usize>() + 2 * (w.len() - 1);
        out.push_str(&"-".repeat(total));
        out.push('\n');
        for r in &self.rows {
            out.push_str(&line(r));
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let escape = |c: &String| c.replace('_', "\\_").replace('|', "\\|");
        let mut out = format!("| {} |\n", self.header.join(" | "));
        out.push('|');
        for i in 0..self.header.len() {
            out.push_str(if i == 0 { " :--- |" } else { " ---: |" });
        }
        out.push('\n');
        for r in &self.rows {
            out.push_str(&format!("| {} |\n", r.iter().map(escape).collect::<Vec<_>>().join(" | ")));
        }
        out
    }
}

/// Shortest decimal that round-trips; stable across runs and platforms.
pub fn full(x: f64) -> String {
    format!("{x}")
}

fn decimals(m: Metric) -> usize {
    match m {
        Metric::MeanReward => 3,
        Metric::StateCoverage | Metric::UnifiedCoverage => 3,
        Metric::BestSequences => 2,
        Metric::MedianReward => 4,
    }
}

fn domain_header() -> Vec<String> {
    let mut h = vec!["Algorithm".to_string()];
    h.extend(Metric::ALL.iter().map(|m| m.title().to_string()));
    h.push("Aggregate Rank".into());
    h.push("Rank".into());
    h
}

fn row_for<'a>(rows: &'a [MetricRow], algorithm: &str) -> &'a MetricRow {
    rows.iter().find(|r| r.algorithm == algorithm).expect("ranked algorithms come from these rows")
}

/// Metric values with aggregate and final rank, in final-rank order.
/// `text` selects report rounding instead of full precision.
pub fn domain_table(rows: &[MetricRow], ranks: &RankTable, text: bool) -> Table {
    let mut t = Table::new(domain_header());
    for r in &ranks.rows {
        let m = row_for(rows, &r.algorithm);
        let mut cells = vec![r.algorithm.clone()];
        for metric in Metric::ALL {
            let v = m.get(metric);
            cells.push(if text { format!("{v:.0$}", decimals(metric)) } else { full(v) });
        }
        cells.push(r.aggregate_rank.to_string());
        cells.push(format!("{:.1}", r.final_rank));
        t.push(cells);
    }
    t
}

/// Per-metric dense ranks, in final-rank order.
pub fn rank_table(ranks: &RankTable) -> Table {
    let mut t = Table::new(domain_header());
    for r in &ranks.rows {
        let mut cells = vec![r.algorithm.clone()];
        cells.extend(r.ranks.iter().map(usize::to_string));
        cells.push(r.aggregate_rank.to_string());
        cells.push(format!("{:.1}", r.final_rank));
        t.push(cells);
    }
    t
}

pub fn reliability_scores_table(scores: &[ReliabilityScores]) -> Table {
    let windows = scores.first().map_or(0, |s| s.iqr_scores.len());
    let mut header = vec!["Algorithm".to_string(), "IQR".to_string()];
    header.extend((1..=windows).map(|w| format!("IQR window {w}")));
    header.extend(["LCVaRonDiff", "LCVaRonDrawDown", "Median Performance"].map(String::from));
    let mut t = Table::new(header);
    for s in scores {
        let mut cells = vec![s.algorithm.clone(), full(s.dispersion())];
        cells.extend(s.iqr_scores.iter().map(|v| full(*v)));
        cells.extend([full(s.cvar_diff), full(s.cvar_drawdown), full(s.median_performance)]);
        t.push(cells);
    }
    t
}

pub fn combined_table(table: &CombinedRankTable) -> Table {
    let mut header = vec!["Algorithm".to_string()];
    header.extend(RELIABILITY_COLUMNS.iter().map(|c| c.to_string()));
    header.extend(["Reliability Rank", "Domain Rank", "Aggregate Rank", "Rank"].map(String::from));
    let mut t = Table::new(header);
    for r in &table.rows {
        let mut cells = vec![r.algorithm.clone()];
        cells.extend(r.reliability_ranks.iter().map(|v| format!("{v:.1}")));
        cells.push(format!("{:.1}", r.reliability_rank_sum));
        cells.push(r.domain_rank.to_string());
        cells.push(format!("{:.1}", r.overall_aggregate));
        cells.push(format!("{:.1}", r.final_rank));
        t.push(cells);
    }
    t
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_alignment_and_markdown() {
        let mut t = Table::new(["Algorithm", "Rank"]);
        t.push(vec!["NR_BN_TD3".into(), "2.0".into()]);
        t.push(vec!["TD3".into(), "1.0".into()]);
        assert_eq!(t.to_text(), "Algorithm  Rank\n---------------\nNR_BN_TD3   2.0\nTD3         1.0\n");
        assert!(t.to_markdown().contains("| NR\\_BN\\_TD3 | 2.0 |"));
    }

    #[test]
    fn csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.csv");
        let mut t = Table::new(["a", "b"]);
        t.push(vec!["x,y".into(), full(0.1 + 0.2)]);
        t.save_csv(&path).unwrap();
        assert_eq!(Table::read_csv(&path).unwrap(), t);
        assert_eq!(full(0.1 + 0.2), "0.30000000000000004");
    }
}
