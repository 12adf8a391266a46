//! Evaluation toolkit for reinforcement-learning policies trained on
//! agent-based models: trace handling, discretization, interestingness
//! analyses, domain and reliability metrics, rankings, and a small epidemic
//! simulator with stand-in policies for generating traces.

pub mod analysis;
pub mod config;
pub mod discretize;
pub mod metrics;
pub mod policy;
pub mod ranking;
pub mod reliability;
pub mod sim;
pub mod stats;
pub mod trace;

pub use analysis::{analyze, AnalysisParams, AnalysisReport};
pub use config::ToolkitConfig;
pub use discretize::{BinningSpec, Discretizer, ValidStates, ValidityMask};
pub use metrics::{aggregate_ranking, rank_metric_table, Metric, MetricRow, RankTable};
pub use ranking::Direction;
pub use reliability::{combine_rankings, CombinedRankTable, ReliabilityScores};
pub use trace::{read_traces, write_traces, Episode, EpisodeKind, Step, TraceSet};
