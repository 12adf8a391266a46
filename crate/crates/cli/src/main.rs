use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use domrl_cli::commands::{self, out_dir};
use domrl_cli::{default_experiment_dir, exit_code, load_config, EXIT_OK};

#[derive(Parser)]
#[command(name = "domrl", version, about = "Simulate, analyze and rank RL policy variants on an agent-based epidemic model")]
struct Cli {
    /// TOML config; built-in defaults when omitted
    #[arg(short = 'c', long, env = "DOMRL_CONFIG", global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate trace files for one experiment
    Simulate {
        /// experiment name from the config (Baseline, HighMask, LowMask by default)
        #[arg(long)]
        experiment: String,
        /// comma-separated variant labels, e.g. NR_BinnedQ,Heuristic
        #[arg(long, value_delimiter = ',')]
        variants: Vec<String>,
        /// defaults to <output_dir>/<experiment>
        #[arg(long)]
        out: Option<PathBuf>,
        /// also write per-tick compartment counts of exploit episodes
        #[arg(long)]
        curves: bool,
    },
    /// Analyze every *.traces.jsonl in a directory
    Analyze {
        traces: PathBuf,
        /// defaults to the trace directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank the algorithms of every *.analysis.jsonl in a directory
    Rank {
        reports: PathBuf,
        #[arg(long)]
        with_reliability: bool,
        /// defaults to the report directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Render report.md and mean-reward plot data from rank tables
    Report {
        ranks: PathBuf,
        /// directory with the analysis reports; defaults to the rank directory
        #[arg(long)]
        reports: Option<PathBuf>,
        /// defaults to the rank directory
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    let cfg = load_config(cli.config.as_deref())?;
    match cli.command {
        Command::Simulate {
            experiment,
            variants,
            out,
            curves,
        } => {
            let dir = out_dir(out.as_deref(), &default_experiment_dir(&cfg, &experiment));
            for o in commands::simulate(&cfg, &experiment, &variants, &dir, curves)? {
                println!(
                    "{}: {} train + {} exploit episodes -> {}",
                    o.variant,
                    o.train_episodes,
                    o.exploit_episodes,
                    o.path.display()
                );
            }
        }
        Command::Analyze { traces, out } => {
            let dir = out_dir(out.as_deref(), &traces);
            for p in commands::analyze(&cfg, &traces, &dir)? {
                println!("{}", p.display());
            }
        }
        Command::Rank {
            reports,
            with_reliability,
            out,
        } => {
            let dir = out_dir(out.as_deref(), &reports);
            let outcome = commands::rank(&cfg, &reports, with_reliability, &dir)?;
            let table = domrl_cli::tables::domain_table(&outcome.metrics, &outcome.domain, true);
            print!("{}", table.to_text());
            if let Some((_, combined)) = &outcome.reliability {
                println!();
                print!("{}", domrl_cli::tables::combined_table(combined).to_text());
            }
        }
        Command::Report { ranks, reports, out } => {
            let reports = reports.unwrap_or_else(|| ranks.clone());
            let dir = out_dir(out.as_deref(), &ranks);
            println!("{}", commands::report(&ranks, &reports, &dir)?.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("error")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::from(EXIT_OK as u8),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e) as u8)
        }
    }
}
