use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use nof_core::ontology::PartitionReport;
use nof_core::pipeline::{parse_override, run_pipeline, run_stage, Layout, PipelineConfig, Stage};
use nof_core::{NofError, Result};

#[derive(Parser, Debug)]
#[command(name = "nof", version, about = "Mine ERP patterns and compare the mined rules with an expert rule base")]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized stage.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory for all artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Expert rule base (JSON); same as `--set partition.expert=PATH`.
    #[arg(long, global = true)]
    expert: Option<PathBuf>,
    /// Override any config key, e.g. `--set mine.beta_sup=0.2`.
    #[arg(long = "set", value_name = "KEY=VALUE", global = true)]
    set: Vec<String>,
    /// More log output (repeatable).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug, Clone, Copy)]
enum Command {
    /// Generate synthetic epochs from template sources.
    Synth,
    /// Whiten and run FastICA on the epochs.
    Decompose,
    /// Summarize each factor per condition.
    Extract,
    /// Cluster the summary rows and name the clusters.
    Cluster,
    /// Fit a decision tree on the clustered rows and print its rules.
    Classify,
    /// Discretize rows and mine association rules.
    Mine,
    /// Partition mined rules against the expert rule base.
    Partition,
    /// Run every stage in order.
    Pipeline,
}

impl Command {
    fn stage(self) -> Option<Stage> {
        Some(match self {
            Command::Synth => Stage::Synth,
            Command::Decompose => Stage::Decompose,
            Command::Extract => Stage::Extract,
            Command::Cluster => Stage::Cluster,
            Command::Classify => Stage::Classify,
            Command::Mine => Stage::Mine,
            Command::Partition => Stage::Partition,
            Command::Pipeline => return None,
        })
    }
}

fn config(cli: &Cli) -> Result<PipelineConfig> {
    let mut overrides = cli.set.iter().map(|s| parse_override(s)).collect::<Result<Vec<_>>>()?;
    if let Some(seed) = cli.seed {
        let seed = i64::try_from(seed).map_err(|_| NofError::config("seed must fit in a signed 64-bit integer"))?;
        overrides.push(("seed".into(), toml::Value::Integer(seed)));
    }
    if let Some(out) = &cli.out {
        overrides.push(("out".into(), toml::Value::String(out.to_string_lossy().into_owned())));
    }
    if let Some(expert) = &cli.expert {
        overrides.push(("partition.expert".into(), toml::Value::String(expert.to_string_lossy().into_owned())));
    }
    PipelineConfig::load(cli.config.as_deref(), &overrides)
}

fn print_report(report: &PartitionReport, layout: &Layout) {
    let mut out = std::io::stdout().lock();
    let _ = write!(out, "{}", report.to_summary_text());
    let _ = writeln!(out, "\nfull report: {}", layout.report_txt().display());
}

fn run(cli: &Cli) -> Result<()> {
    let cfg = config(cli)?;
    let layout = Layout::new(&cfg.out);
    match cli.command.stage() {
        Some(stage) => {
            run_stage(stage, &cfg)?;
            if stage == Stage::Partition {
                print_report(&PartitionReport::load(&layout.report_json())?, &layout);
            }
        }
        None => {
            let (report, _) = run_pipeline(&cfg)?;
            print_report(&report, &layout);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
