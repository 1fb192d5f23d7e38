//! `lovesim` command-line pipeline.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

#[derive(Debug, Parser)]
#[command(name = "lovesim", version, about = "Impression-aware dialogue simulation pipeline")]
pub struct Cli {
    /// JSON config with per-subcommand sections.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Master seed; overrides every seed in the config.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Directory for default output paths and manifests.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,
    /// Worker threads for parallel stages (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic corpus with known ground truth.
    Synth(SynthArgs),
    /// Attach love-scale events to utterances and build labeled examples.
    Annotate(AnnotateArgs),
    /// Train one fold's classifier and save it.
    Train(TrainArgs),
    /// Cross-validate every ablation condition and write the report.
    Ablate(AblateArgs),
    /// Simulate dialogues for one pair under several selection methods.
    Simulate(SimulateArgs),
    /// Build A/B items from simulations and tally recorded choices.
    Abtest(AbtestArgs),
    /// Re-render reports from saved results.
    Report(ReportArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    #[arg(long)]
    pub pairs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct AnnotateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// pd, p, d or none.
    #[arg(long, default_value = "pd")]
    pub condition: String,
    #[arg(long, default_value_t = 0)]
    pub fold: usize,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AblateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Comma-separated conditions.
    #[arg(long, default_value = "pd,p,d,none", value_delimiter = ',')]
    pub conditions: Vec<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long)]
    pub corpus: PathBuf,
    /// Pair index in the corpus, or a pair id.
    #[arg(long)]
    pub pair: String,
    #[arg(long, default_value = "baseline,vote-pd,vote-d", value_delimiter = ',')]
    pub methods: Vec<String>,
    /// Directory holding `<condition>/fold-*.bin` ensembles (default: <out-dir>/models).
    #[arg(long)]
    pub models: Option<PathBuf>,
    /// both or y-only.
    #[arg(long)]
    pub optimize: Option<String>,
    /// Also write a readable transcript.
    #[arg(long)]
    pub transcript: bool,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct AbtestArgs {
    /// simulation.json files, one per participant.
    #[arg(long, num_args = 1.., required = true)]
    pub simulations: Vec<PathBuf>,
    /// Recorded choices (participant_id,item_id,choice).
    #[arg(long)]
    pub choices: Option<PathBuf>,
    /// Fill choices with the synthetic ground-truth oracle.
    #[arg(long, conflicts_with = "choices")]
    pub scripted: bool,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// ablation.json written by `ablate`.
    #[arg(long)]
    pub ablation: Option<PathBuf>,
    /// ab_items.json written by `abtest`.
    #[arg(long)]
    pub ab_items: Option<PathBuf>,
    /// Choices to apply to the A/B items.
    #[arg(long, requires = "ab_items")]
    pub choices: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: thread pool: {e}");
            return ExitCode::from(2);
        }
    }
    match commands::run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_validation() { 1 } else { 2 })
        }
    }
}
