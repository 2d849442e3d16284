use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;
mod error;

/// Trace-driven ABR experiments for 5G networks.
#[derive(Parser)]
#[command(name = "abr5g", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Parse CSV traces into canonical form, or convert to/from Mahimahi.
    Ingest(IngestArgs),
    /// Generate synthetic traces from a Markov band spec or preset.
    Synth(SynthArgs),
    /// Run every scenario x algorithm session of a plan.
    Eval(EvalArgs),
    /// Train an actor-critic policy.
    Train(TrainArgs),
    /// Re-normalise an evaluation directory.
    Report(ReportArgs),
}

#[derive(Args)]
pub struct IngestArgs {
    /// Trace files or directories (every *.csv, or *.mahi with --from-mahimahi).
    #[arg(required = true)]
    pub paths: Vec<PathBuf>,
    #[arg(long, default_value = "traces")]
    pub out: PathBuf,
    /// Write Mahimahi delivery timestamps instead of canonical CSV.
    #[arg(long, conflicts_with = "from_mahimahi")]
    pub to_mahimahi: bool,
    /// Read Mahimahi timestamp files.
    #[arg(long)]
    pub from_mahimahi: bool,
    /// Bucket width when reading Mahimahi files.
    #[arg(long, default_value_t = abr5g_core::traces::mahimahi::DEFAULT_BUCKET_MS)]
    pub bucket_ms: u64,
    #[arg(long, default_value_t = abr5g_core::traces::mahimahi::DEFAULT_MTU_BYTES)]
    pub mtu: u32,
}

#[derive(Args)]
pub struct SynthArgs {
    /// JSON synthetic spec.
    #[arg(long, required_unless_present = "preset", conflicts_with = "preset")]
    pub config: Option<PathBuf>,
    /// Built-in scenario: driving, streetcar, suburban_train, rural_train,
    /// concert, nr_dc_walking or lte.
    #[arg(long)]
    pub preset: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Base seed; trace i uses seed + i. Defaults to the config's seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value = "traces")]
    pub out: PathBuf,
}

#[derive(Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub plan: PathBuf,
    /// Overrides the plan's output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Overrides the plan's window seed.
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Args)]
pub struct TrainArgs {
    /// JSON training plan: train/sim/ladder settings and trace sets.
    #[arg(long)]
    pub config: PathBuf,
    #[arg(long, default_value = "checkpoints")]
    pub out: PathBuf,
    /// Overwrite an existing output directory.
    #[arg(long)]
    pub force: bool,
    /// Continue from a checkpoint with optimizer state (e.g. last.ckpt).
    #[arg(long)]
    pub resume: Option<PathBuf>,
    /// Total epoch count, overriding the config.
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long, conflicts_with = "resume")]
    pub seed: Option<u64>,
}

#[derive(Args)]
pub struct ReportArgs {
    pub dir: PathBuf,
    /// Algorithm to normalise against; defaults to the evaluation's.
    #[arg(long)]
    pub reference: Option<String>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::new().filter_or("ABR5G_LOG", "warn")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Ingest(a) => commands::ingest(&a),
        Command::Synth(a) => commands::synth(&a),
        Command::Eval(a) => commands::eval(&a),
        Command::Train(a) => commands::train(&a),
        Command::Report(a) => commands::report(&a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
