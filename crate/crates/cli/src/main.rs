//! `perfrnn`: encode, prepare, train, sample and evaluate performance
//! models from the command line.

mod commands;
mod config;

use clap::{ArgMatches, Args, CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};
use perfrnn_core::{AugmentationMode, Combination, QuantizationConfig};
use std::path::PathBuf;
use std::process::ExitCode;

/// Exit status for bad input: unreadable or malformed files, bad flags.
pub const EXIT_INPUT: u8 = 2;
/// Exit status for numeric failure during training or sampling.
pub const EXIT_NUMERIC: u8 = 3;

#[derive(Debug)]
pub enum CliError {
    Input(String),
    Numeric(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Input(_) => EXIT_INPUT,
            CliError::Numeric(_) => EXIT_NUMERIC,
        }
    }

    fn message(&self) -> &str {
        match self {
            CliError::Input(m) | CliError::Numeric(m) => m,
        }
    }
}

pub type CliResult = Result<(), CliError>;

pub fn input_err(e: impl std::fmt::Display) -> CliError {
    CliError::Input(e.to_string())
}

#[derive(Debug, Parser)]
#[command(
    name = "perfrnn",
    version,
    about = "Expressive piano performance modeling with an event-based LSTM",
    args_override_self = true,
    propagate_version = true
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Encode a MIDI file as a performance event text dump
    Encode(EncodeArgs),
    /// Decode an event text dump into a MIDI file
    Decode(DecodeArgs),
    /// Split a directory of MIDI files into clips and write a manifest
    Prep(PrepArgs),
    /// Train a model on the clips of a manifest
    Train(TrainArgs),
    /// Generate a performance from a checkpoint and write it as MIDI
    Sample(SampleArgs),
    /// Report the held-out per-step log-loss of a checkpoint
    Eval(EvalArgs),
}

/// Flags every subcommand accepts.
#[derive(Debug, Args)]
pub struct ConfigArgs {
    /// Read flags from a file of key=value lines ('#' starts a comment);
    /// flags given on the command line take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// Print the resolved flags in config-file form and exit
    #[arg(long)]
    pub print_config: bool,
}

#[derive(Debug, Args)]
pub struct CodecArgs {
    /// Drop velocity events (381-event vocabulary)
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub no_velocity: bool,
}

impl CodecArgs {
    pub fn quantization(&self) -> QuantizationConfig {
        if self.no_velocity {
            QuantizationConfig::without_velocity()
        } else {
            QuantizationConfig::default()
        }
    }
}

#[derive(Debug, Args)]
pub struct EncodeArgs {
    /// Input MIDI file
    pub midi: PathBuf,
    /// Output event text file
    pub output: PathBuf,
    /// Extend notes held by the sustain pedal until the pedal lifts
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub extend_pedal: bool,
    #[command(flatten)]
    pub codec: CodecArgs,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct DecodeArgs {
    /// Input event text file
    pub events: PathBuf,
    /// Output MIDI file
    pub output: PathBuf,
    /// Fail on malformed event streams instead of repairing them
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub strict: bool,
    #[command(flatten)]
    pub codec: CodecArgs,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum AugmentationArg {
    None,
    Less,
    More,
}

impl From<AugmentationArg> for AugmentationMode {
    fn from(a: AugmentationArg) -> Self {
        match a {
            AugmentationArg::None => AugmentationMode::None,
            AugmentationArg::Less => AugmentationMode::Less,
            AugmentationArg::More => AugmentationMode::More,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum CombinationArg {
    Cross,
    Union,
}

impl From<CombinationArg> for Combination {
    fn from(c: CombinationArg) -> Self {
        match c {
            CombinationArg::Cross => Combination::Cross,
            CombinationArg::Union => Combination::Union,
        }
    }
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    /// Directory searched recursively for .mid/.midi files
    pub corpus: PathBuf,
    /// Manifest file to write
    pub manifest: PathBuf,
    /// Extend notes held by the sustain pedal until the pedal lifts
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub extend_pedal: bool,
    /// Clip length in seconds
    #[arg(long, default_value_t = 30.0)]
    pub clip_len_s: f64,
    /// Training segment length in seconds, recorded for `train`
    #[arg(long, default_value_t = 15.0)]
    pub segment_len_s: f64,
    /// Fraction of source files held out for evaluation
    #[arg(long, default_value_t = 0.1)]
    pub heldout_fraction: f64,
    /// Augmentation policy, recorded for `train`
    #[arg(long, value_enum, default_value_t = AugmentationArg::Less)]
    pub augmentation: AugmentationArg,
    /// How transpositions and stretches combine
    #[arg(long, value_enum, default_value_t = CombinationArg::Cross)]
    pub combination: CombinationArg,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    /// Manifest written by `prep`
    pub manifest: PathBuf,
    /// Checkpoint file (written periodically, read with --resume)
    pub checkpoint: PathBuf,
    /// Number of LSTM layers
    #[arg(long, default_value_t = 3)]
    pub layers: usize,
    /// Cells per LSTM layer
    #[arg(long, default_value_t = 512)]
    pub cells: usize,
    /// Sequences per update
    #[arg(long, default_value_t = 64)]
    pub batch_size: usize,
    /// SGD learning rate
    #[arg(long, default_value_t = 0.001)]
    pub learning_rate: f64,
    /// Global gradient norm limit
    #[arg(long, default_value_t = 5.0)]
    pub grad_clip_norm: f64,
    /// Stop after this many updates in total
    #[arg(long, default_value_t = 10_000)]
    pub max_steps: u64,
    /// Evaluate on the held-out clips every N updates
    #[arg(long, default_value_t = 100)]
    pub eval_interval: u64,
    /// Write the checkpoint every N updates
    #[arg(long, default_value_t = 100)]
    pub checkpoint_interval: u64,
    /// Training segment length in seconds; overrides the manifest
    #[arg(long, default_value_t = 15.0)]
    pub segment_len_s: f64,
    /// Augmentation policy; overrides the manifest
    #[arg(long, value_enum, default_value_t = AugmentationArg::Less)]
    pub augmentation: AugmentationArg,
    /// How transpositions and stretches combine; overrides the manifest
    #[arg(long, value_enum, default_value_t = CombinationArg::Cross)]
    pub combination: CombinationArg,
    /// Seed for initialization and batch sampling
    #[arg(long, env = "PERF_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Continue from the checkpoint file if it exists; its model and
    /// training settings win over flags, except the step limits
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub resume: bool,
    /// Training log path (default: checkpoint path with .log.csv appended)
    #[arg(long, value_name = "FILE")]
    pub log: Option<PathBuf>,
    #[command(flatten)]
    pub codec: CodecArgs,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct SampleArgs {
    /// Checkpoint written by `train`
    pub checkpoint: PathBuf,
    /// Output MIDI file
    pub output: PathBuf,
    /// Softmax temperature
    #[arg(long, default_value_t = 1.0)]
    pub temperature: f64,
    /// Always take the most likely event
    #[arg(long, num_args = 0..=1, default_value_t = false, default_missing_value = "true", action = clap::ArgAction::Set)]
    pub greedy: bool,
    /// Beams kept by stochastic beam search (1 = plain sampling)
    #[arg(long, default_value_t = 1)]
    pub beam_width: usize,
    /// Continuations proposed per beam
    #[arg(long, default_value_t = 4)]
    pub branch_factor: usize,
    /// Stop once the time shifts reach this many seconds
    #[arg(long, default_value_t = 30.0)]
    pub seconds: f64,
    /// Stop after this many events
    #[arg(long, default_value_t = 20_000)]
    pub max_events: usize,
    /// Sampling seed
    #[arg(long, env = "PERF_SEED", default_value_t = 0)]
    pub seed: u64,
    /// Also write the generated events as text
    #[arg(long, value_name = "FILE")]
    pub events_out: Option<PathBuf>,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Checkpoint written by `train`
    pub checkpoint: PathBuf,
    /// Manifest whose held-out clips are scored
    pub manifest: PathBuf,
    /// Evaluation segment length in seconds; overrides the checkpoint
    #[arg(long, default_value_t = 15.0)]
    pub segment_len_s: f64,
    #[command(flatten)]
    pub cfg: ConfigArgs,
}

fn run(args: Vec<std::ffi::OsString>) -> CliResult {
    let args = config::inject_config_file(args)?;
    let matches = Cli::command().try_get_matches_from(&args).map_err(|e| {
        let _ = e.print();
        if e.use_stderr() {
            CliError::Input(String::new())
        } else {
            // --help and --version
            std::process::exit(0)
        }
    })?;
    let cli = Cli::from_arg_matches(&matches).map_err(input_err)?;
    let (name, sub) = matches.subcommand().expect("subcommand required");
    if print_config_requested(&cli) {
        print!("{}", config::render(name, sub));
        return Ok(());
    }
    dispatch(cli, sub)
}

fn print_config_requested(cli: &Cli) -> bool {
    match &cli.command {
        Command::Encode(a) => a.cfg.print_config,
        Command::Decode(a) => a.cfg.print_config,
        Command::Prep(a) => a.cfg.print_config,
        Command::Train(a) => a.cfg.print_config,
        Command::Sample(a) => a.cfg.print_config,
        Command::Eval(a) => a.cfg.print_config,
    }
}

fn dispatch(cli: Cli, sub: &ArgMatches) -> CliResult {
    match cli.command {
        Command::Encode(a) => commands::encode::run(&a),
        Command::Decode(a) => commands::decode::run(&a),
        Command::Prep(a) => commands::prep::run(&a),
        Command::Train(a) => commands::train::run(&a, sub),
        Command::Sample(a) => commands::sample::run(&a),
        Command::Eval(a) => commands::eval::run(&a, sub),
    }
}

fn main() -> ExitCode {
    match run(std::env::args_os().collect()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !e.message().is_empty() {
                eprintln!("error: {}", e.message());
            }
            ExitCode::from(e.code())
        }
    }
}
