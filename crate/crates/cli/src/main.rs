//! `s2t`: generate synthetic handwriting, train and evaluate stroke-to-text
//! models.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use s2t_core::eval::AblationSpec;
use s2t_core::training::TransferMode;
use s2t_core::Error;

use commands::{EvalArgs, TrainArgs};
use config::{resolve, ConfigSources, RunConfig};

#[derive(Parser)]
#[command(name = "s2t", version, about = "Stroke sequence to text transduction")]
#[command(after_help = "Any config key can be overridden with --<dotted.key> VALUE, e.g. --train.initial_lr 4e-4")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON run configuration, merged over the preset.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named configuration (v61..v68, v74, v80, desk).
    #[arg(long, global = true)]
    preset: Option<String>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Floating-point width, 32 or 64.
    #[arg(long, global = true)]
    precision: Option<u32>,
    /// Single worker thread and zero wall time in logs.
    #[arg(long, global = true)]
    deterministic: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum Transfer {
    Frozen,
    FineTune,
}

#[derive(Subcommand)]
enum Command {
    /// Render synthetic train/val/test JSONL splits.
    GenData,
    /// Train a BPE vocabulary on the configured corpus.
    TrainBpe,
    /// Train a model; writes model.s2t, vocab.txt, metrics.csv.
    Train {
        /// Data directory, JSONL file, or synthetic[_en|_fr|_de].
        #[arg(long, default_value = "synthetic")]
        data: String,
        /// Checkpoint whose encoder initializes the new model.
        #[arg(long)]
        encoder: Option<PathBuf>,
        #[arg(long, value_enum, default_value = "frozen")]
        transfer: Transfer,
    },
    /// Print one transcription per input sequence.
    Infer {
        #[arg(long)]
        checkpoint: PathBuf,
        /// JSONL stroke sequences.
        #[arg(long)]
        input: PathBuf,
    },
    /// Evaluate a checkpoint on a split; prints the report as JSON.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: String,
        #[arg(long, default_value = "test")]
        split: String,
    },
    /// Perturb a split and evaluate on it.
    Ablate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: String,
        #[arg(long, default_value = "test")]
        split: String,
        /// JSON spec, e.g. '{"mode":"drop_last_k","k":2}'.
        #[arg(long)]
        ablation: String,
    },
    /// Export cross-attention of one decode as JSON and PGM heatmaps.
    Attn {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: String,
        #[arg(long, default_value = "test")]
        split: String,
        #[arg(long, default_value_t = 0)]
        index: usize,
    },
}

/// Pulls `--a.b VALUE` and `--a.b=VALUE` config overrides out of the
/// arguments before clap sees them.
fn split_overrides(args: Vec<String>) -> Result<(Vec<String>, Vec<(String, String)>), String> {
    let mut rest = Vec::with_capacity(args.len());
    let mut overrides = Vec::new();
    let mut it = args.into_iter();
    while let Some(arg) = it.next() {
        match arg.strip_prefix("--").filter(|k| k.split('=').next().is_some_and(|k| k.contains('.'))) {
            Some(kv) => match kv.split_once('=') {
                Some((k, v)) => overrides.push((k.to_string(), v.to_string())),
                None => {
                    let v = it.next().ok_or_else(|| format!("--{kv} needs a value"))?;
                    overrides.push((kv.to_string(), v));
                }
            },
            None => rest.push(arg),
        }
    }
    Ok((rest, overrides))
}

fn exit_code(e: &Error) -> (u8, &'static str) {
    match e {
        Error::Config(_) | Error::ConfigMismatch(_) => (3, "config"),
        Error::Io(_) => (4, "io"),
        Error::MalformedLine { .. }
        | Error::Json(_)
        | Error::NoGlyph(_)
        | Error::SentenceTooLong { .. }
        | Error::Split(_)
        | Error::EmptyStroke
        | Error::EmptySequence
        | Error::SequenceExceedsN { .. }
        | Error::DegenerateScale => (5, "data"),
        Error::Vocab(_) | Error::UnknownTokenId(_) => (6, "vocab"),
        Error::Checkpoint(_) => (7, "checkpoint"),
        Error::NonFiniteLoss { .. } => (8, "training"),
        Error::EmptyReference(_) | Error::Ablation(_) => (9, "eval"),
        _ => (10, "internal"),
    }
}

fn fail(kind: &str, code: u8, msg: &str) -> ExitCode {
    eprintln!("s2t: error[{kind}]: {}", msg.replace('\n', " "));
    ExitCode::from(code)
}

fn init_threads(deterministic: bool) -> Result<(), Error> {
    let threads = match std::env::var("S2T_THREADS") {
        Ok(v) => v.parse::<usize>().map_err(|_| Error::Config(format!("S2T_THREADS={v:?} is not a count")))?,
        Err(_) => 0,
    };
    let threads = if deterministic { 1 } else { threads };
    if threads > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build_global()
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    Ok(())
}

fn run(cli: Cli, overrides: &[(String, String)]) -> Result<(), Error> {
    let c = &cli.common;
    init_threads(c.deterministic)?;
    let run_config = || -> Result<RunConfig, Error> {
        resolve(&ConfigSources {
            preset: c.preset.as_deref(),
            file: c.config.as_deref(),
            overrides,
            seed: c.seed,
            precision: c.precision,
            deterministic: c.deterministic,
        })
    };
    let precision = c.precision.unwrap_or(32);
    if precision != 32 && precision != 64 {
        return Err(Error::Config(format!("precision must be 32 or 64, got {precision}")));
    }
    let out = c.out.as_deref();
    match &cli.command {
        Command::GenData => commands::gen_data(&run_config()?, out),
        Command::TrainBpe => commands::train_bpe(&run_config()?, out),
        Command::Train { data, encoder, transfer } => {
            let transfer = match transfer {
                Transfer::Frozen => TransferMode::Frozen,
                Transfer::FineTune => TransferMode::FineTune,
            };
            commands::train(&run_config()?, &TrainArgs { data, encoder: encoder.as_deref(), transfer, out })
        }
        Command::Infer { checkpoint, input } => commands::infer(checkpoint, input, precision),
        Command::Eval { checkpoint, data, split } => {
            commands::eval(&EvalArgs { checkpoint, data, split, precision, out }, None)
        }
        Command::Ablate { checkpoint, data, split, ablation } => {
            let spec: AblationSpec =
                serde_json::from_str(ablation).map_err(|e| Error::Config(format!("ablation spec: {e}")))?;
            commands::eval(&EvalArgs { checkpoint, data, split, precision, out }, Some(&spec))
        }
        Command::Attn { checkpoint, data, split, index } => {
            commands::attn(&EvalArgs { checkpoint, data, split, precision, out }, *index)
        }
    }
}

fn main() -> ExitCode {
    let (args, overrides) = match split_overrides(std::env::args().collect()) {
        Ok(v) => v,
        Err(msg) => return fail("usage", 2, &msg),
    };
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            print!("{e}");
            return ExitCode::SUCCESS;
        }
        Err(e) => return fail("usage", 2, e.to_string().lines().next().unwrap_or("bad arguments")),
    };
    match run(cli, &overrides) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let (code, kind) = exit_code(&e);
            fail(kind, code, &e.to_string())
        }
    }
}
