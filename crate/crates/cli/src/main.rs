use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use cmcl_cli::commands::{self, EvalArgs};
use cmcl_cli::config::{parse_flat, RunConfig};
use cmcl_cli::CliError;

#[derive(Parser)]
#[command(name = "cmcl", version, about = "Curriculum training for code-mixed sentiment analysis")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by the commands that read a run configuration.
#[derive(Args)]
struct Common {
    /// Flat `key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    preset: Option<String>,
    /// unigram, trigram or bpe.
    #[arg(long)]
    encoder: Option<String>,
    /// Token corpus for language identification.
    #[arg(long)]
    data_lang: Option<PathBuf>,
    /// Token corpus for POS tagging.
    #[arg(long)]
    data_pos: Option<PathBuf>,
    /// Sentence corpus for sentiment (its texts also feed the LM stage).
    #[arg(long)]
    data_sentiment: Option<PathBuf>,
    /// Any config key, as `key=value`; repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    set: Vec<String>,
}

impl Common {
    fn resolve(&self) -> Result<RunConfig, CliError> {
        let file = match &self.config {
            Some(p) => {
                let body = std::fs::read_to_string(p).map_err(|e| CliError::Io(format!("{}: {e}", p.display())))?;
                parse_flat(&body)?
            }
            None => Vec::new(),
        };
        let mut flags: Vec<(String, String)> = Vec::new();
        for kv in &self.set {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| CliError::Config(format!("--set expects key=value, got `{kv}`")))?;
            flags.push((k.trim().into(), v.trim().into()));
        }
        let named = [
            ("seed", self.seed.map(|s| s.to_string())),
            ("out", self.out.as_ref().map(|p| p.display().to_string())),
            ("preset", self.preset.clone()),
            ("encoder", self.encoder.clone()),
            ("data_lang", self.data_lang.as_ref().map(|p| p.display().to_string())),
            ("data_pos", self.data_pos.as_ref().map(|p| p.display().to_string())),
            ("data_sentiment", self.data_sentiment.as_ref().map(|p| p.display().to_string())),
        ];
        flags.extend(named.into_iter().filter_map(|(k, v)| v.map(|v| (k.to_string(), v))));
        RunConfig::resolve(&file, &flags)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Build the shared subword vocabulary (and BPE merges) from the configured corpora.
    BuildVocab(Common),
    /// Write seeded synthetic corpora.
    Synth {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Sentences per generated file.
        #[arg(long, default_value_t = 2500)]
        n: usize,
        /// sentiment, tagging or all.
        #[arg(long, default_value = "all")]
        profile: String,
        #[arg(long, default_value = "data")]
        out: PathBuf,
    },
    /// Run a curriculum preset and write checkpoint, metrics and summary.
    Train(Common),
    /// Score a checkpoint on a corpus file.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// sentiment, lang, pos, pos+lang or lm.
        #[arg(long, default_value = "sentiment")]
        task: String,
        #[arg(long)]
        data: PathBuf,
        /// Vocabulary file; defaults to the one beside the checkpoint.
        #[arg(long)]
        vocab: Option<PathBuf>,
        #[arg(long, default_value = "macro")]
        averaging: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Predict the sentiment of one text.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        text: String,
        #[arg(long)]
        vocab: Option<PathBuf>,
    },
    /// Finite-difference check of every differentiable op and task loss.
    Gradcheck {
        /// Random shapes/seeds per op.
        #[arg(long, default_value_t = 20)]
        cases: u64,
        /// Scale one op's analytic gradients by 1.01 (negative control).
        #[arg(long, hide = true)]
        inject_fault: Option<String>,
    },
}

fn print_json<T: Serialize>(v: &T) {
    println!("{}", serde_json::to_string(v).expect("serializable record"));
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::BuildVocab(c) => print_json(&commands::build_vocab(&c.resolve()?)?),
        Command::Synth { seed, n, profile, out } => print_json(&commands::synth(seed, n, &profile, &out)?),
        Command::Train(c) => {
            let cfg = c.resolve()?;
            let summary = commands::train(&cfg)?;
            print_json(&summary);
        }
        Command::Eval { checkpoint, task, data, vocab, averaging, seed, out } => {
            let averaging = averaging.parse().map_err(|e| CliError::Config(format!("{e}")))?;
            let args = EvalArgs {
                checkpoint: &checkpoint,
                vocab: vocab.as_deref(),
                task: &task,
                data: &data,
                averaging,
                lm_prefixes: RunConfig::default().lm_prefixes,
                seed,
                out: out.as_deref(),
            };
            print_json(&commands::eval(&args)?);
        }
        Command::Predict { checkpoint, text, vocab } => {
            print_json(&commands::predict(&checkpoint, vocab.as_deref(), &text)?)
        }
        Command::Gradcheck { cases, inject_fault } => {
            if let Some(op) = &inject_fault {
                if !cmcl_core::gradsuite::OPS.contains(&op.as_str()) {
                    return Err(CliError::Config(format!("unknown op `{op}`")));
                }
            }
            let (report, took) = commands::gradcheck(cases, inject_fault.as_deref());
            print!("{}", commands::format_gradcheck(&report));
            println!("elapsed {:.1}s", took.as_secs_f64());
            if !report.passed() {
                return Err(CliError::GradCheckFailed);
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("cmcl: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
