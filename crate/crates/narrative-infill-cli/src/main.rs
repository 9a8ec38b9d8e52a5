//! `narrative-infill`: corpus statistics, synthetic data, training,
//! beam-search generation with infilling, evaluation and gradient
//! self-checks, as one executable.
//!
//! Exit codes: 0 success, 2 bad input (including usage errors), 3
//! numeric failure (divergence, failed gradient checks).

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use narrative_infill::synth::SynthConfig;
use narrative_infill::{Error, Result};

#[derive(Parser)]
#[command(name = "narrative-infill", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print corpus statistics as JSON.
    Stats {
        #[arg(long)]
        corpus: PathBuf,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Generate a synthetic corpus with a controllable word overlap
    /// between neighboring steps.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 200)]
        n_narratives: usize,
        #[arg(long, default_value_t = 5)]
        n_steps: usize,
        #[arg(long, default_value_t = 10)]
        words_per_step: usize,
        #[arg(long, default_value_t = 1000)]
        vocab_size: usize,
        #[arg(long, default_value_t = 64)]
        d_img: usize,
        /// Target fraction of each step's words shared with its
        /// neighbors, in [0, 1].
        #[arg(long, default_value_t = 0.6)]
        overlap: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Train a model; writes checkpoint, vocabulary, epoch logs, the
    /// held-out test split and a run manifest into --out.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Output directory, created if missing.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed from the config file.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Generate narratives for a corpus from a trained checkpoint.
    Generate {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Config file; defaults to the snapshot in the manifest next
        /// to the checkpoint.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Zero-mask this step's features in every narrative before
        /// generating; must be a valid step index in every narrative.
        #[arg(long, conflicts_with = "sweep")]
        infill_index: Option<usize>,
        /// Generate once without masking plus once per infill position.
        #[arg(long)]
        sweep: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score generations (JSONL, as written by generate) against the
    /// corpus they were generated from.
    Evaluate {
        generations: PathBuf,
        #[arg(long)]
        corpus: PathBuf,
        /// Pair hypotheses with references step by step instead of
        /// joining whole narratives.
        #[arg(long)]
        per_step: bool,
        /// Also write the report here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run finite-difference checks over every differentiable op.
    Gradcheck {
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

/// Honor NARRATIVE_INFILL_THREADS before any rayon work happens.
fn init_thread_pool() -> Result<()> {
    let threads = match std::env::var("NARRATIVE_INFILL_THREADS") {
        Ok(value) => value,
        Err(std::env::VarError::NotPresent) => return Ok(()),
        Err(e) => return Err(Error::invalid(format!("NARRATIVE_INFILL_THREADS: {e}"))),
    };
    let n: usize = threads.trim().parse().map_err(|_| {
        Error::invalid(format!(
            "NARRATIVE_INFILL_THREADS must be a positive integer, got {threads:?}"
        ))
    })?;
    if n == 0 {
        return Err(Error::invalid("NARRATIVE_INFILL_THREADS must be at least 1"));
    }
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::invalid(format!("cannot size the thread pool: {e}")))
}

fn run(command: Command) -> Result<ExitCode> {
    match command {
        Command::Stats { corpus, out } => {
            commands::cmd_stats(&corpus, out.as_deref())?;
        }
        Command::Synth {
            out,
            n_narratives,
            n_steps,
            words_per_step,
            vocab_size,
            d_img,
            overlap,
            seed,
        } => {
            let config = SynthConfig {
                n_narratives,
                n_steps,
                words_per_step,
                vocab_size,
                d_img,
                overlap,
                seed,
            };
            commands::cmd_synth(&config, &out)?;
        }
        Command::Train { config, corpus, out, seed } => {
            commands::cmd_train(&config, &corpus, &out, seed)?;
        }
        Command::Generate { checkpoint, corpus, config, infill_index, sweep, out } => {
            commands::cmd_generate(
                &checkpoint,
                &corpus,
                config.as_deref(),
                infill_index,
                sweep,
                &out,
            )?;
        }
        Command::Evaluate { generations, corpus, per_step, out } => {
            commands::cmd_evaluate(&generations, &corpus, per_step, out.as_deref())?;
        }
        Command::Gradcheck { seed } => {
            if !commands::cmd_gradcheck(seed)? {
                return Ok(ExitCode::from(3));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = init_thread_pool() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match run(cli.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numeric() { 3 } else { 2 })
        }
    }
}
