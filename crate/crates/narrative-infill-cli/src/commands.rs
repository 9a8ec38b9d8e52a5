//! One function per subcommand. All of them are thin: load inputs,
//! call the library, write artifacts, record a manifest. Input files
//! are never modified.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use rayon::prelude::*;

use narrative_infill::corpus::{
    corpus_stats, encode_corpus, encode_narrative, load_corpus, split_corpus, write_corpus,
    Vocabulary,
};
use narrative_infill::infer::{
    generate_narrative, infill_sweep, read_generations, write_generations, GeneratedNarrative,
};
use narrative_infill::metrics::evaluate_run;
use narrative_infill::model::{self, ModelConfig, ModelParams};
use narrative_infill::nn::checkpoint::Checkpoint;
use narrative_infill::nn::gradcheck::standard_suite;
use narrative_infill::synth::SynthConfig;
use narrative_infill::{Error, Result};

use crate::manifest::{sibling_manifest, RunManifest};

/// Print to stdout, treating a closed pipe as a normal early exit
/// (callers write their artifacts before printing, so nothing is
/// lost). Panicking `println!` would turn `... | head` into an error.
fn emit(text: impl AsRef<str>) {
    use std::io::ErrorKind;
    let mut stdout = std::io::stdout();
    let write = stdout
        .write_all(text.as_ref().as_bytes())
        .and_then(|()| stdout.write_all(b"\n"));
    if let Err(e) = write {
        if e.kind() == ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        eprintln!("error: cannot write to stdout: {e}");
        std::process::exit(2);
    }
}

pub fn cmd_stats(corpus_path: &Path, out: Option<&Path>) -> Result<()> {
    let corpus = load_corpus(corpus_path)?;
    let report = corpus_stats(&corpus)?;
    let json = serde_json::to_string_pretty(&report)?;
    if let Some(path) = out {
        fs::write(path, json.clone() + "\n")?;
    }
    emit(json);
    Ok(())
}

pub fn cmd_synth(config: &SynthConfig, out: &Path) -> Result<()> {
    let corpus = narrative_infill::synth::generate(config)?;
    write_corpus(out, &corpus)?;

    let mut manifest = RunManifest::new("synth");
    manifest.seed = Some(config.seed);
    manifest.synth = Some(config.clone());
    manifest.artifact("corpus", out)?;
    manifest.save(&sibling_manifest(out))?;

    emit(format!(
        "wrote {} narratives ({} steps each, d_img {}) to {}",
        corpus.len(),
        config.n_steps,
        config.d_img,
        out.display()
    ));
    Ok(())
}

pub fn cmd_train(
    config_path: &Path,
    corpus_path: &Path,
    out_dir: &Path,
    seed: Option<u64>,
) -> Result<()> {
    let mut config = ModelConfig::from_file(config_path)?;
    if let Some(seed) = seed {
        config.seed = seed;
    }
    for warning in config.validate()? {
        eprintln!("warning: {warning}");
    }

    let corpus = load_corpus(corpus_path)?;
    let dim = corpus.first().map_or(0, |n| n.feature_dim());
    if corpus.is_empty() {
        return Err(Error::invalid(format!("corpus {} is empty", corpus_path.display())));
    }
    if dim != config.d_img {
        return Err(Error::invalid(format!(
            "corpus features have dimension {dim} but the config says d_img = {}",
            config.d_img
        )));
    }

    let ratios = (config.train_ratio, config.val_ratio, config.test_ratio);
    let (train_set, val_set, test_set) = split_corpus(corpus, ratios, config.seed)?;
    if train_set.is_empty() {
        return Err(Error::invalid("train split is empty; adjust the ratios"));
    }
    let vocab = Vocabulary::build(&train_set, config.min_freq, config.vocab_size);
    let enc_train = encode_corpus(&train_set, &vocab, config.max_steps, config.max_words)?;
    let enc_val = encode_corpus(&val_set, &vocab, config.max_steps, config.max_words)?;

    // Progress goes to stderr so piping stdout never interferes with
    // the artifact writes below.
    eprintln!(
        "training {} on {} narratives ({} validation, {} test), vocabulary {}",
        config.variant,
        train_set.len(),
        val_set.len(),
        test_set.len(),
        vocab.len()
    );
    let outcome = model::train(&enc_train, &enc_val, vocab.len(), &config)?;
    for log in &outcome.logs {
        let val = log.val_loss.map_or_else(|| "   -  ".to_string(), |v| format!("{v:.4}"));
        eprintln!(
            "epoch {:>4}  masks {}  train {:.4}  val {val}",
            log.epoch, log.mask_count, log.train_loss
        );
    }
    if !val_set.is_empty() {
        eprintln!("kept parameters from epoch {} (best validation loss)", outcome.best_epoch);
    }

    fs::create_dir_all(out_dir)?;
    let checkpoint_path = out_dir.join("checkpoint.bin");
    let vocab_path = out_dir.join("vocab.json");
    let logs_path = out_dir.join("epoch_logs.jsonl");
    outcome.best_params.to_checkpoint(outcome.optimizer.clone()).save(&checkpoint_path)?;
    vocab.save_json(&vocab_path)?;
    let mut logs_file = fs::File::create(&logs_path)?;
    // Header line first: validation loss is always eval-mode and
    // unmasked, whatever the training variant masks.
    serde_json::to_writer(
        &mut logs_file,
        &serde_json::json!({
            "variant": config.variant.to_string(),
            "val_loss": "unmasked",
            "epochs": config.epochs,
        }),
    )?;
    logs_file.write_all(b"\n")?;
    for log in &outcome.logs {
        serde_json::to_writer(&mut logs_file, log)?;
        logs_file.write_all(b"\n")?;
    }
    logs_file.flush()?;

    let mut manifest = RunManifest::new("train");
    manifest.seed = Some(config.seed);
    manifest.config = Some(config.clone());
    manifest.input("config", config_path)?;
    manifest.input("corpus", corpus_path)?;
    manifest.artifact("checkpoint", &checkpoint_path)?;
    manifest.artifact("vocab", &vocab_path)?;
    manifest.artifact("epoch_logs", &logs_path)?;
    if !test_set.is_empty() {
        // The held-out split, so generate/evaluate can consume exactly
        // the narratives the model never saw.
        let test_path = out_dir.join("test.jsonl");
        write_corpus(&test_path, &test_set)?;
        manifest.artifact("test_corpus", &test_path)?;
    }
    manifest.save(&out_dir.join("manifest.json"))?;

    emit(format!("wrote {}", out_dir.join("manifest.json").display()));
    Ok(())
}

pub fn cmd_generate(
    checkpoint_path: &Path,
    corpus_path: &Path,
    config_path: Option<&Path>,
    infill_index: Option<usize>,
    sweep: bool,
    out: &Path,
) -> Result<()> {
    let checkpoint = Checkpoint::load(checkpoint_path)?;
    let params = ModelParams::from_checkpoint(&checkpoint)?;
    let run_dir = match checkpoint_path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };

    let config = match config_path {
        Some(path) => ModelConfig::from_file(path)?,
        None => {
            let manifest_path = run_dir.join("manifest.json");
            if !manifest_path.exists() {
                return Err(Error::invalid(format!(
                    "no --config given and no manifest at {}; pass --config or generate \
                     from a training run directory",
                    manifest_path.display()
                )));
            }
            let manifest = RunManifest::load(&manifest_path)?;
            manifest.verify_artifact("checkpoint", &run_dir)?;
            manifest.verify_artifact("vocab", &run_dir)?;
            manifest
                .config
                .ok_or_else(|| Error::invalid("manifest records no model config; pass --config"))?
        }
    };

    let vocab = Vocabulary::load_json(&run_dir.join("vocab.json"))?;
    if vocab.len() != params.vocab_len() {
        return Err(Error::invalid(format!(
            "vocabulary has {} entries but the checkpoint embeds {}",
            vocab.len(),
            params.vocab_len()
        )));
    }

    let corpus = load_corpus(corpus_path)?;
    if corpus.is_empty() {
        return Err(Error::invalid(format!("corpus {} is empty", corpus_path.display())));
    }
    let dim = corpus[0].feature_dim();
    if dim != params.d_img() {
        return Err(Error::invalid(format!(
            "corpus features have dimension {dim} but the checkpoint expects {}",
            params.d_img()
        )));
    }

    // Beam decoding is deterministic, so narratives can be generated in
    // parallel without affecting the output.
    let per_narrative: Vec<Vec<GeneratedNarrative>> = corpus
        .par_iter()
        .map(|narrative| {
            let enc = encode_narrative(narrative, &vocab, config.max_steps, config.max_words)?;
            if sweep {
                infill_sweep(&params, &vocab, &narrative.id, &enc.feature_matrix, &config)
            } else {
                generate_narrative(
                    &params,
                    &vocab,
                    &narrative.id,
                    &enc.feature_matrix,
                    &config,
                    infill_index,
                )
                .map(|g| vec![g])
            }
        })
        .collect::<Result<_>>()?;
    let generations: Vec<GeneratedNarrative> = per_narrative.into_iter().flatten().collect();
    write_generations(out, &generations)?;

    let mut manifest = RunManifest::new("generate");
    manifest.seed = Some(config.seed);
    manifest.config = Some(config.clone());
    manifest.input("checkpoint", checkpoint_path)?;
    manifest.input("corpus", corpus_path)?;
    if let Some(path) = config_path {
        manifest.input("config", path)?;
    }
    manifest.artifact("generations", out)?;
    manifest.save(&sibling_manifest(out))?;

    emit(format!(
        "generated {} narratives ({} generations) -> {}",
        corpus.len(),
        generations.len(),
        out.display()
    ));
    Ok(())
}

pub fn cmd_evaluate(
    generations_path: &Path,
    corpus_path: &Path,
    per_step: bool,
    out: Option<&Path>,
) -> Result<()> {
    let generations = read_generations(generations_path)?;
    let references = load_corpus(corpus_path)?;
    let report = evaluate_run(&generations, &references, per_step)?;
    if let Some(path) = out {
        report.save(path)?;
        let mut manifest = RunManifest::new("evaluate");
        manifest.input("generations", generations_path)?;
        manifest.input("corpus", corpus_path)?;
        manifest.artifact("report", path)?;
        manifest.save(&sibling_manifest(path))?;
    }
    emit(serde_json::to_string_pretty(&report)?);
    Ok(())
}

/// Returns whether every check passed; the caller turns `false` into a
/// numeric-failure exit code.
pub fn cmd_gradcheck(seed: u64) -> Result<bool> {
    let checks = standard_suite(seed)?;
    let mut table = format!("{:<34} {:>13} {:>11}  result", "op", "max rel err", "tolerance");
    for check in &checks {
        table += &format!(
            "\n{:<34} {:>13.3e} {:>11.0e}  {}",
            check.name,
            check.max_rel_err,
            check.tolerance,
            if check.pass { "PASS" } else { "FAIL" }
        );
    }
    let failed = checks.iter().filter(|c| !c.pass).count();
    if failed == 0 {
        table += &format!("\nall {} checks passed", checks.len());
    } else {
        table += &format!("\n{failed} of {} checks FAILED", checks.len());
    }
    emit(table);
    Ok(failed == 0)
}
