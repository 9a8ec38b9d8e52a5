//! End-to-end tests driving the compiled binary through the full
//! synth -> stats -> train -> generate -> evaluate pipeline.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn cli() -> Command {
    Command::new(env!("CARGO_BIN_EXE_narrative-infill"))
}

fn run(args: &[&str]) -> Output {
    cli().args(args).output().expect("run narrative-infill")
}

/// Asserts success and returns stdout.
fn stdout_of(out: &Output) -> String {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout.clone()).expect("utf-8 stdout")
}

fn assert_exit(out: &Output, code: i32) {
    assert_eq!(
        out.status.code(),
        Some(code),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

/// 12 narratives, 4 steps of 8 words, overlap 0.5 so exactly half of
/// each step's words are shared with its neighbors.
fn synth_args(corpus: &str, seed: &str) -> Vec<String> {
    [
        "synth",
        "--out",
        corpus,
        "--n-narratives",
        "12",
        "--n-steps",
        "4",
        "--words-per-step",
        "8",
        "--vocab-size",
        "60",
        "--d-img",
        "8",
        "--overlap",
        "0.5",
        "--seed",
        seed,
    ]
    .iter()
    .map(|s| s.to_string())
    .collect()
}

const TINY_CONFIG: &str = "d_img = 8
encoder_hidden = 8
decoder_hidden = 12
embed_dim = 8
vocab_size = 80
max_steps = 4
max_words = 8
dropout = 0.0
lr = 0.01
clip = 5
beam = 2
variant = v-infillr
epochs = 2
batch_size = 3
seed = 3
min_freq = 1
train_ratio = 0.75
val_ratio = 0.25
test_ratio = 0.0
";

fn run_owned(args: &[String]) -> Output {
    let refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
    run(&refs)
}

#[test]
fn synth_runs_are_bitwise_deterministic_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.jsonl");
    let b = dir.path().join("b.jsonl");
    let c = dir.path().join("c.jsonl");

    stdout_of(&run_owned(&synth_args(a.to_str().unwrap(), "7")));
    stdout_of(&run_owned(&synth_args(b.to_str().unwrap(), "7")));
    stdout_of(&run_owned(&synth_args(c.to_str().unwrap(), "8")));

    assert_eq!(fs::read(&a).unwrap(), fs::read(&b).unwrap());
    assert_ne!(fs::read(&a).unwrap(), fs::read(&c).unwrap());
    assert!(dir.path().join("a.jsonl.manifest.json").exists());
}

#[test]
fn pipeline_from_synth_to_scored_report() {
    let dir = tempfile::tempdir().unwrap();
    let path = |name: &str| dir.path().join(name);
    let arg = |p: &Path| p.to_str().unwrap().to_string();

    let corpus = path("corpus.jsonl");
    stdout_of(&run_owned(&synth_args(&arg(&corpus), "7")));

    // Corpus statistics: the chain-block overlap comes out exactly.
    let stats_file = path("stats.json");
    let stdout = stdout_of(&run(&[
        "stats",
        "--corpus",
        &arg(&corpus),
        "--out",
        &arg(&stats_file),
    ]));
    let stats: Value = serde_json::from_str(&stdout).expect("stats JSON");
    assert_eq!(stats["n_narratives"], 12);
    assert_eq!(stats["n_steps_total"], 48);
    assert_eq!(stats["avg_steps"], 4.0);
    assert_eq!(stats["avg_words_per_step"], 8.0);
    let fraction = stats["avg_unique_word_fraction"].as_f64().unwrap();
    assert!((fraction - 0.5).abs() < 1e-12, "fraction {fraction}");
    let on_disk: Value =
        serde_json::from_str(&fs::read_to_string(&stats_file).unwrap()).unwrap();
    assert_eq!(stats, on_disk);

    // Train a tiny V-InfillR model.
    let config = path("config.txt");
    fs::write(&config, TINY_CONFIG).unwrap();
    let run_dir = path("run");
    stdout_of(&run(&[
        "train",
        "--config",
        &arg(&config),
        "--corpus",
        &arg(&corpus),
        "--out",
        &arg(&run_dir),
    ]));
    for name in ["checkpoint.bin", "vocab.json", "epoch_logs.jsonl", "manifest.json"] {
        assert!(run_dir.join(name).exists(), "missing {name}");
    }
    // One header line recording the validation convention, then one
    // line per epoch.
    let logs = fs::read_to_string(run_dir.join("epoch_logs.jsonl")).unwrap();
    assert_eq!(logs.lines().count(), 3);
    let header: serde_json::Value = serde_json::from_str(logs.lines().next().unwrap()).unwrap();
    assert_eq!(header["val_loss"], "unmasked");

    // Sweep generation resolves its config from the run manifest and
    // produces the unmasked pass plus one pass per step.
    let gen = path("gen.jsonl");
    let checkpoint = run_dir.join("checkpoint.bin");
    let stdout = stdout_of(&run(&[
        "generate",
        "--checkpoint",
        &arg(&checkpoint),
        "--corpus",
        &arg(&corpus),
        "--sweep",
        "--out",
        &arg(&gen),
    ]));
    assert!(stdout.contains("12 narratives (60 generations)"), "{stdout}");
    let gen_lines = fs::read_to_string(&gen).unwrap();
    assert_eq!(gen_lines.lines().count(), 60);
    assert!(path("gen.jsonl.manifest.json").exists());

    // Same inputs, same bytes.
    let again = path("gen2.jsonl");
    stdout_of(&run(&[
        "generate",
        "--checkpoint",
        &arg(&checkpoint),
        "--corpus",
        &arg(&corpus),
        "--sweep",
        "--out",
        &arg(&again),
    ]));
    assert_eq!(fs::read(&gen).unwrap(), fs::read(&again).unwrap());

    // Narrative-level scoring with one stratum per infill position.
    let report_file = path("report.json");
    let stdout = stdout_of(&run(&[
        "evaluate",
        &arg(&gen),
        "--corpus",
        &arg(&corpus),
        "--out",
        &arg(&report_file),
    ]));
    let report: Value = serde_json::from_str(&stdout).expect("report JSON");
    assert_eq!(report["pairing"], "narrative");
    assert_eq!(report["n_pairs"], 60);
    assert_eq!(report["per_infill_index"].as_array().unwrap().len(), 5);
    let bleu1 = report["raw"]["bleu1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&bleu1), "bleu1 {bleu1}");
    assert!(report_file.exists());

    let stdout = stdout_of(&run(&[
        "evaluate",
        &arg(&gen),
        "--corpus",
        &arg(&corpus),
        "--per-step",
    ]));
    let per_step: Value = serde_json::from_str(&stdout).expect("per-step JSON");
    assert_eq!(per_step["pairing"], "step");
    assert_eq!(per_step["n_pairs"], 240);

    // Explicit --config plus a fixed infill position.
    let single = path("single.jsonl");
    stdout_of(&run(&[
        "generate",
        "--checkpoint",
        &arg(&checkpoint),
        "--corpus",
        &arg(&corpus),
        "--config",
        &arg(&config),
        "--infill-index",
        "1",
        "--out",
        &arg(&single),
    ]));
    let lines: Vec<Value> = fs::read_to_string(&single)
        .unwrap()
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(lines.len(), 12);
    assert!(lines.iter().all(|v| v["infill_index"] == 1));

    // Masking a step that does not exist is an input error.
    let out = run(&[
        "generate",
        "--checkpoint",
        &arg(&checkpoint),
        "--corpus",
        &arg(&corpus),
        "--infill-index",
        "9",
        "--out",
        &arg(&path("nope.jsonl")),
    ]);
    assert_exit(&out, 2);

    // --infill-index and --sweep are mutually exclusive.
    let out = run(&[
        "generate",
        "--checkpoint",
        &arg(&checkpoint),
        "--corpus",
        &arg(&corpus),
        "--infill-index",
        "0",
        "--sweep",
        "--out",
        &arg(&path("nope.jsonl")),
    ]);
    assert_exit(&out, 2);

    // A tampered run artifact fails manifest verification.
    let vocab = run_dir.join("vocab.json");
    let mut bytes = fs::read(&vocab).unwrap();
    bytes.extend_from_slice(b"\n");
    fs::write(&vocab, bytes).unwrap();
    let out = run(&[
        "generate",
        "--checkpoint",
        &arg(&checkpoint),
        "--corpus",
        &arg(&corpus),
        "--sweep",
        "--out",
        &arg(&path("nope.jsonl")),
    ]);
    assert_exit(&out, 2);
    assert!(stderr_of(&out).contains("checksum"), "{}", stderr_of(&out));
}

#[test]
fn bad_inputs_exit_with_code_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("missing.jsonl");
    assert_exit(&run(&["stats", "--corpus", missing.to_str().unwrap()]), 2);

    // Usage error from the argument parser.
    assert_exit(&run(&["evaluate"]), 2);

    // Config d_img disagrees with the corpus features.
    let corpus = dir.path().join("corpus.jsonl");
    stdout_of(&run_owned(&synth_args(corpus.to_str().unwrap(), "1")));
    let config = dir.path().join("config.txt");
    fs::write(&config, TINY_CONFIG.replace("d_img = 8", "d_img = 16")).unwrap();
    let out = run(&[
        "train",
        "--config",
        config.to_str().unwrap(),
        "--corpus",
        corpus.to_str().unwrap(),
        "--out",
        dir.path().join("run").to_str().unwrap(),
    ]);
    assert_exit(&out, 2);
    assert!(stderr_of(&out).contains("d_img"), "{}", stderr_of(&out));
}

#[test]
fn thread_cap_env_must_be_a_positive_integer() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("corpus.jsonl");
    stdout_of(&run_owned(&synth_args(corpus.to_str().unwrap(), "1")));

    let out = cli()
        .env("NARRATIVE_INFILL_THREADS", "abc")
        .args(["stats", "--corpus", corpus.to_str().unwrap()])
        .output()
        .unwrap();
    assert_exit(&out, 2);

    let out = cli()
        .env("NARRATIVE_INFILL_THREADS", "1")
        .args(["stats", "--corpus", corpus.to_str().unwrap()])
        .output()
        .unwrap();
    stdout_of(&out);
}

#[test]
fn gradcheck_prints_a_full_table_and_passes() {
    let out = run(&["gradcheck", "--seed", "9"]);
    let stdout = stdout_of(&out);
    assert!(stdout.contains("all 17 checks passed"), "{stdout}");
    assert!(stdout.contains("bigru_decoder_xent"), "{stdout}");
}
