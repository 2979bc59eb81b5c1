use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn sspt(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sspt")).args(args).env("SSPT_LOG", "error").output().unwrap()
}

fn json(out: &Output) -> serde_json::Value {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).unwrap()
}

/// Writes the first `docs` mini-corpus documents and a small-model config.
fn workspace(dir: &Path, docs: usize) -> PathBuf {
    let source = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../data/minicorpus.jsonl");
    let mut corpus = fs::File::create(dir.join("docs.jsonl")).unwrap();
    for line in BufReader::new(fs::File::open(source).unwrap()).lines().take(docs) {
        writeln!(corpus, "{}", line.unwrap()).unwrap();
    }
    let config = dir.join("run.toml");
    fs::write(
        &config,
        r#"
seed = 5
[corpus]
path = "docs.jsonl"
[generator]
min_score = 8.0
[model]
hidden_dim = 8
layers = 1
heads = 2
ffn_dim = 16
max_seq = 96
epochs = 1
learn_rate = 1e-3
optimizer = "adam"
[output]
dir = "out"
"#,
    )
    .unwrap();
    config
}

#[test]
fn stages_run_in_sequence() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace(dir.path(), 150);
    let c = config.to_str().unwrap();

    let ingest = json(&sspt(&["ingest", "--config", c]));
    assert_eq!(ingest["schema_version"], 1);
    assert_eq!(ingest["command"], "ingest");
    assert_eq!(ingest["documents"], 150);

    let index = json(&sspt(&["index", "--config", c]));
    assert!(dir.path().join("out/index.bin").exists());
    assert_eq!(index["passages"], ingest["passages"]);

    let generated = json(&sspt(&["generate", "--config", c]));
    let emitted = generated["generation"]["emitted"].as_u64().unwrap();
    assert!(emitted > 0);
    let lines = fs::read_to_string(dir.path().join("out/dataset.jsonl")).unwrap().lines().count();
    assert_eq!(lines as u64, emitted);
    assert_eq!(json(&sspt(&["stats", "--config", c]))["dataset"], generated["dataset"]);

    let trained = json(&sspt(&["train", "--config", c]));
    assert_eq!(trained["epoch_losses"].as_array().unwrap().len(), 1);
    assert!(dir.path().join("out/checkpoint.bin").exists());
    assert!(dir.path().join("out/loss.csv").exists());

    let eval = json(&sspt(&["eval", "--config", c]));
    let f1 = eval["metrics"]["token_f1"].as_f64().unwrap();
    assert!((0.0..=1.0).contains(&f1));

    let swap = json(&sspt(&["swap-experiment", "--config", c]));
    assert!(swap["pairs"].as_u64().is_some());
}

#[test]
fn flags_override_the_file() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace(dir.path(), 60);
    let other = dir.path().join("elsewhere");
    let out = sspt(&["index", "--config", config.to_str().unwrap(), "--out", other.to_str().unwrap(), "--seed", "9"]);
    assert_eq!(json(&out)["seed"], 9);
    assert!(other.join("index.bin").exists());
}

#[test]
fn missing_seed_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace(dir.path(), 30);
    let text = fs::read_to_string(&config).unwrap().replace("seed = 5", "");
    fs::write(&config, text).unwrap();
    let out = sspt(&["generate", "--config", config.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("seed"));
}

#[test]
fn unknown_config_key_is_reported() {
    let dir = tempfile::tempdir().unwrap();
    let config = workspace(dir.path(), 30);
    let text = fs::read_to_string(&config).unwrap().replace("min_score", "min_scroe");
    fs::write(&config, text).unwrap();
    let out = sspt(&["ingest", "--config", config.to_str().unwrap()]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("min_scroe"));
}
