use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_relfactory"))
}

fn run(args: &[&str]) -> Output {
    let out = bin().args(args).output().unwrap();
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn fixture(dir: &Path) -> PathBuf {
    let out = run(&["synth", dir.to_str().unwrap()]);
    PathBuf::from(String::from_utf8(out.stdout).unwrap().trim())
}

#[test]
fn train_run_score_roundtrip() {
    let dir = tempfile::tempdir().unwrap();
    let conf = fixture(dir.path());
    let conf = conf.to_str().unwrap();
    run(&["train", "-c", conf]);
    let first = dir.path().join("a.tsv");
    let second = dir.path().join("b.tsv");
    run(&["run", "-c", conf, "--output", first.to_str().unwrap()]);
    run(&["train", "-c", conf]);
    run(&["run", "-c", conf, "--output", second.to_str().unwrap()]);
    assert_eq!(std::fs::read(&first).unwrap(), std::fs::read(&second).unwrap());

    let gold = dir.path().join("gold.tsv");
    let out = run(&[
        "score",
        first.to_str().unwrap(),
        gold.to_str().unwrap(),
        "--config",
        conf,
    ]);
    let line = String::from_utf8(out.stdout).unwrap();
    let fields: Vec<&str> = line.split_whitespace().take(3).collect();
    assert_eq!(fields.len(), 3, "{line}");
    for (f, key) in fields.iter().zip(["P=", "R=", "F1="]) {
        let value = f.strip_prefix(key).unwrap_or_else(|| panic!("{line}"));
        assert_eq!(value.split('.').nth(1).map(str::len), Some(4), "{line}");
    }
}

#[test]
fn alt_names_only_run() {
    let dir = tempfile::tempdir().unwrap();
    let conf = fixture(dir.path());
    let conf = conf.to_str().unwrap();
    run(&["train", "-c", conf]);
    let path = dir.path().join("alt.tsv");
    run(&[
        "run",
        "-c",
        conf,
        "--disable",
        "classifier,ds_patterns,manual_patterns",
        "--run-id",
        "alt",
        "--output",
        path.to_str().unwrap(),
    ]);
    let text = std::fs::read_to_string(&path).unwrap();
    let mut answered = 0;
    for line in text.lines() {
        let cols: Vec<&str> = line.split('\t').collect();
        assert_eq!(cols[2], "alt");
        if cols[3] != "NIL" {
            assert!(cols[1].ends_with(":alternate_names"), "{line}");
            answered += 1;
        }
    }
    assert!(answered > 0);
}

#[test]
fn missing_input_is_a_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "corpus = nowhere.txt\nkb = nowhere.tsv\n").unwrap();
    let out = bin().args(["train", "-c", conf.to_str().unwrap()]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("configuration error"));

    let out = bin().args(["run", "-c", "/no/such.conf"]).output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unknown_validator_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let conf = fixture(dir.path());
    let out = bin()
        .args(["run", "-c", conf.to_str().unwrap(), "--disable", "oracle"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
