use std::process::Command;

fn bin() -> Command {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_leadership"));
    cmd.env_remove("LEADERSHIP_OUT_DIR");
    cmd
}

#[test]
fn malformed_manifest_exits_one_and_names_it() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("broken.json");
    std::fs::write(&manifest, "[1, 2").unwrap();
    let out = bin()
        .args(["featurize", "--manifest"])
        .arg(&manifest)
        .arg("--out-dir")
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let stderr = String::from_utf8_lossy(&out.stderr);
    assert!(stderr.contains("broken.json"), "{stderr}");
}

#[test]
fn unknown_subcommand_is_a_usage_error() {
    let out = bin().arg("frobnicate").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn help_exits_zero() {
    let out = bin().arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("online-eval"));
}

#[test]
fn synth_writes_manifest_and_run_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["synth", "--n", "3", "--duration-minutes", "1", "--seed", "2", "--out-dir"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let corpus = leadership::corpus::load_corpus(dir.path().join("manifest.json")).unwrap();
    assert_eq!(corpus.len(), 3);
    let run: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("run.json")).unwrap()).unwrap();
    assert_eq!(run["command"], "synth");
    assert_eq!(run["seed"], 2);
}

#[test]
fn config_file_rejects_unknown_keys() {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("run.toml");
    std::fs::write(&config, "window_minuts = 3\n").unwrap();
    let out = bin().arg("--config").arg(&config).args(["synth", "--n", "2"]).arg("--out-dir").arg(dir.path()).output().unwrap();
    assert_eq!(out.status.code(), Some(1));
}
