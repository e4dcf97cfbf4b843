use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const SMALL: &str = r#"
seed = 7
checks = ["chebyshev", "mla", "oracle_maximal", "search_lambda0"]

[grid]
cells = 64

[sweep]
configs = 12
cells = 64
oracle_configs = 6
oracle_cells = 32
"#;

fn maxlab(args: &[&str], env_out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_maxlab"));
    cmd.args(args).env_remove("MAXLAB_OUT_DIR");
    if let Some(d) = env_out {
        cmd.env("MAXLAB_OUT_DIR", d);
    }
    cmd.output().expect("binary runs")
}

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_owned()
}

#[test]
fn check_passes_and_csv_is_reproducible() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    let ra = maxlab(
        &["check", "--config", &cfg, "--out", a.to_str().unwrap()],
        None,
    );
    assert_eq!(
        ra.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&ra.stderr)
    );
    let rb = maxlab(
        &[
            "check",
            "--config",
            &cfg,
            "--out",
            b.to_str().unwrap(),
            "--threads",
            "2",
        ],
        None,
    );
    assert_eq!(rb.status.code(), Some(0));
    let ca = fs::read(a.join("report.csv")).unwrap();
    assert_eq!(ca, fs::read(b.join("report.csv")).unwrap());
    let text = String::from_utf8(ca).unwrap();
    assert!(text.starts_with(
        "check,anchor,status,worst_violation,witness,param_p,param_delta,param_lambda,N,L\n"
    ));
    assert_eq!(text.lines().count(), 5);
}

#[test]
fn seed_flag_changes_the_draws() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    maxlab(
        &["check", "--config", &cfg, "--out", a.to_str().unwrap()],
        None,
    );
    maxlab(
        &[
            "check",
            "--config",
            &cfg,
            "--out",
            b.to_str().unwrap(),
            "--seed",
            "8",
        ],
        None,
    );
    assert_ne!(
        fs::read(a.join("report.csv")).unwrap(),
        fs::read(b.join("report.csv")).unwrap()
    );
}

#[test]
fn corrupted_oracle_exits_one_with_witness() {
    let tmp = tempfile::tempdir().unwrap();
    let body = format!("{SMALL}oracle_perturbation = 1e-3\n");
    let cfg = write_config(tmp.path(), "bad.toml", &body);
    let out = tmp.path().join("o");
    let r = maxlab(
        &["check", "--config", &cfg, "--out", out.to_str().unwrap()],
        None,
    );
    assert_eq!(r.status.code(), Some(1));
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    let row = csv
        .lines()
        .find(|l| l.starts_with("oracle_maximal,"))
        .unwrap();
    assert!(row.contains(",fail,"), "{row}");
    assert!(row.contains("uniform(seed=7;draw="), "{row}");
}

#[test]
fn config_and_output_errors_exit_two() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("o");
    let out = out.to_str().unwrap();
    let missing = tmp.path().join("nope.toml");
    assert_eq!(
        maxlab(
            &["check", "--config", missing.to_str().unwrap(), "--out", out],
            None
        )
        .status
        .code(),
        Some(2)
    );

    let malformed = write_config(tmp.path(), "m.toml", "seed = [");
    assert_eq!(
        maxlab(&["check", "--config", &malformed, "--out", out], None)
            .status
            .code(),
        Some(2)
    );

    let unknown = write_config(tmp.path(), "u.toml", "sede = 3\n");
    assert_eq!(
        maxlab(&["check", "--config", &unknown, "--out", out], None)
            .status
            .code(),
        Some(2)
    );

    let invalid = write_config(tmp.path(), "i.toml", "[params]\np = 1.0\n");
    let r = maxlab(&["check", "--config", &invalid, "--out", out], None);
    assert_eq!(r.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&r.stderr).contains("p must exceed 1"));

    let blocker = tmp.path().join("file");
    fs::write(&blocker, "x").unwrap();
    let cfg = write_config(
        tmp.path(),
        "s.toml",
        "checks = [\"search_lambda0\"]\n[grid]\ncells = 64\n",
    );
    let r = maxlab(
        &[
            "check",
            "--config",
            &cfg,
            "--out",
            blocker.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(r.status.code(), Some(2));

    assert_eq!(maxlab(&["frobnicate"], None).status.code(), Some(2));
}

#[test]
fn env_dir_json_and_report_round_trip() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "small.toml", SMALL);
    let env_dir = tmp.path().join("env");
    let r = maxlab(
        &["check", "--config", &cfg, "--format", "json"],
        Some(&env_dir),
    );
    assert_eq!(r.status.code(), Some(0));
    let json = env_dir.join("report.json");
    assert!(json.exists());

    let direct = tmp.path().join("direct");
    maxlab(
        &["check", "--config", &cfg, "--out", direct.to_str().unwrap()],
        None,
    );
    let again = tmp.path().join("again");
    let r = maxlab(
        &[
            "report",
            "--input",
            json.to_str().unwrap(),
            "--out",
            again.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(r.status.code(), Some(0));
    assert_eq!(
        fs::read(direct.join("report.csv")).unwrap(),
        fs::read(again.join("report.csv")).unwrap()
    );
}

#[test]
fn json_config_is_accepted() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "c.json",
        r#"{"seed": 3, "checks": ["search_lambda0"], "grid": {"cells": 64}}"#,
    );
    let out = tmp.path().join("o");
    let r = maxlab(
        &["check", "--config", &cfg, "--out", out.to_str().unwrap()],
        None,
    );
    assert_eq!(
        r.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&r.stderr)
    );
}

#[test]
fn search_subcommand_records_lambda0() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "s.toml", "[grid]\ncells = 64\n");
    let out = tmp.path().join("o");
    let r = maxlab(
        &[
            "search-lambda0",
            "--config",
            &cfg,
            "--out",
            out.to_str().unwrap(),
        ],
        None,
    );
    assert_eq!(r.status.code(), Some(0));
    let csv = fs::read_to_string(out.join("report.csv")).unwrap();
    assert!(csv.lines().nth(1).unwrap().starts_with("search_lambda0,"));
    assert!(String::from_utf8_lossy(&r.stdout).contains("lambda0="));
}
