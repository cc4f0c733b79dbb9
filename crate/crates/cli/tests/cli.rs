use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn bin() -> Command {
    let mut c = Command::new(env!("CARGO_BIN_EXE_c3trace"));
    c.env_remove("C3TRACE_MAX_EXPAND");
    c
}

fn run(args: &[&str], dir: &Path) -> Output {
    bin()
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn json(out: &Output) -> Value {
    serde_json::from_slice(&out.stdout).unwrap_or_else(|e| {
        panic!(
            "stdout is not JSON ({e}): {}\nstderr: {}",
            String::from_utf8_lossy(&out.stdout),
            String::from_utf8_lossy(&out.stderr)
        )
    })
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn generate(dir: &Path, users: &str, length: &str, p: &str, seed: &str) {
    let out = run(
        &[
            "generate", "--users", users, "--length", length, "--p", p, "--seed", seed,
        ],
        dir,
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn generate_is_reproducible() {
    let a = TempDir::new().unwrap();
    let b = TempDir::new().unwrap();
    generate(a.path(), "10", "32", "0.5", "7");
    generate(b.path(), "10", "32", "0.5", "7");
    for f in ["code.txt", "state.txt"] {
        assert_eq!(
            fs::read(a.path().join(f)).unwrap(),
            fs::read(b.path().join(f)).unwrap()
        );
    }
    let text = fs::read_to_string(a.path().join("code.txt")).unwrap();
    assert!(text.starts_with("c3code N=10 M=32 P=0.5\n"));
    assert_eq!(text.lines().count(), 11);
}

#[test]
fn generate_attack_trace_pipeline() {
    let d = TempDir::new().unwrap();
    generate(d.path(), "40", "200", "0.5", "3");
    let out = run(
        &[
            "attack",
            "--code",
            "code.txt",
            "--pirates",
            "1,5,9",
            "--attack",
            "majority",
            "--seed",
            "4",
        ],
        d.path(),
    );
    assert_eq!(code(&out), 0);
    let attack = json(&out);
    assert_eq!(attack["result"]["pirates"], serde_json::json!([1, 5, 9]));
    assert_eq!(attack["manifest"]["master_seed"], 4);

    let out = run(
        &[
            "trace",
            "--code",
            "code.txt",
            "--state",
            "state.txt",
            "--word",
            "word.txt",
            "--eps0",
            "0.01",
        ],
        d.path(),
    );
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    let v = json(&out);
    let accused: Vec<u64> = v["result"]["accused"]
        .as_array()
        .unwrap()
        .iter()
        .map(|x| x.as_u64().unwrap())
        .collect();
    assert!(!accused.is_empty());
    assert!(accused.iter().all(|u| [1, 5, 9].contains(u)));
    assert!(v["result"]["halted_at"].is_u64());
    assert_eq!(v["manifest"]["input_digests"].as_object().unwrap().len(), 3);
}

#[test]
fn erasures_need_a_seed() {
    let d = TempDir::new().unwrap();
    generate(d.path(), "20", "60", "0.5", "1");
    let out = run(
        &[
            "attack",
            "--code",
            "code.txt",
            "--pirates",
            "0,1",
            "--attack",
            "erase-detectable",
            "--erase-prob",
            "1",
            "--seed",
            "2",
        ],
        d.path(),
    );
    assert_eq!(code(&out), 0);
    assert!(json(&out)["result"]["erasures"].as_u64().unwrap() > 0);
    let base = [
        "trace",
        "--code",
        "code.txt",
        "--state",
        "state.txt",
        "--word",
        "word.txt",
        "--eps0",
        "0.01",
    ];
    assert_eq!(code(&run(&base, d.path())), 1);
    let mut with_seed = base.to_vec();
    with_seed.extend(["--seed", "9"]);
    assert_eq!(code(&run(&with_seed, d.path())), 0);
}

#[test]
fn trace_reports_dimension_mismatch() {
    let d = TempDir::new().unwrap();
    generate(d.path(), "10", "32", "0.5", "7");
    fs::write(d.path().join("short.txt"), "0101\n").unwrap();
    let out = run(
        &[
            "trace",
            "--code",
            "code.txt",
            "--state",
            "state.txt",
            "--word",
            "short.txt",
            "--eps0",
            "0.01",
        ],
        d.path(),
    );
    assert_eq!(code(&out), 1);
    let v = json(&out);
    assert_eq!(v["error"]["mismatch"]["kind"], "word_length");
    assert_eq!(v["error"]["mismatch"]["expected"], 32);
    assert_eq!(v["error"]["contract_violation"], false);
}

#[test]
fn length_table_matches_published_values() {
    let d = TempDir::new().unwrap();
    let out = run(&["length", "--table", "paper"], d.path());
    assert_eq!(code(&out), 0);
    let text = String::from_utf8(out.stdout).unwrap();
    let rows: Vec<&str> = text
        .lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .collect();
    assert_eq!(rows.len(), 6);
    let lengths: Vec<&str> = rows.iter().map(|r| r.split(',').nth(6).unwrap()).collect();
    assert_eq!(lengths, ["282", "502", "934", "420", "556", "349"]);
    assert!(rows.iter().all(|r| r.ends_with(",true")));
}

#[test]
fn length_accepts_fraction_syntax() {
    let d = TempDir::new().unwrap();
    let out = run(
        &[
            "length",
            "--users",
            "100",
            "--eps",
            "9e-3",
            "--eps0",
            "fraction:0.5",
        ],
        d.path(),
    );
    assert_eq!(code(&out), 0);
    let v = json(&out);
    assert_eq!(v["result"]["length"], 135);
    assert_eq!(v["result"]["breakdown"]["condition_m_ok"], true);
    let plain = run(
        &[
            "length", "--users", "100", "--eps", "0.009", "--eps0", "0.0045",
        ],
        d.path(),
    );
    assert_eq!(json(&plain)["result"]["length"], 135);
}

#[test]
fn exit_codes() {
    let d = TempDir::new().unwrap();
    let infeasible = run(
        &[
            "length",
            "--users",
            "100",
            "--eps",
            "0.009",
            "--eps0",
            "0.0045",
            "--ceiling",
            "100",
        ],
        d.path(),
    );
    assert_eq!(code(&infeasible), 2);
    assert_eq!(json(&infeasible)["error"]["contract_violation"], true);
    assert_eq!(
        code(&run(
            &["length", "--users", "100", "--eps", "0.001", "--eps0", "0.01"],
            d.path()
        )),
        1
    );
    assert_eq!(code(&run(&["frobnicate"], d.path())), 1);
    assert_eq!(code(&run(&["generate", "--bogus"], d.path())), 1);
    assert_eq!(code(&run(&["--help"], d.path())), 0);
}

#[test]
fn help_documents_flags() {
    let d = TempDir::new().unwrap();
    let out = run(&["simulate", "--help"], d.path());
    let text = String::from_utf8(out.stdout).unwrap();
    for flag in ["--config", "--per-trial", "--threads"] {
        assert!(text.contains(flag), "{flag} missing from help");
    }
}

#[test]
fn triples_lists_under_cap() {
    let d = TempDir::new().unwrap();
    fs::write(
        d.path().join("code.txt"),
        "c3code N=5 M=4 P=0.5\n0011\n0101\n0110\n1111\n1000\n",
    )
    .unwrap();
    fs::write(d.path().join("word.txt"), "0111\n").unwrap();
    let out = run(
        &["triples", "--code", "code.txt", "--word", "word.txt"],
        d.path(),
    );
    assert_eq!(code(&out), 0);
    let indexed = json(&out)["result"].clone();
    let out = run(
        &[
            "triples", "--code", "code.txt", "--word", "word.txt", "--naive",
        ],
        d.path(),
    );
    let naive = json(&out)["result"].clone();
    assert_eq!(indexed["triples"], naive["triples"]);
    assert!(indexed["count"].as_u64().unwrap() > 0);

    let capped = bin()
        .args(["triples", "--code", "code.txt", "--word", "word.txt"])
        .env("C3TRACE_MAX_EXPAND", "0")
        .current_dir(d.path())
        .output()
        .unwrap();
    assert_eq!(code(&capped), 0);
    let v = json(&capped);
    assert!(v["result"]["triples"].is_null());
    assert!(v["result"]["class_counts"].is_object());
}

#[test]
fn simulate_is_thread_count_independent() {
    let d = TempDir::new().unwrap();
    let config = serde_json::json!({
        "params": {"n_users": 30, "code_length": 120, "bias": 0.5, "eps0": 0.01},
        "n_pirates": 3,
        "strategy": {"kind": "unbalanced", "weights": [0.6, 0.2, 0.2]},
        "trials": 60,
        "master_seed": 5,
        "threshold_mode": "exact"
    });
    fs::write(d.path().join("exp.json"), config.to_string()).unwrap();
    let one = run(
        &["simulate", "--config", "exp.json", "--threads", "1"],
        d.path(),
    );
    let three = run(
        &[
            "simulate",
            "--config",
            "exp.json",
            "--threads",
            "3",
            "--per-trial",
            "trials.csv",
        ],
        d.path(),
    );
    assert_eq!(code(&one), 0, "{}", String::from_utf8_lossy(&one.stderr));
    assert_eq!(code(&three), 0);
    assert_eq!(json(&one)["result"], json(&three)["result"]);
    assert_eq!(json(&one)["result"]["trials"], 60);
    let csv = fs::read_to_string(d.path().join("trials.csv")).unwrap();
    assert!(csv.starts_with("# manifest: "));
    assert_eq!(csv.lines().count(), 62);

    let audit_cfg = serde_json::json!({
        "params": {"n_users": 30, "code_length": 120, "bias": 0.5, "eps0": 0.01},
        "n_pirates": 2,
        "strategy": {"kind": "interleave"},
        "trials": 50,
        "master_seed": 6,
        "threshold_mode": "exact"
    });
    fs::write(d.path().join("audit.json"), audit_cfg.to_string()).unwrap();
    let audit = run(
        &["simulate", "--config", "audit.json", "--sum-rule"],
        d.path(),
    );
    assert_eq!(code(&audit), 0);
    assert_eq!(json(&audit)["result"]["passed"], true);
}

#[test]
fn bad_config_is_a_parameter_error() {
    let d = TempDir::new().unwrap();
    fs::write(d.path().join("bad.json"), "{\"params\": 3}").unwrap();
    assert_eq!(
        code(&run(&["simulate", "--config", "bad.json"], d.path())),
        1
    );
}
