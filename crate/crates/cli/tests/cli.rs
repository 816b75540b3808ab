use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};
use tempfile::TempDir;

struct Run {
    code: i32,
    stdout: Value,
    stderr: String,
}

fn dingo(args: &[&str]) -> Run {
    let Output { status, stdout, stderr } = Command::new(env!("CARGO_BIN_EXE_dingo"))
        .args(args)
        .output()
        .expect("binary runs");
    let text = String::from_utf8(stdout).unwrap();
    let stdout = if text.trim().is_empty() {
        Value::Null
    } else {
        serde_json::from_str(&text).unwrap_or_else(|e| panic!("stdout is not JSON ({e}): {text}"))
    };
    Run {
        code: status.code().expect("exited normally"),
        stdout,
        stderr: String::from_utf8(stderr).unwrap(),
    }
}

fn write(dir: &TempDir, name: &str, content: &str) -> PathBuf {
    let path = dir.path().join(name);
    fs::write(&path, content).unwrap();
    path
}

fn vocab(dir: &TempDir, tokens: &[&str]) -> PathBuf {
    write(dir, "vocab.json", &json!({"tokens": tokens, "mask": "<m>"}).to_string())
}

fn block(dir: &TempDir, name: &str, rows: &[&[f64]]) -> PathBuf {
    let text = json!({"d": rows.len(), "vocab_size": rows[0].len(), "rows": rows}).to_string();
    write(dir, name, &text)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

/// Tokens a, b and the mask, with the rows v1 = (a 0.6, b 0.4), v2 = (a 0.7, b 0.3).
fn ab_fixture() -> (TempDir, PathBuf, PathBuf) {
    let dir = TempDir::new().unwrap();
    let v = vocab(&dir, &["a", "b", "<m>"]);
    let p = block(&dir, "p.json", &[&[0.6, 0.4, 0.0], &[0.7, 0.3, 0.0]]);
    (dir, v, p)
}

#[test]
fn decode_picks_the_best_valid_prefix() {
    let (_dir, v, p) = ab_fixture();
    let r = dingo(&["decode", "--regex", "a*b", "--vocab", s(&v), "--probs", s(&p)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout["text"], "aa");
    assert_eq!(r.stdout["tokens"], json!([0, 0]));
    assert_eq!(r.stdout["end_state"], 0);
    assert!((r.stdout["log_prob"].as_f64().unwrap() - 0.42f64.ln()).abs() < 1e-12);
}

#[test]
fn compiled_automaton_round_trips_in_both_formats() {
    let (dir, v, p) = ab_fixture();
    let direct = dingo(&["decode", "--regex", "a*b", "--vocab", s(&v), "--probs", s(&p)]);
    for format in ["binary", "json"] {
        let out = dir.path().join(format!("ab.{format}"));
        let r = dingo(&["compile", "--regex", "a*b", "--vocab", s(&v), "--out", s(&out), "--format", format]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        assert_eq!(r.stdout["states"], 3);
        assert_eq!(r.stdout["live_states"], 2);
        assert!(out.exists());
        let loaded = dingo(&["decode", "--automaton", s(&out), "--vocab", s(&v), "--probs", s(&p)]);
        assert_eq!(loaded.code, 0, "{}", loaded.stderr);
        assert_eq!(loaded.stdout, direct.stdout);
    }
}

#[test]
fn automaton_for_another_vocabulary_is_an_input_error() {
    let (dir, v, _) = ab_fixture();
    let out = dir.path().join("ab.dgta");
    assert_eq!(dingo(&["compile", "--regex", "a*b", "--vocab", s(&v), "--out", s(&out)]).code, 0);
    let other = write(&dir, "other.json", &json!({"tokens": ["a", "c", "<m>"], "mask": "<m>"}).to_string());
    let p = block(&dir, "p3.json", &[&[0.5, 0.5, 0.0]]);
    let r = dingo(&["decode", "--automaton", s(&out), "--vocab", s(&other), "--probs", s(&p)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("vocabulary"), "{}", r.stderr);
}

#[test]
fn malformed_regex_exits_with_input_error() {
    let (dir, v, _) = ab_fixture();
    let out = dir.path().join("bad.dgta");
    let r = dingo(&["compile", "--regex", "(a", "--vocab", s(&v), "--out", s(&out)]);
    assert_eq!(r.code, 2);
    assert_eq!(r.stdout, Value::Null);
    assert!(r.stderr.contains("syntax error"), "{}", r.stderr);
    assert!(!out.exists());

    let r = dingo(&["compile", "--regex", r"(a)\1", "--vocab", s(&v), "--out", s(&out)]);
    assert_eq!(r.code, 2);
}

#[test]
fn unsatisfiable_instance_exits_3() {
    let (_dir, v, p) = ab_fixture();
    let r = dingo(&["decode", "--regex", "c", "--vocab", s(&v), "--probs", s(&p)]);
    assert_eq!(r.code, 3);
    assert_eq!(r.stdout["error"], "no_valid_prefix");
}

#[test]
fn unrestricted_pattern_matches_the_argmax() {
    let dir = TempDir::new().unwrap();
    let v = vocab(&dir, &["x", "y", "z", "<m>"]);
    let p = block(
        &dir,
        "p.json",
        &[&[0.2, 0.5, 0.3, 0.0], &[0.6, 0.1, 0.3, 0.0], &[0.1, 0.1, 0.8, 0.0]],
    );
    let r = dingo(&["baseline", "--regex", ".*", "--vocab", s(&v), "--probs", s(&p)]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout["dingo"]["text"], "yxz");
    assert_eq!(r.stdout["dingo"]["tokens"], r.stdout["unconstrained"]["tokens"]);
    assert_eq!(r.stdout["dingo"]["log_prob"], r.stdout["unconstrained"]["log_prob"]);
    assert_eq!(r.stdout["unconstrained"]["valid"], true);
}

#[test]
fn bad_shapes_are_input_errors() {
    let (dir, v, _) = ab_fixture();
    let wide = block(&dir, "wide.json", &[&[0.5, 0.25, 0.25, 0.0]]);
    let r = dingo(&["decode", "--regex", "a*b", "--vocab", s(&v), "--probs", s(&wide)]);
    assert_eq!(r.code, 2);
    assert!(r.stderr.contains("length"), "{}", r.stderr);

    let garbage = write(&dir, "garbage.json", "{\"d\": 3}");
    assert_eq!(dingo(&["decode", "--regex", "a*b", "--vocab", s(&v), "--probs", s(&garbage)]).code, 2);

    let odd = block(&dir, "odd.json", &[&[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0], &[1.0, 0.0, 0.0]]);
    let r = dingo(&["decode", "--regex", "a*b", "--vocab", s(&v), "--probs", s(&odd), "--blocks", "2"]);
    assert_eq!(r.code, 2);

    let p = block(&dir, "p.json", &[&[1.0, 0.0, 0.0]]);
    let r = dingo(&["decode", "--regex", "a*b", "--vocab", s(&v), "--probs", s(&p), "--start-state", "9"]);
    assert_eq!(r.code, 2);
}

#[test]
fn constraint_source_must_be_unique() {
    let (_dir, v, p) = ab_fixture();
    let none = dingo(&["decode", "--vocab", s(&v), "--probs", s(&p)]);
    assert_eq!(none.code, 2);
    let both = dingo(&["decode", "--regex", "a", "--automaton", "x", "--vocab", s(&v), "--probs", s(&p)]);
    assert_eq!(both.code, 2);
}

#[test]
fn multi_block_decode_carries_state() {
    let dir = TempDir::new().unwrap();
    let v = vocab(&dir, &["a", "b", "<m>"]);
    let rows: [&[f64]; 4] = [&[0.4, 0.6, 0.0], &[0.4, 0.6, 0.0], &[0.9, 0.1, 0.0], &[0.9, 0.1, 0.0]];
    let all = block(&dir, "all.json", &rows);
    let first = block(&dir, "b0.json", &rows[..2]);
    let second = block(&dir, "b1.json", &rows[2..]);
    let pattern = "(?:ab)*";
    let split = dingo(&["decode", "--regex", pattern, "--vocab", s(&v), "--probs", s(&all), "--blocks", "2"]);
    assert_eq!(split.code, 0, "{}", split.stderr);
    assert_eq!(split.stdout["text"], "abab");
    assert_eq!(split.stdout["blocks"], 2);
    let files = dingo(&[
        "decode", "--regex", pattern, "--vocab", s(&v), "--probs", s(&first), "--probs", s(&second),
    ]);
    assert_eq!(files.stdout, split.stdout);
    let expected = (0.4f64 * 0.6 * 0.9 * 0.1).ln();
    assert!((split.stdout["log_prob"].as_f64().unwrap() - expected).abs() < 1e-12);

    let stuck = dingo(&["decode", "--regex", "ab", "--vocab", s(&v), "--probs", s(&all), "--blocks", "2"]);
    assert_eq!(stuck.code, 3);
    assert_eq!(stuck.stdout["failed_block"], 1);
    assert_eq!(stuck.stdout["partial_text"], "ab");
}

#[test]
fn masked_positions_use_the_placeholder() {
    let dir = TempDir::new().unwrap();
    let v = vocab(&dir, &["a", "b", "<m>"]);
    let p = block(&dir, "p.json", &[&[0.5, 0.5, 0.0], &[0.0, 0.0, 1.0]]);
    let r = dingo(&["decode", "--regex", "ab", "--vocab", s(&v), "--probs", s(&p)]);
    assert_eq!(r.stdout["text"], "a␠M");
    assert_eq!(r.stdout["realized"], json!([0, 1]));
    let r = dingo(&["decode", "--regex", "ab", "--vocab", s(&v), "--probs", s(&p), "--mask-placeholder", "_"]);
    assert_eq!(r.stdout["text"], "a_");
}

#[test]
fn simulation_is_reproducible() {
    let dir = TempDir::new().unwrap();
    let v = vocab(&dir, &["a", "b", "c", "ab", "ca", "<m>"]);
    let run = |name: &str, strategy: &str| {
        let out = dir.path().join(name);
        let r = dingo(&[
            "simulate", "--regex", "(?:ab|c)+", "--vocab", s(&v), "--block-len", "6", "--steps", "3",
            "--blocks", "2", "--strategy", strategy, "--seed", "17", "--out", s(&out),
        ]);
        assert_eq!(r.code, 0, "{}", r.stderr);
        assert_eq!(r.stdout["valid"], true);
        (r.stdout, fs::read_to_string(out).unwrap())
    };
    for strategy in ["random", "topprob", "entropy"] {
        let (a, ta) = run("a.jsonl", strategy);
        let (b, tb) = run("b.jsonl", strategy);
        assert_eq!(ta, tb);
        assert_eq!(a["tokens"], b["tokens"]);
        assert_eq!(ta.lines().count(), 6);
        for line in ta.lines() {
            let record: Value = serde_json::from_str(line).unwrap();
            assert!(record["masked"].is_array());
        }
    }
}

#[test]
fn simulation_modes_and_injected_blocks() {
    let dir = TempDir::new().unwrap();
    let v = vocab(&dir, &["a", "b", "c", "<m>"]);
    let p = block(&dir, "p.json", &[&[0.6, 0.4, 0.0, 0.0], &[0.1, 0.0, 0.9, 0.0]]);
    let run = |mode: &str| {
        dingo(&[
            "simulate", "--regex", "(aa)|(bc)", "--vocab", s(&v), "--probs", s(&p), "--steps", "1",
            "--mode", mode,
        ])
    };
    let dingo_run = run("dingo");
    assert_eq!(dingo_run.code, 0, "{}", dingo_run.stderr);
    assert_eq!(dingo_run.stdout["text"], "bc");
    assert!(dingo_run.stdout["records"].is_array());
    assert_eq!(run("greedy").stdout["text"], "aa");
    let free = run("unconstrained");
    assert_eq!(free.code, 0);
    assert_eq!(free.stdout["text"], "ac");
    assert_eq!(free.stdout["valid"], false);
}

#[test]
fn oracle_agrees_on_random_instances() {
    let r = dingo(&["oracle", "--random", "500"]);
    assert_eq!(r.code, 0, "{}", r.stdout);
    assert_eq!(r.stdout["instances"], 500);
    assert_eq!(r.stdout["disagreements"], json!([]));
    assert!(r.stdout["optimal"].as_u64().unwrap() > 100);
}

#[test]
fn oracle_checks_a_given_instance() {
    let (_dir, v, p) = ab_fixture();
    let r = dingo(&["oracle", "--regex", "a*b", "--vocab", s(&v), "--probs", s(&p)]);
    assert_eq!(r.code, 0);
    assert_eq!(r.stdout["agree"], true);
    assert_eq!(r.stdout["oracle"]["text"], "aa");
    assert_eq!(r.stdout["enumerated"], 9);
}

#[test]
fn baseline_shows_the_greedy_loss() {
    let dir = TempDir::new().unwrap();
    let v = vocab(&dir, &["a", "b", "c", "<m>"]);
    let p = block(&dir, "p.json", &[&[0.6, 0.4, 0.0, 0.0], &[0.1, 0.0, 0.9, 0.0]]);
    let r = dingo(&["baseline", "--regex", "(aa)|(bc)", "--vocab", s(&v), "--probs", s(&p)]);
    assert_eq!(r.code, 0);
    assert!((r.stdout["dingo"]["log_prob"].as_f64().unwrap() - 0.36f64.ln()).abs() < 1e-12);
    assert!((r.stdout["greedy"]["log_prob"].as_f64().unwrap() - 0.06f64.ln()).abs() < 1e-12);
    assert_eq!(r.stdout["unconstrained"]["valid"], false);

    let reversed = dingo(&[
        "baseline", "--regex", "(aa)|(bc)", "--vocab", s(&v), "--probs", s(&p), "--order", "1,0",
    ]);
    assert_eq!(reversed.stdout["greedy"]["text"], "bc");
    let bad = dingo(&["baseline", "--regex", "(aa)|(bc)", "--vocab", s(&v), "--probs", s(&p), "--order", "0,0"]);
    assert_eq!(bad.code, 2);
}

#[test]
fn bench_writes_csv() {
    let dir = TempDir::new().unwrap();
    let v = vocab(&dir, &["a", "b", "c", "ab", "<m>"]);
    let csv = dir.path().join("bench.csv");
    let r = dingo(&[
        "bench", "--regex", "(?:[abc]{3})*", "--vocab", s(&v), "--d-values", "4,8", "--repeats", "3",
        "--out", s(&csv),
    ]);
    assert_eq!(r.code, 0, "{}", r.stderr);
    assert_eq!(r.stdout["rows"].as_array().unwrap().len(), 2);
    let text = fs::read_to_string(csv).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "d,states,vocab,seconds");
    assert!(lines[1].starts_with("4,4,5,"));
    assert!(lines[2].starts_with("8,4,5,"));
}
