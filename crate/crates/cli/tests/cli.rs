use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

const POC: &str = include_str!("../../core/scenarios/smash_poc.json");

fn smash(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smash"))
        .args(args)
        .env("SMASH_LOG", "quiet")
        .output()
        .expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exited normally")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn write_variant(dir: &Path, name: &str, edit: impl FnOnce(&mut Value)) -> String {
    let mut v: Value = serde_json::from_str(POC).unwrap();
    edit(&mut v);
    let p = dir.join(name);
    fs::write(&p, v.to_string()).unwrap();
    p.to_str().unwrap().to_string()
}

fn trace_lines(text: &str) -> Vec<Value> {
    text.lines().map(|l| serde_json::from_str(l).expect("one JSON object per line")).collect()
}

#[test]
fn bundled_scenario_validates() {
    let o = smash(&["validate", "smash_poc"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).starts_with("ok: 7 transitions match"), "{}", stdout(&o));
}

#[test]
fn unusable_input_exits_with_2() {
    let dir = tempfile::tempdir().unwrap();
    let missing = dir.path().join("nope.json");
    assert_eq!(code(&smash(&["run", missing.to_str().unwrap()])), 2);

    let junk = dir.path().join("junk.json");
    fs::write(&junk, "{ not json").unwrap();
    assert_eq!(code(&smash(&["validate", junk.to_str().unwrap()])), 2);

    let extra = write_variant(dir.path(), "extra.json", |v| v["surprise"] = Value::Bool(true));
    assert_eq!(code(&smash(&["run", &extra])), 2);

    let bad_value = write_variant(dir.path(), "value.json", |v| v["values"]["iv_d"][0][0] = "wealth".into());
    assert_eq!(code(&smash(&["run", &bad_value])), 2);
}

#[test]
fn inverted_values_diverge_at_the_call() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_variant(dir.path(), "inverted.json", |v| {
        v["values"]["iv_d"] = serde_json::json!([["conformity_rules"], ["hedonism"], ["benevolence_caring"]]);
    });
    let o = smash(&["validate", &p]);
    assert_eq!(code(&o), 1);
    let out = stdout(&o);
    assert!(out.starts_with("diff: "), "{out}");
    assert!(out.contains("voicemail") && out.contains("ringing"), "{out}");
}

#[test]
fn empty_expectations_pass_vacuously() {
    let dir = tempfile::tempdir().unwrap();
    let p = write_variant(dir.path(), "noexpect.json", |v| v["expect"] = serde_json::json!([]));
    assert_eq!(code(&smash(&["validate", &p])), 0);
}

#[test]
fn both_strategies_reach_the_same_transitions() {
    for s in ["bfs", "gbfs"] {
        let o = smash(&["validate", "smash_poc", "--strategy", s]);
        assert_eq!(code(&o), 0, "{s}: {}", stdout(&o));
    }
    let outcomes = |s: &str| -> Vec<Value> {
        trace_lines(&stdout(&smash(&["run", "smash_poc", "--strategy", s])))
            .iter()
            .flat_map(|t| t["outcomes"].as_array().unwrap().iter().map(|o| o["outcome"].clone()).collect::<Vec<_>>())
            .collect()
    };
    assert_eq!(outcomes("bfs"), outcomes("gbfs"));
}

#[test]
fn runs_are_reproducible() {
    let strip = |text: String| -> Vec<Value> {
        trace_lines(&text)
            .into_iter()
            .map(|mut t| {
                t.as_object_mut().unwrap().remove("timings");
                t
            })
            .collect()
    };
    let a = strip(stdout(&smash(&["run", "smash_poc", "--seed", "9"])));
    let b = strip(stdout(&smash(&["run", "smash_poc", "--seed", "9"])));
    assert!(!a.is_empty());
    assert_eq!(a, b);
}

#[test]
fn trace_and_pddl_files_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("trace.jsonl");
    let pddl = dir.path().join("pddl");
    let o = smash(&["run", "smash_poc", "--out", out.to_str().unwrap(), "--pddl-out", pddl.to_str().unwrap()]);
    assert_eq!(code(&o), 0);
    assert!(o.stdout.is_empty());
    let traces = trace_lines(&fs::read_to_string(&out).unwrap());
    assert_eq!(traces.len(), 6);
    for (i, t) in traces.iter().enumerate() {
        assert_eq!(t["cycle"].as_u64(), Some(i as u64 + 1));
    }
    let names: Vec<String> = fs::read_dir(&pddl)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    assert!(!names.is_empty());
    for n in &names {
        assert!(n.ends_with(".pddl"));
        let twin = if let Some(rest) = n.strip_prefix("domain_") {
            format!("problem_{rest}")
        } else {
            format!("domain_{}", n.strip_prefix("problem_").expect("domain_ or problem_ prefix"))
        };
        assert!(names.contains(&twin), "{n} has no pair");
    }
}

#[test]
fn tcp_bus_flag_is_accepted() {
    let o = smash(&["run", "smash_poc", "--bus", "tcp:0"]);
    assert_eq!(code(&o), 0);
    assert_eq!(trace_lines(&stdout(&o)).len(), 6);
    assert_eq!(code(&smash(&["run", "smash_poc", "--bus", "carrier-pigeon"])), 2);
}

#[test]
fn bench_prints_a_table() {
    let o = smash(&["bench", "smash_poc", "-n", "2"]);
    assert_eq!(code(&o), 0);
    assert!(stdout(&o).lines().count() >= 3, "{}", stdout(&o));
}

#[test]
fn schema_is_json() {
    let o = smash(&["schema"]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert!(v["properties"]["values"].is_object());
}
