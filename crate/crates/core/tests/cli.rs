use std::fs;
use std::path::Path;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_houseplan");
const FIXTURES: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures");

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn fixture(name: &str) -> String {
    format!("{FIXTURES}/{name}")
}

fn write_config(dir: &Path, body: &str) -> String {
    let p = dir.join("run.toml");
    fs::write(&p, body).unwrap();
    p.to_string_lossy().into_owned()
}

#[test]
fn help_and_version_exit_zero() {
    assert_eq!(run(&["--help"]).status.code(), Some(0));
    assert_eq!(run(&["--version"]).status.code(), Some(0));
}

#[test]
fn usage_errors_exit_one() {
    assert_eq!(run(&["frobnicate"]).status.code(), Some(1));
    assert_eq!(run(&["--config", "/nonexistent/run.toml", "plan"]).status.code(), Some(1));
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(run(&["--out", out, "tgpo-sim", "--steps", "0"]).status.code(), Some(1));
    assert_eq!(run(&["--out", out, "--jobs", "0", "tgpo-sim", "--steps", "1"]).status.code(), Some(1));
    // plan without a scene
    assert_eq!(run(&["--out", out, "plan"]).status.code(), Some(1));
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "seed = 1\nunexpected = true\n");
    let o = run(&["--config", &cfg, "tgpo-sim", "--steps", "1"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("unexpected"));
}

#[test]
fn plan_writes_listing_and_record() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "--out",
        out,
        "plan",
        "--scene",
        &fixture("home_scene.json"),
        "--output",
        &fixture("open_and_retrieve.policy"),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let plan = fs::read_to_string(dir.path().join("plan.txt")).unwrap();
    assert!(!plan.trim().is_empty());
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("plan_record.json")).unwrap()).unwrap();
    assert_eq!(record["status"], "solved");
    assert!(dir.path().join("plan_timing.json").exists());
}

#[test]
fn misaligned_output_is_a_domain_failure() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&[
        "--out",
        out,
        "plan",
        "--scene",
        &fixture("home_scene.json"),
        "--output",
        &fixture("misaligned.policy"),
    ]);
    assert_eq!(o.status.code(), Some(2));
    let record: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("plan_record.json")).unwrap()).unwrap();
    assert_eq!(record["status"], "error");
    assert_eq!(record["error"]["kind"], "misaligned_output");
}

#[test]
fn empty_manifest_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = dir.path().join("empty.toml");
    fs::write(&manifest, "# nothing here\n").unwrap();
    let out = dir.path().join("out");
    let o = run(&["--out", out.to_str().unwrap(), "eval", "--manifest", manifest.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn eval_summary_matches_records() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let o = run(&["--out", out, "eval", "--manifest", &fixture("eval_manifest.toml")]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let lines = fs::read_to_string(dir.path().join("eval.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> = lines.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    let summary: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("eval_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["tasks"].as_u64().unwrap() as usize, rows.len());
    let mean = rows.iter().map(|r| r["reward"].as_f64().unwrap()).sum::<f64>() / rows.len() as f64;
    assert!((summary["success_rate"].as_f64().unwrap() - mean).abs() < 1e-12);
}

#[test]
fn replay_without_cassette_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        &format!(
            "out = \"out\"\n[eval]\nmanifest = \"{}\"\n[reviewer]\nmode = \"replay\"\ncassette = \"missing.jsonl\"\n",
            fixture("eval_manifest.toml")
        ),
    );
    assert_eq!(run(&["--config", &cfg, "eval"]).status.code(), Some(1));
}

#[test]
fn replay_reproduces_recorded_eval() {
    let dir = tempfile::tempdir().unwrap();
    let manifest = fixture("eval_manifest.toml");
    let record_cfg = write_config(
        dir.path(),
        &format!("out = \"rec\"\n[eval]\nmanifest = \"{manifest}\"\n[reviewer]\nmode = \"record\"\ncassette = \"reviews.jsonl\"\n"),
    );
    assert_eq!(run(&["--config", &record_cfg, "eval"]).status.code(), Some(0));
    assert!(dir.path().join("reviews.jsonl").exists());

    let replay_cfg = write_config(
        dir.path(),
        &format!("out = \"rep\"\n[eval]\nmanifest = \"{manifest}\"\n[reviewer]\nmode = \"replay\"\ncassette = \"reviews.jsonl\"\n"),
    );
    let o = run(&["--config", &replay_cfg, "--jobs", "3", "eval"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["eval.jsonl", "eval_summary.json"] {
        assert_eq!(
            fs::read(dir.path().join("rec").join(name)).unwrap(),
            fs::read(dir.path().join("rep").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn synth_writes_annotations() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let o = run(&["--config", &fixture("run.toml"), "--out", out.to_str().unwrap(), "synth", "--tasks", "2"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    let ann = fs::read_to_string(out.join("annotations.jsonl")).unwrap();
    assert!(ann.lines().count() >= 1);
    for l in ann.lines() {
        let v: serde_json::Value = serde_json::from_str(l).unwrap();
        assert!(v["task"].is_u64());
        assert!(v["instruction"].is_string());
    }
}

fn synth_config(mode: &str, out: &str) -> String {
    let mut s = format!(
        "out = \"{out}\"\n[synth]\nscenes = [\"{}\"]\ntasks = 3\nbudget = 3\n",
        fixture("home_scene.json")
    );
    for role in ["reviewer", "generator", "annotator"] {
        s.push_str(&format!("[{role}]\nmode = \"{mode}\"\ncassette = \"{role}.jsonl\"\n"));
    }
    s
}

#[test]
fn synth_replay_reproduces_recorded_run() {
    let dir = tempfile::tempdir().unwrap();
    let rec = write_config(dir.path(), &synth_config("record", "rec"));
    let o = run(&["--config", &rec, "--seed", "11", "synth"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));

    let rep = write_config(dir.path(), &synth_config("replay", "rep"));
    let o = run(&["--config", &rep, "--seed", "11", "--jobs", "4", "synth"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    for name in ["annotations.jsonl", "synth_summary.json"] {
        assert_eq!(
            fs::read(dir.path().join("rec").join(name)).unwrap(),
            fs::read(dir.path().join("rep").join(name)).unwrap(),
            "{name}"
        );
    }
}

#[test]
fn synth_replay_without_cassette_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), &synth_config("replay", "out"));
    assert_eq!(run(&["--config", &cfg, "synth"]).status.code(), Some(1));
}
