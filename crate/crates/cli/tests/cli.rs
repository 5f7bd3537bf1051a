use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use mvsao_cli::config::Kind;
use mvsao_cli::output::sha256_hex;
use mvsao_cli::{resolve, Overrides, RunConfig, CSV_COLUMNS};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mvsao"))
}

fn example(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs").join(name)
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

const SMALL: &str = r#"{
  "seed": 5,
  "model": {
    "domain": { "type": "interval", "theta": 1.0 },
    "colors": 2,
    "field": "quaternion",
    "potential": { "type": "zero" },
    "boundary": { "type": "neumann" },
    "sigma2": 0.25,
    "upsilon2": 0.5
  },
  "t": [0.5, 0.25],
  "noise": { "type": "smooth", "eps": 0.1, "zeta": 0.1 },
  "paths": 600
}"#;

fn parse_err(text: &str) -> String {
    match RunConfig::parse(text).and_then(|c| resolve(c, Kind::Trace, Overrides::default())) {
        Ok(_) => panic!("accepted: {text}"),
        Err(e) => e.to_string(),
    }
}

fn without(key: &str) -> String {
    let mut v: serde_json::Value = serde_json::from_str(SMALL).unwrap();
    let (outer, inner) = key.split_once('.').map_or((key, None), |(a, b)| (a, Some(b)));
    match inner {
        None => v.as_object_mut().unwrap().remove(outer),
        Some(k) => v[outer].as_object_mut().unwrap().remove(k),
    };
    v.to_string()
}

#[test]
fn small_config_resolves() {
    let run = resolve(RunConfig::parse(SMALL).unwrap(), Kind::Trace, Overrides::default()).unwrap();
    assert_eq!(run.workers, 1);
    assert_eq!(run.config.seed, 5);
}

#[test]
fn unknown_keys_are_named() {
    let text = SMALL.replace("\"paths\"", "\"pathz\"");
    assert!(parse_err(&text).contains("pathz"));
    let text = SMALL.replace("\"sigma2\"", "\"sigma\"");
    assert!(parse_err(&text).contains("sigma"));
}

#[test]
fn required_keys_have_no_defaults() {
    for key in ["seed", "t", "noise", "paths", "model.sigma2", "model.upsilon2"] {
        let leaf = key.rsplit('.').next().unwrap();
        let msg = parse_err(&without(key));
        assert!(msg.contains(leaf), "{key}: {msg}");
    }
}

#[test]
fn more_than_four_times_rejected() {
    let text = SMALL.replace("[0.5, 0.25]", "[0.5, 0.5, 0.5, 0.5, 0.5]");
    assert!(parse_err(&text).contains("`t`"));
}

#[test]
fn kind_must_match_subcommand() {
    let text = SMALL.replacen('{', "{\"kind\": \"oracle\",", 1);
    assert!(parse_err(&text).contains("oracle"));
}

#[test]
fn csv_output_is_byte_identical_across_runs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, SMALL).unwrap();
    let mut outs = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let o = run(&["trace", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--workers", "2"]);
        assert!(o.status.success(), "{}", stderr(&o));
        outs.push(std::fs::read(&out).unwrap());
    }
    assert_eq!(outs[0], outs[1]);
    let text = String::from_utf8(outs.pop().unwrap()).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next().unwrap(), CSV_COLUMNS.join(","));
    for line in lines {
        let cells: Vec<&str> = line.split(',').collect();
        assert_eq!(cells.len(), CSV_COLUMNS.len());
        assert_eq!(cells[1], "trace");
        assert_eq!(cells[10], "5");
        assert!(cells[12].is_empty());
    }
}

#[test]
fn worker_count_does_not_change_results() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, SMALL).unwrap();
    let one = run(&["moment", "--config", cfg.to_str().unwrap(), "--workers", "1"]);
    let three = run(&["moment", "--config", cfg.to_str().unwrap(), "--workers", "3"]);
    assert!(one.status.success(), "{}", stderr(&one));
    assert_eq!(one.stdout, three.stdout);
}

#[test]
fn appending_keeps_a_single_header_and_archives_the_config() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, SMALL).unwrap();
    let out = dir.path().join("r.csv");
    for seed in ["5", "6"] {
        let o = run(&["trace", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap(), "--seed", seed]);
        assert!(o.status.success(), "{}", stderr(&o));
    }
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().count(), 5);
    assert_eq!(text.matches("experiment_id").count(), 1);
    let archive = dir.path().join("r.csv.configs");
    let mut hashes: Vec<String> = text.lines().skip(1).map(|l| l.split(',').nth(11).unwrap().to_owned()).collect();
    hashes.dedup();
    assert_eq!(hashes.len(), 2);
    for h in hashes {
        let stored = std::fs::read_to_string(archive.join(format!("{h}.json"))).unwrap();
        assert_eq!(sha256_hex(&stored), h);
    }
}

#[test]
fn json_lines_carry_diagnostics() {
    let o = run(&["trace", "--preset", "sao:complex:2", "--seed", "3", "--t", "1", "--paths", "300", "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["discard_rate"].is_number());
    assert!(v["max_weight_share"].is_number());
    assert!(v["wall_time"].is_null());
    assert_eq!(v["t"], serde_json::json!([1.0]));
}

#[test]
fn timing_is_opt_in() {
    let o = run(&["trace", "--preset", "sao", "--seed", "3", "--t", "1", "--paths", "100", "--format", "json", "--timing"]);
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert!(v["wall_time"].as_f64().unwrap() >= 0.0);
}

#[test]
fn dirichlet_example_matches_the_theta_series() {
    let o = run(&["trace", "--config", example("dirichlet_interval.json").to_str().unwrap(), "--format", "json"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    let series: f64 = (1..50).map(|k| (-((k * k) as f64) / 2.0).exp()).sum();
    let (est, se) = (v["estimate"].as_f64().unwrap(), v["stderr"].as_f64().unwrap());
    assert!((est - series).abs() < 4.0 * se, "{est} ± {se} vs {series}");
}

#[test]
fn oracle_archive_starts_with_magic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("o.json");
    std::fs::write(
        &cfg,
        r#"{"kind":"oracle","seed":1,"sao":{"field":"complex","colors":1},"t":[1.0],
            "noise":{"type":"smooth","eps":0.2,"zeta":0.2},"discretization":{"x_max":8.0},
            "oracle":{"grid":150,"draws":3}}"#,
    )
    .unwrap();
    let archive = dir.path().join("draws.bin");
    let o = run(&["oracle", "--config", cfg.to_str().unwrap(), "--archive", archive.to_str().unwrap()]);
    assert!(o.status.success(), "{}", stderr(&o));
    let bytes = std::fs::read(&archive).unwrap();
    assert_eq!(&bytes[..6], b"MVSAO1");
}

#[test]
fn bad_input_exits_nonzero_with_a_diagnostic() {
    let o = run(&["trace", "--preset", "sao", "--t", "1", "--paths", "10"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("seed"));
    let o = run(&["covariance", "--preset", "sao", "--seed", "1", "--t", "1", "--paths", "10"]);
    assert!(!o.status.success());
    assert!(stderr(&o).contains("two times"));
}

#[test]
fn selftest_passes() {
    let o = run(&["selftest"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(!String::from_utf8_lossy(&o.stdout).contains("FAIL"));
}
