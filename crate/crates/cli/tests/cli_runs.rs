//! End-to-end runs of the `hoi` binary: output contracts, exit codes,
//! determinism, and agreement with the shipped report schema.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn hoi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hoi"))
        .args(args)
        .output()
        .expect("spawning hoi")
}

fn stdout_of(output: &Output) -> String {
    assert!(
        output.status.success(),
        "exit {:?}\nstderr: {}",
        output.status.code(),
        String::from_utf8_lossy(&output.stderr)
    );
    String::from_utf8(output.stdout.clone()).unwrap()
}

fn synth_to(dir: &Path, name: &str, args: &[&str]) -> PathBuf {
    let path = dir.join(name);
    let mut full: Vec<&str> = vec!["synth"];
    full.extend_from_slice(args);
    let path_str = path.to_str().unwrap().to_string();
    full.extend_from_slice(&["--output", &path_str]);
    let out = hoi(&full);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    path
}

#[test]
fn test_report_is_json_with_config_echo_and_schema_fields() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_to(dir.path(), "null.csv", &["--generator", "null", "--n", "40", "--d", "3", "--seed", "11"]);
    let out = hoi(&[
        "test",
        "--input",
        csv.to_str().unwrap(),
        "--kind",
        "lancaster",
        "--permutations",
        "60",
        "--seed",
        "2",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();

    let schema: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(concat!(
            env!("CARGO_MANIFEST_DIR"),
            "/../../schemas/test_report.schema.json"
        ))
        .unwrap(),
    )
    .unwrap();
    for key in schema["required"].as_array().unwrap() {
        assert!(doc.get(key.as_str().unwrap()).is_some(), "missing {key}");
    }
    let report = &doc["report"];
    for key in schema["properties"]["report"]["required"].as_array().unwrap() {
        assert!(
            !report.get(key.as_str().unwrap()).is_none(),
            "report missing {key}"
        );
    }

    assert_eq!(doc["config"]["kind"], "lancaster");
    assert_eq!(doc["config"]["permutations"], 60);
    assert_eq!(report["kind"], "lancaster");
    assert_eq!(report["d"], 3);
    assert_eq!(report["n"], 40);
    let subs = report["sub_results"].as_array().unwrap();
    assert_eq!(subs.len(), 3);
    for sr in subs {
        let p = sr["p_value"].as_f64().unwrap();
        assert!((1.0 / 61.0..=1.0).contains(&p), "{p}");
        let sub_schema = &schema["properties"]["report"]["properties"]["sub_results"]["items"];
        for key in sub_schema["required"].as_array().unwrap() {
            assert!(sr.get(key.as_str().unwrap()).is_some(), "sub_result missing {key}");
        }
    }
}

#[test]
fn variable_selection_restricts_the_test() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_to(dir.path(), "xor.csv", &["--generator", "xor", "--n", "30", "--proportion", "0.5", "--seed", "4"]);
    let out = hoi(&[
        "test",
        "--input",
        csv.to_str().unwrap(),
        "--variables",
        "z,v",
        "--kind",
        "joint",
        "--permutations",
        "40",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["report"]["d"], 2);
    assert_eq!(doc["config"]["variables"], serde_json::json!(["z", "v"]));

    let bad = hoi(&[
        "test",
        "--input",
        csv.to_str().unwrap(),
        "--variables",
        "nope",
    ]);
    assert_eq!(bad.status.code(), Some(3));
    let msg = String::from_utf8_lossy(&bad.stderr);
    assert!(msg.contains("nope") && msg.contains("v, w, x, y, z"), "{msg}");
}

#[test]
fn exit_codes_distinguish_usage_data_and_guard_errors() {
    // Usage: invalid level.
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_to(dir.path(), "n.csv", &["--generator", "null", "--n", "25", "--d", "2"]);
    let usage = hoi(&["test", "--input", csv.to_str().unwrap(), "--alpha", "1.5"]);
    assert_eq!(usage.status.code(), Some(2));

    // Data: missing input file.
    let data = hoi(&["test", "--input", "/nonexistent/never.csv"]);
    assert_eq!(data.status.code(), Some(3));

    // Guard: the full-lattice statistic refuses d beyond its bound.
    let wide = synth_to(dir.path(), "wide.csv", &["--generator", "null", "--n", "25", "--d", "9"]);
    let guard = hoi(&[
        "test",
        "--input",
        wide.to_str().unwrap(),
        "--kind",
        "streitberg",
        "--permutations",
        "20",
    ]);
    assert_eq!(guard.status.code(), Some(4), "{}", String::from_utf8_lossy(&guard.stderr));

    // Usage: unknown flag value enums.
    let unknown = hoi(&["test", "--input", csv.to_str().unwrap(), "--kind", "hsic"]);
    assert_eq!(unknown.status.code(), Some(2));
}

#[test]
fn power_rows_are_deterministic_and_worker_independent() {
    let dir = tempfile::tempdir().unwrap();
    let args_for = |workers: &str, out: &str| {
        vec![
            "power".to_string(),
            "--generator".into(),
            "xor".into(),
            "--sweep".into(),
            "proportion".into(),
            "--grid".into(),
            "0,1".into(),
            "--n".into(),
            "24".into(),
            "--trials".into(),
            "3".into(),
            "--permutations".into(),
            "30".into(),
            "--kinds".into(),
            "lancaster,dhsic".into(),
            "--seed".into(),
            "9".into(),
            "--workers".into(),
            workers.into(),
            "--output".into(),
            dir.path().join(out).to_str().unwrap().into(),
        ]
    };
    let run = |args: Vec<String>| {
        let refs: Vec<&str> = args.iter().map(|s| s.as_str()).collect();
        let out = hoi(&refs);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    };
    run(args_for("1", "a.csv"));
    run(args_for("4", "b.csv"));

    // Everything except wall time must agree exactly.
    let strip = |name: &str| -> Vec<Vec<String>> {
        let text = std::fs::read_to_string(dir.path().join(name)).unwrap();
        text.lines()
            .filter(|l| !l.starts_with('#'))
            .skip(1)
            .map(|l| l.split(',').take(5).map(str::to_string).collect())
            .collect()
    };
    let a = strip("a.csv");
    let b = strip("b.csv");
    assert_eq!(a, b);
    assert_eq!(a.len(), 4);
    for row in &a {
        let rate: f64 = row[2].parse().unwrap();
        assert!((0.0..=1.0).contains(&rate));
        assert_eq!(row[3], "3");
    }

    // The config echo names every knob that shaped the rows.
    let text = std::fs::read_to_string(dir.path().join("a.csv")).unwrap();
    let first = text.lines().next().unwrap();
    assert!(first.starts_with("# config: "));
    let echoed: serde_json::Value =
        serde_json::from_str(first.strip_prefix("# config: ").unwrap()).unwrap();
    assert_eq!(echoed["trials"], 3);
    assert_eq!(echoed["kinds"], serde_json::json!(["lancaster", "dhsic"]));
}

#[test]
fn config_file_fills_gaps_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let csv = synth_to(dir.path(), "d.csv", &["--generator", "null", "--n", "30", "--d", "2"]);
    let cfg = dir.path().join("run.toml");
    std::fs::write(&cfg, "permutations = 40\nalpha = 0.2\nseed = 6\n").unwrap();

    let out = hoi(&[
        "test",
        "--input",
        csv.to_str().unwrap(),
        "--config",
        cfg.to_str().unwrap(),
        "--alpha",
        "0.1",
    ]);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&out)).unwrap();
    assert_eq!(doc["report"]["alpha"], 0.1, "flag beats file");
    assert_eq!(doc["report"]["permutations"], 40, "file beats default");
    assert_eq!(doc["report"]["seed"], 6);

    let typo = dir.path().join("typo.toml");
    std::fs::write(&typo, "permutatons = 40\n").unwrap();
    let bad = hoi(&[
        "test",
        "--input",
        csv.to_str().unwrap(),
        "--config",
        typo.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn lattice_listing_counts_and_matrices() {
    let out = hoi(&["lattice", "--d", "5"]);
    let text = stdout_of(&out);
    assert!(text.contains("partitions (Bell) = 52"));
    assert!(text.contains("no-singleton partitions = 11"));
    assert!(text.contains("streitberg/modified-dhsic = 15, lancaster = 5, joint = 1"));

    let json_out = hoi(&["lattice", "--d", "4", "--matrices", "--format", "json"]);
    let doc: serde_json::Value = serde_json::from_str(&stdout_of(&json_out)).unwrap();
    assert_eq!(doc["partitions"], 15);
    assert_eq!(doc["no_singleton_partitions"], 4);
    assert_eq!(doc["sub_hypotheses"]["streitberg"], 7);
    let zeta = doc["zeta"].as_array().unwrap();
    assert_eq!(zeta.len(), 15);
    assert_eq!(zeta[0].as_array().unwrap().len(), 15);

    let too_big = hoi(&["lattice", "--d", "7", "--matrices"]);
    assert_eq!(too_big.status.code(), Some(2));
}

#[test]
fn bench_emits_timings_and_exponent_lines() {
    let out = hoi(&["bench", "--d", "2", "--n", "40,80"]);
    let text = stdout_of(&out);
    let rows: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 1 + 6, "header plus three statistics x two sizes");
    assert!(text.contains("# exponent statistic=streitberg variant=optimized d=2"));

    let guard = hoi(&["bench", "--d", "9", "--n", "40"]);
    assert_eq!(guard.status.code(), Some(2));
}
