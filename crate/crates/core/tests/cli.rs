use std::path::Path;
use std::process::Command;

use sparse_weights::cli::{run, EXIT_CONFIG, EXIT_FAIL, EXIT_PASS};
use sparse_weights::selftest::{run_cases, table, Case, CASES};

fn call(args: &[&str]) -> (i32, String, String) {
    let mut out = Vec::new();
    let mut err = Vec::new();
    let argv = std::iter::once("sparse-weights").chain(args.iter().copied());
    let code = run(argv, &mut out, &mut err);
    (
        code,
        String::from_utf8(out).unwrap(),
        String::from_utf8(err).unwrap(),
    )
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_str().unwrap().to_string()
}

const SMALL_SUITE: &str = r#"{
  "seed": 7,
  "suite": [
    {"check": "rescale_identity", "trials": 5, "resolution": 5},
    {"check": "sparse_carleson", "trials": 5, "max_resolution": 6},
    {"check": "bucket_reconstruction", "trials": 3}
  ]
}"#;

#[test]
fn missing_config_is_a_configuration_error() {
    let (code, _, err) = call(&["check-theorem", "--config", "/nonexistent/suite.json"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("/nonexistent/suite.json"), "{err}");
}

#[test]
fn schema_errors_name_the_offending_field() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "bad.json",
        r#"{"seed": 1, "suite": [{"check": "rescale_identity", "trails": 3}]}"#,
    );
    let (code, _, err) = call(&["check-theorem", "--config", &cfg]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(err.contains("suite[0]"), "{err}");
    assert!(err.contains("trails"), "{err}");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let (code, _, err) = call(&["selftest", "--frobnicate"]);
    assert_eq!(code, EXIT_CONFIG);
    assert!(!err.is_empty());
}

#[test]
fn help_lists_the_global_flags() {
    let (code, out, _) = call(&["--help"]);
    assert_eq!(code, EXIT_PASS);
    for flag in ["--resolution", "--seed", "--config", "--output", "--format"] {
        assert!(out.contains(flag), "missing {flag} in\n{out}");
    }
    for cmd in [
        "constants",
        "eval",
        "check-theorem",
        "decompose",
        "search",
        "selftest",
    ] {
        assert!(out.contains(cmd), "missing {cmd}");
    }
}

#[test]
fn constants_of_simple_weights() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "c.json",
        r#"{"resolution": 4, "weight": {"kind": "power", "alpha": 0.0}}"#,
    );
    let (code, out, _) = call(&["constants", "--config", &cfg]);
    assert_eq!(code, EXIT_PASS);
    let lines: Vec<&str> = out.lines().collect();
    assert_eq!(lines[0], "constant,value,level,index");
    for l in &lines[1..] {
        let v: f64 = l.split(',').nth(1).unwrap().parse().unwrap();
        assert!((v - 1.0).abs() < 1e-15, "{l}");
    }

    let cfg = write(
        dir.path(),
        "d.json",
        r#"{"weight": {"kind": "cells", "values": [1, 3]}}"#,
    );
    let (code, out, _) = call(&["constants", "--config", &cfg]);
    assert_eq!(code, EXIT_PASS);
    let row = out.lines().find(|l| l.starts_with("A_inf(w)")).unwrap();
    assert_eq!(row, "A_inf(w),1.2500000000000000e0,0,0");
}

#[test]
fn built_in_suite_passes_and_is_reproducible() {
    let (code, first, err) = call(&["check-theorem"]);
    assert_eq!(code, EXIT_PASS, "{err}\n{}", failing_rows(&first));
    let (_, second, _) = call(&["check-theorem"]);
    assert_eq!(first, second);
    let header = first.lines().next().unwrap();
    assert!(header.starts_with("trial,check,resolution,m,p,p0,gamma"));
}

fn failing_rows(csv: &str) -> String {
    csv.lines()
        .filter(|l| l.contains(",false,"))
        .collect::<Vec<_>>()
        .join("\n")
}

#[test]
fn impossible_constant_fails_with_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "s.json",
        r#"{
          "seed": 3,
          "constants": {"tolerance": 0.05, "theorem": {"m2/p_le_gamma": 0.0}, "maximal": {}},
          "suite": [{"check": "theorem_ratio", "resolution": 4, "instances": [
            {"family": {"kind": "root"},
             "functions": [{"kind": "power", "alpha": 0.0}, {"kind": "power", "alpha": 0.0}],
             "sigmas": [{"kind": "power", "alpha": 0.0}, {"kind": "power", "alpha": 0.0}],
             "exponents": {"p": [2.0, 2.0], "p0": 1.0, "gamma": 1.0}}
          ]}]
        }"#,
    );
    let (code, out, _) = call(&["check-theorem", "--config", &cfg]);
    assert_eq!(code, EXIT_FAIL, "{out}");
    assert!(out.lines().nth(1).unwrap().contains(",false,"));
}

#[test]
fn json_and_csv_carry_the_same_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", SMALL_SUITE);
    let (_, csv, _) = call(&["check-theorem", "--config", &cfg]);
    let (code, json, _) = call(&["check-theorem", "--config", &cfg, "--format", "json"]);
    assert_eq!(code, EXIT_PASS);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    let rows = v.as_array().unwrap();
    let records: Vec<csv::StringRecord> = csv::Reader::from_reader(csv.as_bytes())
        .records()
        .collect::<Result<_, _>>()
        .unwrap();
    assert_eq!(rows.len(), records.len());
    for (row, rec) in rows.iter().zip(&records) {
        assert_eq!(row["check"].as_str().unwrap(), &rec[1]);
        assert_eq!(row["weight_params"].as_str().unwrap(), &rec[7]);
        assert_eq!(row["seed"].as_u64().unwrap().to_string(), &rec[8]);
        assert_eq!(row["pass"].as_bool().unwrap().to_string(), &rec[17]);
        if let Some(x) = row["lhs"].as_f64() {
            let y: f64 = rec[9].parse().unwrap();
            // serde_json's default float parser may be off by an ulp.
            assert!((x - y).abs() <= 4.0 * f64::EPSILON * y.abs(), "{x} vs {y}");
        }
    }
}

#[test]
fn seed_flag_changes_sampled_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", SMALL_SUITE);
    let (_, a, _) = call(&["check-theorem", "--config", &cfg]);
    let (_, b, _) = call(&["check-theorem", "--config", &cfg, "--seed", "8"]);
    assert_ne!(a, b);
}

#[test]
fn empty_suite_gives_header_only() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "e.json", r#"{"seed": 1, "suite": []}"#);
    let out_path = dir.path().join("r.csv");
    let (code, out, _) = call(&[
        "check-theorem",
        "--config",
        &cfg,
        "--output",
        out_path.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_PASS);
    assert!(out.is_empty());
    let text = std::fs::read_to_string(out_path).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn eval_reports_theorem_and_maximal_rows() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "i.json",
        r#"{"resolution": 6, "instance": {
            "family": {"kind": "random", "seed": 4},
            "functions": [{"kind": "indicator", "k": 3}, {"kind": "power", "alpha": -0.3}],
            "sigmas": [{"kind": "power", "alpha": 0.5}, {"kind": "power", "alpha": -0.4}],
            "exponents": {"p": [2.0, 3.0], "p0": 1.0, "gamma": 1.0}}}"#,
    );
    let (code, out, err) = call(&["eval", "--config", &cfg]);
    assert!(code == EXIT_PASS || code == EXIT_FAIL, "{err}");
    let checks: Vec<&str> = out
        .lines()
        .skip(1)
        .map(|l| l.split(',').nth(1).unwrap())
        .collect();
    assert_eq!(checks, ["theorem_ratio", "maximal_ratio"]);
}

#[test]
fn decompose_writes_its_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(
        dir.path(),
        "i.json",
        r#"{"resolution": 7, "instance": {
            "family": {"kind": "random", "seed": 9},
            "functions": [{"kind": "random", "seed": 1, "logrange": 2.0}, {"kind": "random", "seed": 2, "logrange": 2.0}],
            "sigmas": [{"kind": "power", "alpha": 0.7}, {"kind": "power", "alpha": -0.5}],
            "exponents": {"p": [2.0, 4.0], "p0": 1.0, "gamma": 1.0}}}"#,
    );
    let out_dir = dir.path().join("dec");
    let (code, _, err) = call(&[
        "decompose",
        "--config",
        &cfg,
        "--output",
        out_dir.to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_PASS, "{err}");
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("summary.json")).unwrap())
            .unwrap();
    assert!(out_dir.join("null_bucket.txt").exists());
    let buckets = summary["buckets"].as_array().unwrap();
    assert!(!buckets.is_empty());
    let mut total = summary["null_bucket"].as_u64().unwrap();
    for b in buckets {
        let a = b["a"].as_i64().unwrap();
        assert!(out_dir.join(format!("bucket_{a}.txt")).exists());
        assert!(out_dir.join(format!("forest_{a}_1.txt")).exists());
        assert!(out_dir.join(format!("forest_{a}_2.txt")).exists());
        for f in b["forests"].as_array().unwrap() {
            if let Some(r) = f["carleson_ratio"].as_f64() {
                assert!(r <= f["carleson_bound"].as_f64().unwrap());
            }
        }
        total += b["cubes"].as_u64().unwrap();
    }
    assert_eq!(total, summary["family_size"].as_u64().unwrap());
}

#[test]
fn selftest_passes() {
    let (code, out, _) = call(&["selftest"]);
    assert_eq!(code, EXIT_PASS, "{out}");
    assert_eq!(
        out.lines().filter(|l| l.ends_with(" pass")).count(),
        CASES.len()
    );
}

fn broken() -> Result<(), String> {
    Err("deliberately wrong".into())
}

fn panicking() -> Result<(), String> {
    panic!("boom")
}

#[test]
fn tampered_selftest_case_is_named() {
    let mut cases: Vec<Case> = CASES
        .iter()
        .take(2)
        .map(|c| Case {
            name: c.name,
            run: c.run,
        })
        .collect();
    cases.push(Case {
        name: "tampered/value",
        run: broken,
    });
    cases.push(Case {
        name: "tampered/panic",
        run: panicking,
    });
    let results = run_cases(&cases);
    assert!(results[..2].iter().all(|r| r.pass));
    assert!(!results[2].pass && !results[3].pass);
    let t = table(&results);
    assert!(
        t.contains("tampered/value") && t.contains("deliberately wrong"),
        "{t}"
    );
    assert!(t.contains("tampered/panic"));
}

#[test]
fn binary_exit_codes() {
    let bin = env!("CARGO_BIN_EXE_sparse-weights");
    let status = Command::new(bin)
        .args(["check-theorem", "--config", "/nonexistent.json"])
        .output()
        .unwrap();
    assert_eq!(status.status.code(), Some(EXIT_CONFIG));
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "s.json", SMALL_SUITE);
    let a = Command::new(bin)
        .args(["check-theorem", "--config", &cfg])
        .output()
        .unwrap();
    let b = Command::new(bin)
        .args(["check-theorem", "--config", &cfg])
        .output()
        .unwrap();
    assert_eq!(a.status.code(), Some(EXIT_PASS));
    assert_eq!(a.stdout, b.stdout);
}
