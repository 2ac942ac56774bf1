use std::process::{Command, Output};

use serde_json::Value;

fn agentuq(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_agentuq"))
        .args(args)
        .env_remove("AGENTUQ_ENUM_CAP")
        .output()
        .expect("binary runs")
}

fn stdout_json(args: &[&str]) -> Value {
    let out = agentuq(args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    serde_json::from_slice(&out.stdout).expect("valid JSON")
}

fn csv_rows(out: &Output) -> Vec<Vec<String>> {
    String::from_utf8(out.stdout.clone())
        .unwrap()
        .lines()
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn report_to_file_respects_the_bounds() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("report.json");
    let out = agentuq(&[
        "report",
        "--builtin",
        "mini-booking",
        "--aggregators",
        "exact,gated",
        "--out",
        path.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    assert!(out.stdout.is_empty());
    let v: Value = serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    let r = &v["report"];
    let lower = r["lemma1"]["lower"].as_f64().unwrap();
    let upper = r["lemma1"]["upper"].as_f64().unwrap();
    let gated = r["totals"]["gated"].as_f64().unwrap();
    let exact = r["totals"]["exact"].as_f64().unwrap();
    assert!(lower <= gated && gated <= upper, "{lower} {gated} {upper}");
    assert!((exact - upper).abs() < 1e-12);
    // one direction flag per turn
    let turns = r["turns"].as_array().unwrap();
    assert_eq!(turns.len(), 2);
    assert_eq!(turns[0]["direction"], "mixed");
    assert_eq!(turns[1]["direction"], "propagate");
}

#[test]
fn deterministic_builtin_reports_zero_everywhere() {
    let v = stdout_json(&["report", "--builtin", "deterministic"]);
    let totals = v["report"]["totals"].as_object().unwrap();
    assert!(!totals.is_empty());
    for (k, t) in totals {
        assert_eq!(t.as_f64(), Some(0.0), "{k}");
    }
}

#[test]
fn missing_scenario_file_exits_2() {
    let out = agentuq(&["report", "--scenario", "/definitely/not/here.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert!(stderr(&out).starts_with("error[E_IO]"));
}

#[test]
fn config_errors_exit_2() {
    let cases: [&[&str]; 6] = [
        &["report"],
        &["report", "--builtin", "no-such-thing"],
        &[
            "report",
            "--builtin",
            "mini-booking",
            "--mode",
            "sampled",
            "--samples",
            "100",
        ],
        &["report", "--builtin", "mini-booking", "--horizon", "9"],
        &[
            "report",
            "--builtin",
            "mini-booking",
            "--measure",
            "renyi:2",
            "--aggregators",
            "gated",
        ],
        &["report", "--builtin", "mini-booking", "--aggregators", "median"],
    ];
    for args in cases {
        let out = agentuq(args);
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", stderr(&out));
        assert!(stderr(&out).starts_with("error[E_"), "{args:?}");
    }
}

#[test]
fn malformed_scenario_names_the_row() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "schema_version = 1\nname = 3\n").unwrap();
    let out = agentuq(&["validate", "--scenario", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn enumeration_cap_exits_3() {
    let out = Command::new(env!("CARGO_BIN_EXE_agentuq"))
        .args(["enumerate", "--builtin", "mini-booking"])
        .env("AGENTUQ_ENUM_CAP", "3")
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(3));
    assert!(stderr(&out).starts_with("error[E_ENUM_CAP]"));
}

#[test]
fn enumerate_probabilities_sum_to_one() {
    let v = stdout_json(&["enumerate", "--builtin", "uniform-2turn"]);
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 16);
    let total: f64 = rows.iter().map(|r| r["probability"].as_f64().unwrap()).sum();
    assert!((total - 1.0).abs() < 1e-12);
    for r in rows {
        let p = r["probability"].as_f64().unwrap();
        assert!((r["log_prob"].as_f64().unwrap() - p.ln()).abs() < 1e-12);
    }
}

#[test]
fn sample_needs_seed_and_count() {
    assert_eq!(
        agentuq(&["sample", "--builtin", "mini-booking", "--samples", "5"])
            .status
            .code(),
        Some(2)
    );
    let v = stdout_json(&["sample", "--builtin", "mini-booking", "--samples", "5", "--seed", "3"]);
    assert_eq!(v.as_array().unwrap().len(), 5);
}

#[test]
fn outputs_are_byte_identical_across_runs() {
    let cases: [&[&str]; 4] = [
        &[
            "report",
            "--builtin",
            "mini-booking",
            "--mode",
            "sampled",
            "--samples",
            "500",
            "--seed",
            "11",
        ],
        &["report", "--builtin", "uniform-2turn", "--format", "csv"],
        &[
            "sample",
            "--builtin",
            "mini-booking",
            "--samples",
            "50",
            "--seed",
            "2",
            "--format",
            "csv",
        ],
        &[
            "check",
            "--systems",
            "40",
            "--mode",
            "sampled",
            "--samples",
            "10000",
            "--seed",
            "5",
        ],
    ];
    for args in cases {
        let a = agentuq(args);
        let b = agentuq(args);
        assert!(a.status.success(), "{args:?}: {}", stderr(&a));
        assert_eq!(a.stdout, b.stdout, "{args:?}");
    }
}

/// Recomputes every derived field of an emitted report from its
/// primitive fields, in the same order of operations.
fn assert_derived_fields_reproduce(r: &Value) {
    let f = |v: &Value| v.as_f64().unwrap();
    let init = &r["initial"];
    assert_eq!(
        f(&init["total"]),
        f(&init["task_volatility"]) + f(&init["query_uncertainty"])
    );
    let mut terms = Vec::new();
    let mut signed = Vec::new();
    for t in r["turns"].as_array().unwrap() {
        let gain = t["info_gain"].as_f64().unwrap_or(0.0);
        let s = f(&t["propagated"]) - gain;
        assert_eq!(f(&t["signed_contribution"]), s);
        if let Some(g) = t["gate_value"].as_f64() {
            assert_eq!(g, s / f(&t["action_term"]));
        }
        terms.push(f(&t["action_term"]) + f(&t["observation_term"]));
        signed.push(s);
    }
    let total = f(&init["total"]);
    assert_eq!(f(&r["totals"]["exact"]), total + terms.iter().sum::<f64>());
    assert_eq!(f(&r["totals"]["gated"]), total + signed.iter().sum::<f64>());
}

#[test]
fn json_report_round_trips_exactly() {
    for units in ["nats", "bits"] {
        let v = stdout_json(&["report", "--builtin", "mini-booking", "--units", units]);
        assert_derived_fields_reproduce(&v["report"]);
        let reparsed: Value = serde_json::from_str(&serde_json::to_string(&v).unwrap()).unwrap();
        assert_eq!(reparsed, v);
    }
}

#[test]
fn csv_report_agrees_with_json() {
    let v = stdout_json(&["report", "--builtin", "mini-booking"]);
    let out = agentuq(&["report", "--builtin", "mini-booking", "--format", "csv"]);
    let rows = csv_rows(&out);
    let get = |kind: &str, name: &str| -> f64 {
        rows.iter()
            .find(|r| r[0] == kind && r[1] == name)
            .unwrap_or_else(|| panic!("{kind}/{name} missing"))[3]
            .parse()
            .unwrap()
    };
    let r = &v["report"];
    assert_eq!(get("total", "exact"), r["totals"]["exact"].as_f64().unwrap());
    assert_eq!(get("total", "gated"), r["totals"]["gated"].as_f64().unwrap());
    assert_eq!(get("lemma1", "lower"), r["lemma1"]["lower"].as_f64().unwrap());
    assert_eq!(get("initial", "total"), r["initial"]["total"].as_f64().unwrap());
}

#[test]
fn bits_are_nats_over_ln2() {
    let nats = stdout_json(&["report", "--builtin", "uniform-2turn"]);
    let bits = stdout_json(&["report", "--builtin", "uniform-2turn", "--units", "bits"]);
    let n = nats["report"]["totals"]["exact"].as_f64().unwrap();
    let b = bits["report"]["totals"]["exact"].as_f64().unwrap();
    assert!((n - 4.0 * std::f64::consts::LN_2).abs() < 1e-12);
    assert!((b - 4.0).abs() < 1e-12);
}

#[test]
fn default_check_passes() {
    let out = agentuq(&["check", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stdout));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("bounds,PASS,\"1000 systems"));
}

#[test]
fn corrupted_gate_fails_the_check_and_lists_seeds() {
    let out = agentuq(&["check", "--systems", "30", "--corrupt-gate", "--format", "csv"]);
    assert_eq!(out.status.code(), Some(4));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("bounds,FAIL"));
    assert!(text.contains("seed "));
}

#[test]
fn renyi_sweep_is_non_increasing() {
    let out = agentuq(&[
        "sweep",
        "--parameter",
        "alpha",
        "--grid",
        "0.5,2,8",
        "--dist",
        "0.6,0.3,0.1",
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let values: Vec<f64> = csv_rows(&out).iter().map(|r| r[1].parse().unwrap()).collect();
    assert_eq!(values.len(), 3);
    assert!(values.windows(2).all(|w| w[1] <= w[0]), "{values:?}");
}

#[test]
fn tsallis_sweep_approaches_shannon() {
    let out = agentuq(&[
        "sweep",
        "--parameter",
        "q",
        "--grid",
        "0.9,0.99,0.999,1.001",
        "--dist",
        "0.6,0.3,0.1",
        "--format",
        "csv",
    ]);
    assert!(out.status.success(), "{}", stderr(&out));
    let rows = csv_rows(&out);
    let gaps: Vec<f64> = rows
        .iter()
        .map(|r| (r[1].parse::<f64>().unwrap() - r[2].parse::<f64>().unwrap()).abs())
        .collect();
    assert!(gaps[0] > gaps[1] && gaps[1] > gaps[2], "{gaps:?}");
    assert!(gaps[2] < 1e-3 && gaps[3] < 1e-3, "{gaps:?}");
}

#[test]
fn sweep_domain_errors_exit_2() {
    let cases: [&[&str]; 4] = [
        &["sweep", "--parameter", "alpha", "--grid", "--dist", "0.5,0.5"],
        &["sweep", "--parameter", "alpha", "--dist", "0.5,0.5"],
        &["sweep", "--parameter", "alpha", "--grid", "1", "--dist", "0.5,0.5"],
        &["sweep", "--parameter", "alpha", "--grid", "-1", "--dist", "0.5,0.5"],
    ];
    for args in cases {
        assert_eq!(agentuq(args).status.code(), Some(2), "{args:?}");
    }
}

#[test]
fn scenario_sweep_has_one_row_per_grid_point() {
    let v = stdout_json(&[
        "sweep",
        "--parameter",
        "alpha",
        "--grid",
        "0.5,2",
        "--builtin",
        "mini-booking",
    ]);
    let rows = v.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows[0]["sum"].as_f64().unwrap() >= rows[1]["sum"].as_f64().unwrap());
}

#[test]
fn validate_summarizes_the_builtin() {
    let v = stdout_json(&["validate", "--builtin", "uniform-2turn"]);
    assert_eq!(v["trajectories"], "16");
    assert_eq!(v["max_turns"], 2);
}
