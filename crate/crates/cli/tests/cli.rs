//! End-to-end tests of the command-line interface: exit codes, artifact
//! schemas, and byte-level reproducibility.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_ruintail"))
}

fn write_config(dir: &Path, name: &str, value: &Value) -> PathBuf {
    let path = dir.join(name);
    fs::write(&path, serde_json::to_vec_pretty(value).unwrap()).unwrap();
    path
}

fn run(args: &[&str]) -> Output {
    bin().args(args).output().expect("binary runs")
}

fn pareto21() -> Value {
    json!({"family": "pareto", "params": {"alpha": 2.0, "xm": 1.0}})
}

fn two_point_12() -> Value {
    json!({"family": "discrete_finite", "params": {"atoms": [[1.0, 0.5], [2.0, 0.5]]}})
}

fn example_product_config(out: &Path) -> Value {
    json!({
        "loss": pareto21(),
        "discount": two_point_12(),
        "model": {"kind": "fgm", "theta": 0.5},
        "x_grid": {"values": [4.0, 10.0]},
        "seed": 99,
        "with_exact_two_point": true,
        "out": out.to_str().unwrap(),
    })
}

/// Data rows of a CSV artifact: everything after the comment block and
/// the column header.
fn data_rows(path: &Path) -> Vec<Vec<String>> {
    let text = fs::read_to_string(path).unwrap();
    text.lines()
        .filter(|l| !l.starts_with('#'))
        .skip(1)
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn product_tail_example_csv_values() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tail.csv");
    let cfg = write_config(dir.path(), "cfg.json", &example_product_config(&out));
    let res = run(&["product-tail", "--config", cfg.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let rows = data_rows(&out);
    assert_eq!(rows.len(), 2);
    let row10 = &rows[1];
    assert_eq!(row10[0], "10");
    let asym: f64 = row10[1].parse().unwrap();
    let exact: f64 = row10[4].parse().unwrap();
    assert!((asym - 0.02875).abs() < 1e-12);
    assert!((exact - 0.0285625).abs() < 1e-12);
    // Header block carries the reproducibility metadata.
    let text = fs::read_to_string(&out).unwrap();
    assert!(text.starts_with("# tool: ruintail "));
    assert!(text.contains("# config_sha256: "));
    assert!(text.contains("# seed: 99"));
}

#[test]
fn product_tail_missing_seed_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tail.csv");
    let mut cfg_value = example_product_config(&out);
    cfg_value.as_object_mut().unwrap().remove("seed");
    let cfg = write_config(dir.path(), "cfg.json", &cfg_value);
    let res = run(&["product-tail", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(!out.exists());
}

#[test]
fn product_tail_theta_zero_exact_equals_integral() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tail.csv");
    let cfg_value = json!({
        "loss": pareto21(),
        "discount": two_point_12(),
        "model": {"kind": "fgm", "theta": 0.0},
        "x_grid": {"from": 4.0, "to": 64.0, "points": 7},
        "seed": 5,
        "with_exact_two_point": true,
        "out": out.to_str().unwrap(),
    });
    let cfg = write_config(dir.path(), "cfg.json", &cfg_value);
    let res = run(&["product-tail", "--config", cfg.to_str().unwrap()]);
    assert!(res.status.success());
    for row in data_rows(&out) {
        let asym: f64 = row[1].parse().unwrap();
        let exact: f64 = row[4].parse().unwrap();
        assert!((asym - exact).abs() <= 1e-15, "{asym} vs {exact}");
    }
}

fn ruin_config(out: &Path, chunks: u32) -> Value {
    json!({
        "loss": {"family": "pareto", "params": {"alpha": 2.0, "xm": 1.0}, "shift": -1.0},
        "discount": {"family": "discrete_finite", "params": {"atoms": [[0.5, 0.5], [0.9, 0.5]]}},
        "model": {"kind": "fgm", "theta": 0.5},
        "horizon": 3,
        "x_grid": {"values": [2.0, 8.0, 32.0]},
        "paths": 50000,
        "chunks": chunks,
        "seed": 2024,
        "out": out.to_str().unwrap(),
    })
}

#[test]
fn ruin_outputs_are_byte_identical_across_reruns_and_chunks() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ruin.csv");
    let cfg = write_config(dir.path(), "cfg.json", &ruin_config(&out, 1));

    let res = run(&["ruin", "--config", cfg.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let first_csv = fs::read(&out).unwrap();
    let first_json = fs::read(out.with_extension("json")).unwrap();

    // Re-run with the identical config.
    let res = run(&["ruin", "--config", cfg.to_str().unwrap()]);
    assert!(res.status.success());
    assert_eq!(fs::read(&out).unwrap(), first_csv);
    assert_eq!(fs::read(out.with_extension("json")).unwrap(), first_json);

    // Same config, different parallel batching: still byte-identical.
    for chunks in ["4", "8"] {
        let res = run(&["ruin", "--config", cfg.to_str().unwrap(), "--chunks", chunks]);
        assert!(res.status.success());
        assert_eq!(
            fs::read(&out).unwrap(),
            first_csv,
            "chunks={chunks} changed the artifact"
        );
    }
}

#[test]
fn ruin_summary_reports_triggers_and_coverage() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ruin.csv");
    let cfg = write_config(dir.path(), "cfg.json", &ruin_config(&out, 4));
    let res = run(&["ruin", "--config", cfg.to_str().unwrap()]);
    assert!(res.status.success());
    let summary: Value =
        serde_json::from_slice(&fs::read(out.with_extension("json")).unwrap()).unwrap();
    let rows = summary["rows"].as_array().unwrap();
    assert_eq!(rows.len(), 3);
    for row in rows {
        let hist = row["trigger_histogram"].as_array().unwrap();
        assert_eq!(hist.len(), 3);
        assert!(row["ci_covers_asym_sum"].is_boolean());
    }
    // Ruin probabilities decrease along the capital grid.
    let csv_rows = data_rows(&out);
    let psi: Vec<f64> = csv_rows.iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(psi[0] >= psi[1] && psi[1] >= psi[2]);
}

#[test]
fn ruin_seed_flag_overrides_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("ruin.csv");
    let cfg = write_config(dir.path(), "cfg.json", &ruin_config(&out, 2));
    assert!(run(&["ruin", "--config", cfg.to_str().unwrap()]).status.success());
    let base = fs::read(&out).unwrap();
    assert!(run(&["ruin", "--config", cfg.to_str().unwrap(), "--seed", "7"])
        .status
        .success());
    let reseeded = fs::read(&out).unwrap();
    assert_ne!(base, reseeded);
    assert!(String::from_utf8_lossy(&reseeded).contains("# seed: 7"));
}

#[test]
fn verify_long_tail_probe_and_negative_control() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify.csv");
    let cfg_value = json!({
        "seed": 1,
        "out": out.to_str().unwrap(),
        "probes": {
            "long_tail": {
                "spec": pareto21(),
                "gamma": 0.0,
                "t": 1.0,
                "x_grid": {"values": [100.0, 1000.0, 10000.0]},
            },
            "convolution": {
                "spec": pareto21(),
                "gamma": 0.0,
                "x_grid": {"values": [100.0, 1000.0]},
                "oracle_budget": 65536,
            },
        },
    });
    let cfg = write_config(dir.path(), "cfg.json", &cfg_value);
    let res = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let summary: Value =
        serde_json::from_slice(&fs::read(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(summary["probes"]["long_tail"]["trend"], "decreasing");
    assert_eq!(summary["probes"]["long_tail"]["pass"], true);
    assert_eq!(summary["probes"]["convolution"]["pass"], true);

    // Negative control: exponential probed against gamma = 0 fails.
    let cfg_value = json!({
        "seed": 1,
        "out": out.to_str().unwrap(),
        "probes": {
            "long_tail": {
                "spec": {"family": "exponential", "params": {"rate": 1.0}},
                "gamma": 0.0,
                "t": 1.0,
                "x_grid": {"values": [10.0, 100.0, 1000.0]},
            },
        },
    });
    let cfg = write_config(dir.path(), "neg.json", &cfg_value);
    let res = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert!(res.status.success());
    let summary: Value =
        serde_json::from_slice(&fs::read(out.with_extension("json")).unwrap()).unwrap();
    assert_eq!(summary["probes"]["long_tail"]["pass"], false);
}

#[test]
fn verify_lattice_misaligned_shift_is_config_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("verify.csv");
    let cfg_value = json!({
        "seed": 1,
        "out": out.to_str().unwrap(),
        "probes": {
            "long_tail": {
                "spec": two_point_12(),
                "gamma": 0.5,
                "t": 0.25,
                "x_grid": {"values": [10.0, 100.0]},
            },
        },
    });
    let cfg = write_config(dir.path(), "cfg.json", &cfg_value);
    let res = run(&["verify", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&res.stderr).contains("lattice span"));
}

#[test]
fn validate_model_reports() {
    let dir = tempfile::tempdir().unwrap();

    // Mid-range FGM: valid, with the guaranteed lower bound c = 0.5.
    let cfg = write_config(
        dir.path(),
        "fgm.json",
        &json!({
            "loss": pareto21(),
            "discount": two_point_12(),
            "model": {"kind": "fgm", "theta": 0.5},
            "seed": 3,
        }),
    );
    let res = run(&["validate-model", "--config", cfg.to_str().unwrap()]);
    assert!(res.status.success());
    let doc: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(doc["valid"], true);
    assert_eq!(doc["report"]["c_lower_bound"], 0.5);

    // Boundary theta against a continuous discount law: invalid.
    let cfg = write_config(
        dir.path(),
        "fgm1.json",
        &json!({
            "loss": pareto21(),
            "discount": {"family": "uniform", "params": {"a": 0.5, "b": 1.0}},
            "model": {"kind": "fgm", "theta": 1.0},
            "seed": 3,
        }),
    );
    let res = run(&["validate-model", "--config", cfg.to_str().unwrap()]);
    assert!(res.status.success());
    let doc: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(doc["valid"], false);

    // Sarmanov with exponential kernels: centering residuals pass. The
    // kernels are built through the library so the centering constants
    // in the config are the exact computed ones.
    let loss = ruintail::DistributionSpec::pareto(2.0, 1.0).unwrap();
    let discount = ruintail::DistributionSpec::uniform(0.5, 1.0).unwrap();
    let model = ruintail::DependenceModel::sarmanov(
        0.5,
        ruintail::KernelSpec::exp_x(&loss).unwrap(),
        ruintail::KernelSpec::exp_y(&discount).unwrap(),
    )
    .unwrap();
    let cfg = write_config(
        dir.path(),
        "sar.json",
        &json!({
            "loss": serde_json::to_value(&loss).unwrap(),
            "discount": serde_json::to_value(&discount).unwrap(),
            "model": serde_json::to_value(&model).unwrap(),
            "seed": 3,
        }),
    );
    let res = run(&["validate-model", "--config", cfg.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let doc: Value = serde_json::from_slice(&res.stdout).unwrap();
    assert_eq!(doc["valid"], true, "{doc}");
    for check in doc["report"]["checks"].as_array().unwrap() {
        if check["name"] == "centering_x" || check["name"] == "centering_y" {
            assert_eq!(check["pass"], true, "{check}");
        }
    }
}

#[test]
fn shipped_configs_stay_valid() {
    // Run every config under configs/ end to end, with the path counts
    // dialed down so the smoke test stays quick.
    let root = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let dir = tempfile::tempdir().unwrap();

    for (name, cmd) in [
        ("product_tail_two_point.json", "product-tail"),
        ("ruin_three_periods.json", "ruin"),
        ("verify_pareto.json", "verify"),
        ("validate_fgm.json", "validate-model"),
    ] {
        let mut value: Value =
            serde_json::from_slice(&fs::read(root.join(name)).unwrap()).unwrap();
        let obj = value.as_object_mut().unwrap();
        if obj.contains_key("paths") {
            obj.insert("paths".into(), json!(20_000));
        }
        if obj.contains_key("mc_paths") {
            obj.insert("mc_paths".into(), json!(20_000));
        }
        let cfg = write_config(dir.path(), name, &value);
        let out = dir.path().join(format!("{name}.out"));
        let res = run(&[
            cmd,
            "--config",
            cfg.to_str().unwrap(),
            "--out",
            out.to_str().unwrap(),
        ]);
        assert!(
            res.status.success(),
            "{name}: {}",
            String::from_utf8_lossy(&res.stderr)
        );
    }
}

#[test]
fn unknown_config_fields_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("tail.csv");
    let mut cfg_value = example_product_config(&out);
    cfg_value
        .as_object_mut()
        .unwrap()
        .insert("tpyo".into(), json!(1));
    let cfg = write_config(dir.path(), "cfg.json", &cfg_value);
    let res = run(&["product-tail", "--config", cfg.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2));
}
