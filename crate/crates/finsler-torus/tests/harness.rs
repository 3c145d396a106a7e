use finsler_torus::harness::{config_hash, run, Command, ExperimentConfig, SCHEMA_VERSION};
use serde_json::Value;
use std::fs;
use std::path::Path;

fn cfg(extra: &str) -> ExperimentConfig {
    ExperimentConfig::from_toml(&format!("seed = 7\n{extra}")).unwrap()
}

fn read_json(p: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(p).unwrap()).unwrap()
}

#[test]
fn integrate_writes_manifest_and_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("[metric]\nkind = \"bump\"\n[integrate]\nt = 5.0\n");
    assert_eq!(run(Command::Integrate, &c, dir.path()).unwrap(), 0);
    let man = read_json(&dir.path().join("manifest.json"));
    assert_eq!(man["status"], "ok");
    assert_eq!(man["exit_code"], 0);
    assert_eq!(man["schema_version"], SCHEMA_VERSION);
    assert_eq!(man["config_hash"], config_hash(&c));
    assert_eq!(man["metric"], "conformal");
    for f in man["outputs"].as_array().unwrap() {
        assert!(dir.path().join(f.as_str().unwrap()).exists());
    }
    let csv = fs::read_to_string(dir.path().join("orbit.csv")).unwrap();
    assert!(csv.starts_with("t,x1,x2,v1,v2,E\n"));
    let summary = read_json(&dir.path().join("integrate.json"));
    assert!(summary["max_relative_drift"].as_f64().unwrap() < 1e-6);
    // the stored config reproduces the hash
    let again = ExperimentConfig::from_toml(&fs::read_to_string(dir.path().join("config.toml")).unwrap()).unwrap();
    assert_eq!(config_hash(&again), config_hash(&c));
}

#[test]
fn flat_beta_table_example() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("[metric]\nkind = \"flat\"\n[graph]\nn = 16\n[mather]\nq = 16\ncorner_classes = []\n");
    assert_eq!(run(Command::BetaTable, &c, dir.path()).unwrap(), 0);
    let csv = fs::read_to_string(dir.path().join("beta_table.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "p,q,h1,h2,beta,left_slope,right_slope");
    let row = lines.find(|l| l.starts_with("1,0,")).unwrap();
    let beta: f64 = row.split(',').nth(4).unwrap().parse().unwrap();
    assert!((beta - 0.5).abs() <= 2e-3);
}

#[test]
fn flat_gap_scan_example() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("[metric]\nkind = \"flat\"\n");
    assert_eq!(run(Command::GapScan, &c, dir.path()).unwrap(), 0);
    let s = read_json(&dir.path().join("gap_scan.json"));
    assert_eq!(s["coverage"], 1.0);
    assert_eq!(s["gaps"], Value::Array(vec![]));
    assert!(fs::read(dir.path().join("coverage.pgm")).unwrap().starts_with(b"P"));
}

#[test]
fn csv_outputs_are_byte_identical_for_one_seed() {
    let c = cfg("[metric]\nkind = \"randers\"\nb = [0.5, 0.0]\n[entropy]\nt_max = 10.0\nsamples = 1000\nbootstrap = 10\n");
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    assert_eq!(run(Command::Entropy, &c, a.path()).unwrap(), 0);
    assert_eq!(run(Command::Entropy, &c, b.path()).unwrap(), 0);
    assert_eq!(fs::read(a.path().join("entropy.csv")).unwrap(), fs::read(b.path().join("entropy.csv")).unwrap());
    let c = cfg("[metric]\nkind = \"bump\"\n[graph]\nn = 16\n[minimize]\nclasses = [[1, 0], [1, 1]]\nnodes_per_period = 32\n");
    assert_eq!(run(Command::Minimize, &c, a.path()).unwrap(), 0);
    assert_eq!(run(Command::Minimize, &c, b.path()).unwrap(), 0);
    for f in ["minimizers.csv", "minimizer_1_1.csv"] {
        assert_eq!(fs::read(a.path().join(f)).unwrap(), fs::read(b.path().join(f)).unwrap(), "{f}");
    }
}

#[test]
fn unknown_keys_and_missing_seed_are_validation_errors() {
    for text in ["seed = 1\n[metric]\nkind = \"flat\"\ncolour = 3\n", "[metric]\nkind = \"flat\"\n", "seed = 1\n[metric]\nkind = \"flat\"\n[entropy]\nsamples = 10\n"] {
        let e = ExperimentConfig::from_toml(text).unwrap_err();
        assert_eq!(e.exit_code(), 2, "{text}");
    }
}

#[test]
fn chart_mismatch_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("[metric]\nkind = \"rotational\"\n");
    assert_eq!(run(Command::BetaTable, &c, dir.path()).unwrap(), 2);
    let e = read_json(&dir.path().join("error.json"));
    assert_eq!(e["error"], "chart_mismatch");
    assert_eq!(read_json(&dir.path().join("manifest.json"))["status"], "failed");
}

#[test]
fn rejected_steps_exit_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let c = cfg("[metric]\nkind = \"bump\"\n[integrate]\nt = 1.0\ndt = 1e-2\nevery = 1\nv = [40.0, 30.0]\n");
    assert_eq!(run(Command::Integrate, &c, dir.path()).unwrap(), 3);
    let e = read_json(&dir.path().join("error.json"));
    assert_eq!(e["exit_code"], 3);
}

#[test]
fn command_names_round_trip() {
    for c in Command::ALL {
        assert_eq!(Command::parse(c.name()), Some(c));
    }
    assert_eq!(Command::parse("nope"), None);
}

#[test]
fn shipped_configs_validate() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let mut n = 0;
    for e in fs::read_dir(dir).unwrap() {
        let p = e.unwrap().path();
        if p.extension().is_some_and(|x| x == "toml") {
            ExperimentConfig::from_toml(&fs::read_to_string(&p).unwrap()).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
            n += 1;
        }
    }
    assert!(n >= 6);
}
