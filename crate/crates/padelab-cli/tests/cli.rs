//! End-to-end runner checks: artifact layout, cache round trips, and
//! bytewise determinism of the reports.

use std::process::Command;

use padelab_cli::cache::Cache;
use padelab_cli::config::{ConfigError, ExperimentConfig};
use padelab_cli::runner::{run_experiment, RunError};

const SMALL: &str = r#"
precision_bits = 256
n_min = 3
n_max = 10
rhos = ["1.5"]
k_nodes = 64

[[spec.factors]]
segment = { alpha = -1.0, beta = 1.0 }

[[spec.factors.constants]]
c = { re = "2", im = "0" }
exponent = { re = "1/2", im = "0" }

[[spec.factors.constants]]
c = { re = "3", im = "0" }
exponent = { re = "1/2", im = "0" }
"#;

#[test]
fn sweep_artifacts_cache_and_determinism() {
    let cfg = ExperimentConfig::from_toml_str(SMALL).unwrap();
    let root = tempfile::tempdir().unwrap();
    let cache_dir = root.path().join("cache");
    let out1 = root.path().join("run1");
    let out2 = root.path().join("run2");

    // No threshold assertions here: the limit laws only bind for deep
    // sweeps, and this config stops at n = 10.
    let o1 = run_experiment(&cfg, &out1, Some(&cache_dir), None).unwrap();
    assert_eq!(o1.report.rows.len(), 8);
    for name in ["config.toml", "equilibrium.json", "report.csv", "report.json"] {
        assert!(out1.join(name).is_file(), "{name} missing");
        assert!(o1.files.iter().any(|(n, _)| n == name), "{name} not in manifest list");
    }
    assert!(out1.join("MANIFEST.json").is_file());
    assert!(out1.join("plot/sup_s_q.dat").is_file());

    // MANIFEST hashes match the bytes on disk.
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out1.join("MANIFEST.json")).unwrap())
            .unwrap();
    for f in manifest["files"].as_array().unwrap() {
        let bytes = std::fs::read(out1.join(f["name"].as_str().unwrap())).unwrap();
        let hash: String = {
            use sha2::{Digest, Sha256};
            let mut h = Sha256::new();
            h.update(&bytes);
            h.finalize().iter().map(|b| format!("{b:02x}")).collect()
        };
        assert_eq!(hash, f["sha256"].as_str().unwrap());
    }

    // Cache was populated: one germ file plus one pair per n.
    let cached = std::fs::read_dir(&cache_dir).unwrap().count();
    assert_eq!(cached, 1 + 8);

    // Second run (cache hits throughout) is bytewise identical.
    let o2 = run_experiment(&cfg, &out2, Some(&cache_dir), None).unwrap();
    assert_eq!(o2.report.rows.len(), 8);
    for name in ["report.csv", "report.json", "equilibrium.json"] {
        let a = std::fs::read(out1.join(name)).unwrap();
        let b = std::fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs between runs");
    }

    // The cached germ reloads bit-exactly against a fresh computation.
    let cache = Cache::open(&cache_dir).unwrap();
    let spec_hash = cfg.spec.hash();
    let germ = cache.load_germ(&spec_hash, 2 * cfg.n_max, cfg.precision_bits).unwrap();
    let fresh = cfg
        .spec
        .germ_at_infinity(2 * cfg.n_max, cfg.precision_bits)
        .unwrap();
    for k in 0..=germ.order() {
        assert!((germ.coeff(k) - fresh.coeff(k)).is_zero(), "coeff {k} drifted");
    }
}

#[test]
fn config_errors_map_to_exit_code_2() {
    let err = ExperimentConfig::from_toml_str("not toml at all [").unwrap_err();
    assert!(matches!(err, ConfigError::Parse(_)));
    let run_err = RunError::from(err);
    assert_eq!(run_err.exit_code(), 2);

    let bad = SMALL.replace("n_max = 10", "n_max = 600");
    assert!(ExperimentConfig::from_toml_str(&bad).is_err());
}

#[test]
fn binary_equilibrium_smoke() {
    let out = Command::new(env!("CARGO_BIN_EXE_padelab"))
        .args(["equilibrium", "--endpoints", "-1,1", "--json"])
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let cap: f64 = v["capacity"].as_str().unwrap().parse().unwrap();
    assert!((cap - 0.5).abs() < 1e-10, "capacity {cap}");

    // missing required input: config error, exit code 2
    let out = Command::new(env!("CARGO_BIN_EXE_padelab"))
        .args(["equilibrium"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}
