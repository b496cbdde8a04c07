use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use hengrc::bench::{derive_seed, SystemSpec};
use hengrc::features::{plan_features, FeatureConfig};
use hengrc::io::load_series;
use hengrc::readout::{esn_train, predict_closed_loop, train, EsnConfig, TargetMode, TrainConfig};

fn hengrc(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_hengrc"))
        .current_dir(dir)
        .env_remove("HENGRC_OUT_DIR")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(dir: &Path, args: &[&str]) -> Output {
    let out = hengrc(dir, args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    out
}

fn manifest(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn bits(s: &hengrc::TimeSeries) -> Vec<u64> {
    s.as_slice().iter().map(|v| v.to_bits()).collect()
}

#[test]
fn lorenz_generation_shape_and_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    for sub in ["a", "b"] {
        ok(d, &["generate", "lorenz", "--steps", "1200", "--dt", "0.01", "--seed", "7", "--out-dir", sub]);
    }
    let a = fs::read(d.join("a/lorenz.ccts")).unwrap();
    assert_eq!(a, fs::read(d.join("b/lorenz.ccts")).unwrap());
    let s = load_series(&d.join("a/lorenz.ccts")).unwrap();
    assert_eq!((s.dim(), s.len()), (3, 1201));
    // The CLI trajectory is trial 0 of an experiment with the same root seed.
    let direct = SystemSpec::lorenz().generate(1200, derive_seed(7, "data", 0)).unwrap();
    assert_eq!(bits(&s), bits(&direct));
}

#[test]
fn ks_generation_shape() {
    let tmp = tempfile::tempdir().unwrap();
    ok(tmp.path(), &["generate", "ks", "--L", "22", "--Q", "64", "--steps", "5000", "--out", "ks.csv"]);
    let s = load_series(&tmp.path().join("ks.csv")).unwrap();
    assert_eq!((s.dim(), s.len()), (64, 5001));
}

#[test]
fn snapshot_round_trip_matches_in_process_features() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["generate", "lorenz", "--steps", "500", "--seed", "3", "--out", "train.ccts"]);
    ok(
        d,
        &[
            "train", "--input", "train.ccts", "--family", "heng-rc", "--offset", "0", "--lambda", "1e-5", "--target",
            "delta",
        ],
    );
    ok(d, &["predict", "--model", "model.ccmd", "--warmup", "train.ccts", "--steps", "300"]);

    let series = load_series(&d.join("train.ccts")).unwrap();
    let map = plan_features(&FeatureConfig::heng_rc(3, 1).with_offset(0)).unwrap();
    let (model, _) = train(&series, &map, &TrainConfig::new(1e-5, TargetMode::Delta)).unwrap();
    let direct = predict_closed_loop(&model, &series, 300).unwrap().series;
    let via_cli = load_series(&d.join("prediction.ccts")).unwrap();
    assert_eq!(bits(&via_cli), bits(&direct));
}

#[test]
fn snapshot_round_trip_matches_in_process_esn() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["generate", "lorenz", "--steps", "400", "--seed", "4", "--out", "train.ccts"]);
    ok(
        d,
        &[
            "train", "--input", "train.ccts", "--family", "esn", "--nodes", "40", "--seed", "9", "--lambda", "1e-8",
            "--normalize", "true", "--washout", "50",
        ],
    );
    ok(d, &["predict", "--model", "model.ccmd", "--warmup", "train.ccts", "--steps", "200"]);

    let series = load_series(&d.join("train.ccts")).unwrap();
    let cfg = EsnConfig {
        seed: derive_seed(9, "reservoir", 0),
        ..EsnConfig::with_nodes(40)
    };
    let (model, _) = esn_train(&series, &cfg, &TrainConfig::new(1e-8, TargetMode::NextState).normalized(true), 50).unwrap();
    let direct = predict_closed_loop(&model, &series, 200).unwrap().series;
    assert_eq!(bits(&load_series(&d.join("prediction.ccts")).unwrap()), bits(&direct));
}

#[test]
fn scoring_outputs_written_with_truth() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    ok(d, &["generate", "lorenz", "--steps", "900", "--seed", "5", "--out", "all.csv"]);
    let all = load_series(&d.join("all.csv")).unwrap();
    let mut w = Vec::new();
    hengrc::io::write_ccts(&all.slice(0, 401).unwrap(), &mut w).unwrap();
    fs::write(d.join("train.ccts"), w).unwrap();
    let mut t = Vec::new();
    hengrc::io::write_ccts(&all.slice(401, 901).unwrap(), &mut t).unwrap();
    fs::write(d.join("truth.ccts"), t).unwrap();
    ok(d, &["train", "--input", "train.ccts", "--offset", "0", "--lambda", "1e-5", "--target", "delta"]);
    ok(
        d,
        &[
            "predict", "--model", "model.ccmd", "--warmup", "train.ccts", "--truth", "truth.ccts", "--steps", "500",
            "--lyapunov", "0.906", "--out", "fc.ccts",
        ],
    );
    for f in ["fc.ccts", "fc.error.csv", "fc.diff.ccts", "fc.valid.json", "fc.manifest.json"] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(d.join("fc.valid.json")).unwrap()).unwrap();
    let rows = v["valid"].as_array().unwrap();
    assert_eq!(rows[0]["threshold"], 0.3);
    assert!(rows[0]["valid_steps"].as_u64().unwrap() > 0);
    let m = manifest(&d.join("fc.manifest.json"));
    assert_eq!(m["inputs"].as_array().unwrap().len(), 3);
}

#[test]
fn missing_input_fails_without_outputs() {
    let tmp = tempfile::tempdir().unwrap();
    let out = hengrc(tmp.path(), &["train", "--input", "nope.ccts", "--out-dir", "out"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("nope.ccts"));
    assert!(!tmp.path().join("out").exists());

    ok(tmp.path(), &["generate", "lorenz", "--steps", "100", "--out", "t.ccts"]);
    let out = hengrc(
        tmp.path(),
        &["predict", "--model", "missing.ccmd", "--warmup", "t.ccts", "--out-dir", "out2"],
    );
    assert!(!out.status.success());
    assert!(!tmp.path().join("out2").exists());
}

#[test]
fn invalid_inputs_exit_nonzero() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("bad.toml"), "[train]\nlamda = 1\n").unwrap();
    assert!(!hengrc(d, &["--config", "bad.toml", "generate", "lorenz"]).status.success());
    assert!(!hengrc(d, &["generate", "ks", "--Q", "7", "--steps", "10"]).status.success());
    assert!(!hengrc(d, &["bench"]).status.success());
    assert!(!hengrc(d, &["model", "inspect", "absent.ccmd"]).status.success());
    assert_eq!(fs::read_dir(d).unwrap().count(), 1);
}

#[test]
fn flags_override_config_and_manifest_reruns() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    fs::write(d.join("run.toml"), "[generate.lorenz]\nsteps = 50\nseed = 11\n").unwrap();
    ok(d, &["--config", "run.toml", "generate", "lorenz", "--steps", "20", "--out-dir", "first"]);
    assert_eq!(load_series(&d.join("first/lorenz.ccts")).unwrap().len(), 21);

    let m = manifest(&d.join("first/lorenz.manifest.json"));
    let cfg = m["config_toml"].as_str().unwrap();
    assert!(cfg.contains("steps = 20"));
    assert_eq!(m["seeds"]["root"], 11);
    fs::write(d.join("replay.toml"), cfg).unwrap();
    ok(d, &["--config", "replay.toml", "generate", "lorenz", "--out-dir", "second"]);
    let again = manifest(&d.join("second/lorenz.manifest.json"));
    assert_eq!(m["artifacts"][0]["sha256"], again["artifacts"][0]["sha256"]);
    let art = fs::read(d.join("first/lorenz.ccts")).unwrap();
    assert_eq!(m["artifacts"][0]["sha256"].as_str().unwrap(), sha256_hex(&art));
}

fn sha256_hex(bytes: &[u8]) -> String {
    use sha2::{Digest, Sha256};
    hex::encode(Sha256::digest(bytes))
}

#[test]
fn out_dir_from_environment() {
    let tmp = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_hengrc"))
        .current_dir(tmp.path())
        .env("HENGRC_OUT_DIR", "from_env")
        .args(["generate", "lorenz", "--steps", "10"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert!(tmp.path().join("from_env/lorenz.ccts").exists());
}

#[test]
fn custom_bench_from_config() {
    let tmp = tempfile::tempdir().unwrap();
    let d = tmp.path();
    let cfg = r#"
[bench]
name = "pair"
seed = 8

[[bench.experiments]]
name = "heng"
training_steps = 300
prediction_steps = 200
n_trials = 2
seed = 1
lyapunov_exponent = 0.906
system = { system = "lorenz" }
model = { kind = "features", features = { family = "heng_rc", q = 3, k = 1, delay_offset = 0 } }
train = { lambda = 1e-5, target_mode = "delta" }

[[bench.experiments]]
name = "ng"
training_steps = 300
prediction_steps = 200
n_trials = 2
seed = 1
lyapunov_exponent = 0.906
system = { system = "lorenz" }
model = { kind = "features", features = { family = "ng_rc", q = 3, k = 1 } }
train = { lambda = 1e-4, target_mode = "delta" }
"#;
    fs::write(d.join("bench.toml"), cfg).unwrap();
    ok(d, &["--config", "bench.toml", "bench", "--seed", "8"]);
    for f in ["pair_trials.csv", "pair_curves.csv", "pair_comparison.csv", "pair_report.json", "pair_trials.manifest.json"] {
        assert!(d.join(f).exists(), "{f} missing");
    }
    let comparison = fs::read_to_string(d.join("pair_comparison.csv")).unwrap();
    assert_eq!(comparison.lines().count(), 3);
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(d.join("pair_report.json")).unwrap()).unwrap();
    assert_eq!(report["experiments"][0]["spec"]["seed"], 8);
}
