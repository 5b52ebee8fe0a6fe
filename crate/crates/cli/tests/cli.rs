use std::path::Path;
use std::process::{Command, Output};

use ill_core::labels::{write_dataset, BlobSpec};
use ill_core::rng::{derive_seed, Stream};
use ill_core::task::{builtin, CorruptionParams};
use serde_json::Value;

fn ill(args: &[&str], out: Option<&Path>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ill"));
    cmd.args(args);
    if let Some(o) = out {
        cmd.arg("--out").arg(o);
    }
    cmd.output().expect("spawn ill")
}

const SMALL: [&str; 6] = ["--n-train", "300", "--n-test", "200", "--epochs", "2"];

fn run_args<'a>(extra: &[&'a str]) -> Vec<&'a str> {
    let mut v = vec!["run"];
    v.extend(SMALL);
    v.extend(extra);
    v
}

fn aggregate(dir: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(dir.join("aggregate.json")).unwrap()).unwrap()
}

#[test]
fn run_writes_artifacts_per_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = ill(&run_args(&["--task", "nll", "--eta", "0.2", "--seeds", "1,2,3"]), Some(dir.path()));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for s in 1..=3 {
        for f in [format!("metrics_seed{s}.csv"), format!("model_seed{s}.json"), format!("transition_seed{s}.json")] {
            assert!(dir.path().join(&f).is_file(), "missing {f}");
        }
        let rows = std::fs::read_to_string(dir.path().join(format!("metrics_seed{s}.csv"))).unwrap().lines().count();
        assert_eq!(rows, 3);
    }
    assert!(dir.path().join("manifest.conf").is_file());
    assert_eq!(aggregate(dir.path())["seeds"].as_array().unwrap().len(), 3);
}

#[test]
fn noiseless_tasks_write_no_transition() {
    let dir = tempfile::tempdir().unwrap();
    let out = ill(&run_args(&["--task", "pll", "--q", "0.3", "--seeds", "0"]), Some(dir.path()));
    assert!(out.status.success());
    assert!(!dir.path().join("transition_seed0.json").exists());
}

#[test]
fn zero_epochs_is_chance_level() {
    let dir = tempfile::tempdir().unwrap();
    let out = ill(&["run", "--task", "supervised", "--epochs", "0", "--n-test", "500", "--seeds", "0"], Some(dir.path()));
    assert!(out.status.success());
    let acc = aggregate(dir.path())["test_acc"]["mean"].as_f64().unwrap();
    assert!((acc - 0.1).abs() < 0.02, "accuracy {acc}");
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["run", "--task", "pll", "--eta", "0.3"],
        &["run", "--bogus"],
        &["run", "--task", "nope"],
        &["run", "--task", "ssl"],
        &["sweep", "--task", "pll"],
    ];
    for args in cases {
        assert_eq!(ill(args, Some(dir.path())).status.code(), Some(2), "{args:?}");
    }
    let conf = dir.path().join("bad.conf");
    std::fs::write(&conf, "task = pll\nmystery = 1\n").unwrap();
    assert_eq!(ill(&["run", "--config", conf.to_str().unwrap()], Some(dir.path())).status.code(), Some(2));
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let conf = dir.path().join("c.conf");
    std::fs::write(&conf, "# small\ntask = pll\nq = 0.4\nepochs = 3\nn_train = 200\nn_test = 100\nseeds = 0\n").unwrap();
    let out_dir = dir.path().join("o");
    let out = ill(&["run", "--config", conf.to_str().unwrap(), "--epochs", "1"], Some(&out_dir));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let manifest = std::fs::read_to_string(out_dir.join("manifest.conf")).unwrap();
    assert!(manifest.lines().any(|l| l.replace(' ', "") == "epochs=1"));
    assert!(manifest.lines().any(|l| l.replace(' ', "") == "q=0.4"));
    let rows = std::fs::read_to_string(out_dir.join("metrics_seed0.csv")).unwrap().lines().count();
    assert_eq!(rows, 2);
}

#[test]
fn manifest_rerun_is_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    assert!(ill(&run_args(&["--task", "mixed", "--labels", "100", "--q", "0.2", "--eta", "0.1", "--seeds", "7"]), Some(&a)).status.success());
    let manifest = a.join("manifest.conf");
    assert!(ill(&["run", "--config", manifest.to_str().unwrap()], Some(&b)).status.success());
    for f in ["metrics_seed7.csv", "model_seed7.json", "transition_seed7.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
}

#[test]
fn trains_from_csv_files() {
    let dir = tempfile::tempdir().unwrap();
    let spec = BlobSpec { classes: 4, dim: 3, ..BlobSpec::default() };
    let clean = spec.generate(200, 3, Stream::TrainData).unwrap();
    let params = CorruptionParams { q: 0.3, ..CorruptionParams::default() };
    let train = builtin().get("pll").unwrap().corrupt(&clean, &params, derive_seed(3, Stream::Corruption)).unwrap();
    let test = spec.generate(100, 3, Stream::TestData).unwrap();
    let (tp, vp) = (dir.path().join("train.csv"), dir.path().join("test.csv"));
    write_dataset(&train, &tp).unwrap();
    write_dataset(&test, &vp).unwrap();
    let out_dir = dir.path().join("o");
    let out = ill(
        &["run", "--task", "pll", "--epochs", "3", "--seeds", "0", "--data", tp.to_str().unwrap(), "--test-data", vp.to_str().unwrap()],
        Some(&out_dir),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(aggregate(&out_dir)["test_acc"]["mean"].as_f64().unwrap() > 0.25);
    let bad = ill(&["run", "--task", "pll", "--data", tp.to_str().unwrap(), "--q", "0.3"], Some(&out_dir));
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn sweep_writes_one_cell_per_grid_point() {
    let dir = tempfile::tempdir().unwrap();
    let out = ill(
        &["sweep", "--epochs", "1", "--n-train", "200", "--n-test", "100", "--seeds", "0",
          "--grid-labels", "50,100", "--grid-q", "0.3", "--grid-eta", "0.0,0.2"],
        Some(dir.path()),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cells = std::fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().path().is_dir()).count();
    assert_eq!(cells, 4);
    let summary = std::fs::read_to_string(dir.path().join("summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert!(dir.path().join("summary_std.csv").is_file());
}

#[test]
fn single_cell_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let out = ill(
        &["sweep", "--epochs", "1", "--n-train", "200", "--n-test", "100", "--seeds", "0,1",
          "--grid-labels", "80", "--grid-q", "0.2", "--grid-eta", "0.1", "--check-trend"],
        Some(dir.path()),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(std::fs::read_to_string(dir.path().join("summary.csv")).unwrap().lines().count(), 2);
}

#[test]
fn tasks_lists_registry() {
    let out = ill(&["tasks"], None);
    let text = String::from_utf8(out.stdout).unwrap();
    for t in ["supervised", "pll", "ssl", "nll", "mixed"] {
        assert!(text.contains(t));
    }
}
