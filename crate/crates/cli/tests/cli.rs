use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use pifm::field::ModelParams;
use pifm::geometry::{io, PointCloud, RngStream, StreamId};
use pifm::transport::w2_exact;
use pifm_cli::commands::{load_model, CHECKPOINT_FILE};
use pifm_cli::manifest::{verify_manifest, RunManifest, MANIFEST_FILE};
use pifm_cli::RunConfig;

const SMALL: &str = r#"
[data.source]
kind = "disc"
center = [0.0, 0.0]
radius = 1.0

[[data.targets]]
kind = "disc"
center = [3.0, 0.0]
radius = 0.5

[[data.targets]]
kind = "square"
center = [0.0, 3.0]
half_width = 0.5

[model]
width = 8
depth = 2

[train]
batch_size = 16
steps = 5
seed = 9
"#;

fn pifm(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pifm")).args(args).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "stdout: {}\nstderr: {}",
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn small_config(dir: &Path) -> PathBuf {
    let p = dir.join("small.toml");
    std::fs::write(&p, SMALL).unwrap();
    p
}

fn train(dir: &Path, name: &str, extra: &[&str]) -> PathBuf {
    let cfg = small_config(dir);
    let out = dir.join(name);
    let mut args = vec!["train", "--config", s(&cfg), "--out", s(&out)];
    args.extend_from_slice(extra);
    ok(&pifm(&args));
    out
}

fn manifest(dir: &Path) -> RunManifest {
    serde_json::from_str(&std::fs::read_to_string(dir.join(MANIFEST_FILE)).unwrap()).unwrap()
}

#[test]
fn zero_steps_leaves_the_initialization() {
    let tmp = tempfile::tempdir().unwrap();
    let out = train(tmp.path(), "run", &["--steps", "0"]);
    let (model, cfg) = load_model(&out.join(CHECKPOINT_FILE)).unwrap();
    let tcfg = cfg.train_config().unwrap();
    let init = ModelParams::init(tcfg.model_config(2), &mut RngStream::new(9, StreamId::Params)).unwrap();
    assert_eq!(model, init);
    assert_eq!(cfg.train.steps, 0);
}

#[test]
fn rerun_gives_identical_checksums() {
    let tmp = tempfile::tempdir().unwrap();
    let a = train(tmp.path(), "a", &[]);
    let b = train(tmp.path(), "b", &[]);
    let (ma, mb) = (manifest(&a), manifest(&b));
    assert_eq!(ma.files, mb.files);
    assert!(ma.files.iter().any(|f| f.path == CHECKPOINT_FILE));
    assert!(verify_manifest(&a).unwrap().is_empty());
    std::fs::write(a.join("loss.csv"), "tampered").unwrap();
    assert!(!verify_manifest(&a).unwrap().is_empty());
}

#[test]
fn stored_config_round_trips() {
    let tmp = tempfile::tempdir().unwrap();
    let out = train(tmp.path(), "run", &["--lambda", "0.5", "--coupling", "independent"]);
    let (_, cfg) = load_model(&out.join(CHECKPOINT_FILE)).unwrap();
    assert_eq!(cfg.train.lambda, 0.5);
    assert_eq!(cfg.train.coupling, "independent");
    let echoed = RunConfig::from_toml(&std::fs::read_to_string(out.join("config.toml")).unwrap()).unwrap();
    assert_eq!(echoed, cfg);
}

#[test]
fn unknown_config_keys_are_errors() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("bad.toml");
    std::fs::write(&cfg, "[train]\nstpes = 3\nseed = 1\n[model]\nwidht = 4\n").unwrap();
    let out = pifm(&["train", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("train.stpes") && err.contains("model.widht"), "{err}");
}

#[test]
fn generate_all_orders() {
    let tmp = tempfile::tempdir().unwrap();
    let run = train(tmp.path(), "run", &[]);
    let out = tmp.path().join("gen");
    ok(&pifm(&[
        "generate",
        "--checkpoint",
        s(&run.join(CHECKPOINT_FILE)),
        "--t",
        "1,1",
        "--all-orders",
        "--n-points",
        "40",
        "--steps",
        "10",
        "--trajectory",
        "--out",
        s(&out),
    ]));
    let csvs: Vec<_> = std::fs::read_dir(&out)
        .unwrap()
        .map(|e| e.unwrap().file_name().into_string().unwrap())
        .filter(|n| n.starts_with("endpoint_") && n.ends_with(".csv"))
        .collect();
    assert_eq!(csvs.len(), 3, "{csvs:?}");
    for c in &csvs {
        assert_eq!(io::load_csv(&out.join(c)).unwrap().len(), 40);
    }
    let svg = std::fs::read_to_string(out.join("plot.svg")).unwrap();
    assert_eq!(svg.matches("class=\"layer\"").count(), 4);
    assert!(out.join("trajectories").is_dir());
    assert!(verify_manifest(&out).unwrap().is_empty());
}

fn write_cloud(dir: &Path, name: &str, coords: Vec<f64>) -> PathBuf {
    let p = dir.join(name);
    io::save_csv(&PointCloud::new(2, coords).unwrap(), false, &p).unwrap();
    p
}

#[test]
fn barycenter_of_one_marginal_is_that_marginal() {
    let tmp = tempfile::tempdir().unwrap();
    let coords: Vec<f64> = (0..60).map(|k| ((k * 37) % 11) as f64 * 0.3).collect();
    let m = write_cloud(tmp.path(), "m.csv", coords);
    let out = tmp.path().join("b");
    ok(&pifm(&["barycenter", "--marginal", s(&m), "--lambdas", "1", "--out", s(&out)]));
    let got = io::load_csv(&out.join("barycenter.csv")).unwrap();
    assert!(w2_exact(&got, &io::load_csv(&m).unwrap()).unwrap() < 1e-9);
    let timing: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("timing.json")).unwrap()).unwrap();
    assert!(timing[0]["report"]["wall_time_ms"].as_f64().unwrap() >= 0.0);
}

#[test]
fn barycenter_midpoint_of_point_masses() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_cloud(tmp.path(), "a.csv", vec![0.0, 0.0]);
    let b = write_cloud(tmp.path(), "b.csv", vec![2.0, 0.0]);
    let out = tmp.path().join("mid");
    ok(&pifm(&[
        "barycenter",
        "--marginal",
        s(&a),
        "--marginal",
        s(&b),
        "--lambdas",
        "0.5,0.5",
        "--out",
        s(&out),
    ]));
    assert_eq!(io::load_csv(&out.join("barycenter.csv")).unwrap().coords(), [1.0, 0.0]);
}

#[test]
fn barycenter_with_shapes_and_grid() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("grid");
    ok(&pifm(&[
        "barycenter",
        "--marginal",
        r#"{"kind":"disc","center":[0,0],"radius":1}"#,
        "--marginal",
        r#"{"kind":"square","center":[4,0],"half_width":0.5}"#,
        "--grid",
        "simplex:0.5",
        "--n-points",
        "64",
        "--out",
        s(&out),
    ]));
    for k in 0..3 {
        assert!(out.join(format!("barycenter_{k:03}.csv")).is_file());
    }
}

#[test]
fn barycenter_outside_the_simplex_is_refused() {
    let tmp = tempfile::tempdir().unwrap();
    let a = write_cloud(tmp.path(), "a.csv", vec![0.0, 0.0]);
    let b = write_cloud(tmp.path(), "b.csv", vec![2.0, 0.0]);
    let out = pifm(&[
        "barycenter",
        "--marginal",
        s(&a),
        "--marginal",
        s(&b),
        "--lambdas=-0.5,1.5",
        "--out",
        s(&tmp.path().join("x")),
    ]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("simplex"));
}

#[test]
fn unknown_scenario_lists_the_available_ones() {
    let tmp = tempfile::tempdir().unwrap();
    let out = pifm(&["scenario", "fig9", "--out", s(tmp.path())]);
    assert!(!out.status.success());
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("curly") && err.contains("gaussian-oracle"), "{err}");
}

#[test]
fn scenario_then_eval() {
    let tmp = tempfile::tempdir().unwrap();
    let run = tmp.path().join("curly");
    ok(&pifm(&["scenario", "curly", "--steps", "20", "--seed", "2", "--out", s(&run)]));
    let metrics: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(run.join("metrics.json")).unwrap()).unwrap();
    for key in ["scenario", "seed", "gaps", "target_w2", "sampling_floor"] {
        assert!(metrics.get(key).is_some(), "missing {key}");
    }
    assert_eq!(metrics["target_w2"].as_array().unwrap().len(), 3);
    assert!(verify_manifest(&run).unwrap().is_empty());

    let eval = tmp.path().join("eval");
    ok(&pifm(&[
        "eval",
        "--checkpoint",
        s(&run.join("models/pifm.pifm")),
        "--scenario",
        "curly",
        "--out",
        s(&eval),
    ]));
    let again: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(eval.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(again["gaps"], metrics["gaps"]);

}
