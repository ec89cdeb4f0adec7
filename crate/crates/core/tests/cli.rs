//! Runs the `digs` binary on cheap commands and inspects what it writes.

use std::path::Path;
use std::process::Command;

fn digs(out: &Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_digs"))
        .args(args)
        .arg("--out-dir")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn eval_scores_an_analytic_circle() {
    let dir = tempfile::tempdir().unwrap();
    let out = digs(dir.path(), &["eval", "analytic:circle:0.5", "--gt", "circle:0.5", "--resolution", "128"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let m = json(&dir.path().join("metrics.json"));
    assert_eq!(m["components"], 1);
    assert!(m["chamfer"]["symmetric"].as_f64().unwrap() < 0.01);
    assert!((m["iou"].as_f64().unwrap() - 1.0).abs() < 0.01);
    let eik = m["field"]["eikonal_residual"].as_f64().unwrap();
    assert!(eik < 1e-6, "eikonal residual {eik}");
}

#[test]
fn train2d_writes_every_artifact() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(
        &cfg,
        r#"{"train": {"iterations": 20, "batch_surface": 16, "batch_domain": 16, "hidden_layers": 3, "width": 16}}"#,
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = digs(
        &out_dir,
        &["train2d", "--shape", "circle", "--config", cfg.to_str().unwrap(), "--resolution", "64", "--deterministic"],
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["model.ckpt", "loss.csv", "contour.csv", "contour.ppm", "sdf.ppm", "eikonal.ppm", "divergence.ppm", "metrics.json"] {
        assert!(out_dir.join(f).is_file(), "missing {f}");
    }
    let log = std::fs::read_to_string(out_dir.join("loss.csv")).unwrap();
    assert_eq!(log.lines().count(), 21);

    let again = dir.path().join("again");
    let out = digs(
        &again,
        &["train2d", "--shape", "circle", "--config", cfg.to_str().unwrap(), "--resolution", "64", "--deterministic"],
    );
    assert!(out.status.success());
    for f in ["model.ckpt", "loss.csv", "metrics.json"] {
        assert_eq!(std::fs::read(out_dir.join(f)).unwrap(), std::fs::read(again.join(f)).unwrap(), "{f} differs");
    }
}

#[test]
fn exit_codes_follow_the_error_kind() {
    let dir = tempfile::tempdir().unwrap();
    let missing = digs(dir.path(), &["eval", "/no/such/model.ckpt", "--gt", "circle"]);
    assert_eq!(missing.status.code(), Some(3));

    let cfg = dir.path().join("bad.json");
    std::fs::write(&cfg, r#"{"itterations": 5}"#).unwrap();
    let bad = digs(dir.path(), &["init-check", "--config", cfg.to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(2));
}

#[test]
fn init_check_reports_the_standard_scheme() {
    let dir = tempfile::tempdir().unwrap();
    let out = digs(dir.path(), &["init-check", "--scheme", "standard", "--dim", "2"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(&dir.path().join("init_check.json"));
    assert_eq!(r["pass"], true);
    assert_eq!(r["checks"][0]["name"], "first_layer_std_ratio");
}
