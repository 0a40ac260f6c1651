use std::fs;
use std::path::Path;

use riverkpp_cli::main_with_args;
use riverkpp_cli::manifest::{ResolvedConfig, RunManifest, MANIFEST_FILE};

fn write_config(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

const TB: &str = r#"{"branches":[{"orientation":"upper","beta":3,"a":1},{"orientation":"lower","beta":1,"a":3}]}"#;

fn run(args: &[&str]) -> i32 {
    let mut argv = vec!["riverkpp"];
    argv.extend_from_slice(args);
    main_with_args(argv)
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(run(&["no-such-command"]), 2);
    assert_eq!(run(&["phase-plane", "--mu", "0.1"]), 2);
    assert_eq!(run(&["phase-plane", "--mu", "0.1", "--kind", "nope"]), 2);
}

#[test]
fn zero_speed_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"branches":[{"orientation":"upper","beta":0,"a":1},{"orientation":"lower","beta":1,"a":3}]}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run(&["--out", out.to_str().unwrap(), "classify", "--config", &cfg]), 1);
    assert!(!out.join(MANIFEST_FILE).exists());
}

#[test]
fn unbalanced_flux_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bad.json",
        r#"{"branches":[{"orientation":"upper","beta":3,"a":1},{"orientation":"lower","beta":1,"a":1}]}"#,
    );
    let out = dir.path().join("out");
    assert_eq!(run(&["--out", out.to_str().unwrap(), "classify", "--config", &cfg]), 1);
}

#[test]
fn inadmissible_alpha_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tb.json", TB);
    let out = dir.path().join("out");
    assert_eq!(run(&["--out", out.to_str().unwrap(), "stationary", "--config", &cfg, "--alpha", "0.1"]), 1);
}

#[test]
fn classify_writes_prediction_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tb.json", TB);
    let out = dir.path().join("out");
    assert_eq!(run(&["--out", out.to_str().unwrap(), "classify", "--config", &cfg]), 0);
    let pred: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("prediction.json")).unwrap()).unwrap();
    assert_eq!(pred["prediction"]["outcome"], "below-capacity");
    let alpha = pred["prediction"]["alpha"].as_f64().unwrap();
    assert!((alpha - 0.2455161061).abs() < 1e-8);
    let manifest = RunManifest::read(&out).unwrap();
    assert_eq!(manifest.subcommand, "classify");
    assert_eq!(manifest.artifacts, vec!["prediction.json".to_string()]);
    let manifests = fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().file_name() == MANIFEST_FILE).count();
    assert_eq!(manifests, 1);
}

#[test]
fn manifest_round_trips_and_replays_bit_identically() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tb.json", TB);
    let first = dir.path().join("first");
    let code = run(&["--out", first.to_str().unwrap(), "stationary", "--config", &cfg, "--alpha", "0.5"]);
    assert_eq!(code, 0);

    let text = fs::read_to_string(first.join(MANIFEST_FILE)).unwrap();
    let manifest = RunManifest::from_json(&text).unwrap();
    let again = RunManifest::from_json(&manifest.to_json().unwrap()).unwrap();
    assert_eq!(manifest, again);
    assert!(matches!(manifest.config, ResolvedConfig::Stationary { alpha: Some(a), .. } if a == 0.5));

    let second = dir.path().join("second");
    let artifacts = riverkpp_cli::replay(&manifest.config, &second).unwrap();
    assert_eq!(artifacts, manifest.artifacts);
    for name in &artifacts {
        let a = fs::read(first.join(name)).unwrap();
        let b = fs::read(second.join(name)).unwrap();
        assert!(a == b, "{name} differs between runs");
    }
}

#[test]
fn simulate_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "tb.json", TB);
    let outs: Vec<_> = ["a", "b"].iter().map(|n| dir.path().join(n)).collect();
    for out in &outs {
        let args = ["--out", out.to_str().unwrap(), "simulate", "--config", &cfg, "--L", "50", "--T", "2", "--init", "bump:0.8:2"];
        assert_eq!(run(&args), 0);
    }
    for name in ["timeseries.csv", "final_profile.csv"] {
        assert_eq!(fs::read(outs[0].join(name)).unwrap(), fs::read(outs[1].join(name)).unwrap());
    }
    let mut rdr = csv::Reader::from_path(outs[0].join("final_profile.csv")).unwrap();
    assert_eq!(rdr.headers().unwrap(), vec!["branch", "x", "value"]);
    let rows = rdr.records().count();
    assert_eq!(rows, 2 * 1001);
}

#[test]
fn sweep_prediction_only() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let code = run(&["--out", out.to_str().unwrap(), "sweep", "--grid", "tb:beta_u=1.9:2.1:2,beta_l=1", "--workers", "2"]);
    assert_eq!(code, 0);
    let mut rdr = csv::Reader::from_path(out.join("sweep.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = rdr.records().map(|r| r.unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert_eq!(&rows[0][2], "TB-i");
    assert_eq!(&rows[0][3], "carrying-capacity");
    assert_eq!(&rows[1][2], "TB-iii");
    assert_eq!(&rows[1][3], "below-capacity");
}

#[test]
fn bad_sweep_grid_is_a_domain_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    assert_eq!(run(&["--out", out.to_str().unwrap(), "sweep", "--grid", "tb:gamma=1:2:3"]), 1);
}
