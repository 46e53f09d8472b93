use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;

use spinfade_cli::{run, ExperimentConfig, ExperimentKind, RunOptions};
use spinfade_core::decay::vieta_reference;
use spinfade_core::InitialState;

fn manifest(dir: &Path, kind: ExperimentKind) -> serde_json::Value {
    let text = std::fs::read_to_string(dir.join(format!("{}.manifest.json", kind.stem()))).unwrap();
    serde_json::from_str(&text).unwrap()
}

/// Every file in `dir` is a manifest or listed by one.
fn assert_no_orphans(dir: &Path) {
    let mut listed = BTreeSet::new();
    let mut present = BTreeSet::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let name = entry.unwrap().file_name().to_string_lossy().into_owned();
        if name.ends_with(".manifest.json") {
            let m: serde_json::Value =
                serde_json::from_str(&std::fs::read_to_string(dir.join(&name)).unwrap()).unwrap();
            for o in m["outputs"].as_array().unwrap() {
                listed.insert(o.as_str().unwrap().to_string());
            }
        } else {
            present.insert(name);
        }
    }
    assert_eq!(present, listed);
}

fn opts(dir: &Path) -> RunOptions {
    RunOptions {
        out_dir: Some(dir.to_path_buf()),
        ..RunOptions::default()
    }
}

const DYADIC_CURVE: &str = r#"
version = 1
[potential]
family = "dyadic"
[state]
gamma = 0.8
[time]
start = 0.0
stop = 20.0
count = 2000
"#;

#[test]
fn dyadic_curve_matches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::from_toml(DYADIC_CURVE).unwrap();
    let report = run(ExperimentKind::Curve, &config, &opts(tmp.path())).unwrap();
    assert!(report.passed);
    let delta = InitialState::from_gamma(0.8).unwrap().delta();
    let mut reader = csv::Reader::from_path(tmp.path().join("curve.csv")).unwrap();
    assert_eq!(
        reader.headers().unwrap(),
        vec!["t", "value", "certified_error", "terms_used"]
    );
    let mut rows = 0;
    for rec in reader.records() {
        let rec = rec.unwrap();
        let t: f64 = rec[0].parse().unwrap();
        let v: f64 = rec[1].parse().unwrap();
        assert!((v - delta * vieta_reference(t)).abs() < 1e-12, "t={t}");
        rows += 1;
    }
    assert_eq!(rows, 2000);
    let m = manifest(tmp.path(), ExperimentKind::Curve);
    assert_eq!(m["experiment"], "curve");
    assert!(m["versions"]["dynamics"].is_string());
    assert!(m["wall_time_seconds"].as_f64().unwrap() >= 0.0);
    assert_no_orphans(tmp.path());
}

#[test]
fn rerun_is_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::from_toml(DYADIC_CURVE).unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run(ExperimentKind::Curve, &config, &opts(&a)).unwrap();
    run(ExperimentKind::Curve, &config, &opts(&b)).unwrap();
    assert_eq!(
        std::fs::read(a.join("curve.csv")).unwrap(),
        std::fs::read(b.join("curve.csv")).unwrap()
    );
}

#[test]
fn verify_suite_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::from_toml("version = 1").unwrap();
    let report = run(ExperimentKind::Verify, &config, &opts(tmp.path())).unwrap();
    assert!(report.passed, "{:?}", report.summary);
    assert_eq!(report.summary.len(), 6);
    assert_no_orphans(tmp.path());
}

#[test]
fn decay_and_ratio_experiments() {
    let tmp = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::from_toml(
        r#"
        version = 1
        [potential]
        family = "power_law"
        alpha = 0.8
        [disorder]
        distribution = "bernoulli"
        [time]
        start = 0.0
        stop = 60.0
        count = 6001
        [decay]
        source = "average"
        window_width = 1.0
        t_min = 10.0
        fit_range = [10.0, 55.0]
        [ratio]
        window_width = 1.0
        t_min = 5.0
        "#,
    )
    .unwrap();
    run(ExperimentKind::DecayClassify, &config, &opts(tmp.path())).unwrap();
    let verdict: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(tmp.path().join("decay_classify.verdict.json")).unwrap(),
    )
    .unwrap();
    assert_eq!(verdict["classification"]["class"], "SuperExponential");
    let p = verdict["stretched_fit"]["exponent"].as_f64().unwrap();
    assert!((p - 1.25).abs() < 0.15, "{p}");

    run(ExperimentKind::Ratio, &config, &opts(tmp.path())).unwrap();
    let mut reader = csv::Reader::from_path(tmp.path().join("ratio.csv")).unwrap();
    let logs: Vec<f64> = reader
        .records()
        .map(|r| r.unwrap()[3].parse().unwrap())
        .collect();
    assert!(logs.len() > 20);
    assert!(logs.windows(2).all(|w| w[1] > w[0]));
    assert_no_orphans(tmp.path());
}

#[test]
fn free_energy_writes_raw_and_summary() {
    let tmp = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::from_toml(
        r#"
        version = 1
        seed = 5
        [potential]
        family = "power_law"
        alpha = 1.0
        [disorder]
        distribution = "gaussian"
        [thermo]
        n = [1, 3]
        beta = 1.0
        samples = 10
        "#,
    )
    .unwrap();
    run(ExperimentKind::FreeEnergy, &config, &opts(tmp.path())).unwrap();
    let raw = std::fs::read_to_string(tmp.path().join("free_energy.csv")).unwrap();
    assert_eq!(raw.lines().next().unwrap(), "n,beta,sample_index,f_n");
    assert_eq!(raw.lines().count(), 21);
    let summary = std::fs::read_to_string(tmp.path().join("free_energy_summary.csv")).unwrap();
    assert_eq!(summary.lines().count(), 3);
    assert_no_orphans(tmp.path());
}

#[test]
fn seed_override_changes_disorder() {
    let text = r#"
        version = 1
        seed = 1
        [potential]
        family = "power_law"
        alpha = 1.0
        [disorder]
        distribution = "gaussian"
        [truncation]
        tolerance = 1e-3
        max_terms = 1000000
        [covariance]
        k = [2]
        t = 1.0
        samples = 50
        "#;
    let tmp = tempfile::tempdir().unwrap();
    let config = ExperimentConfig::from_toml(text).unwrap();
    let a = tmp.path().join("a");
    let b = tmp.path().join("b");
    run(ExperimentKind::Covariance, &config, &opts(&a)).unwrap();
    let options = RunOptions {
        seed: Some(2),
        ..opts(&b)
    };
    run(ExperimentKind::Covariance, &config, &options).unwrap();
    assert_ne!(
        std::fs::read(a.join("covariance.csv")).unwrap(),
        std::fs::read(b.join("covariance.csv")).unwrap()
    );
    assert_eq!(manifest(&b, ExperimentKind::Covariance)["seed"], 2);
}

#[test]
fn missing_sections_are_reported() {
    let tmp = tempfile::tempdir().unwrap();
    let config =
        ExperimentConfig::from_toml("version = 1\n[potential]\nfamily = \"dyadic\"").unwrap();
    let err = run(ExperimentKind::VarianceScan, &config, &opts(tmp.path())).unwrap_err();
    assert!(err.to_string().contains("[disorder]"), "{err}");
    let mismatched = ExperimentConfig::from_toml("version = 1\nkind = \"ratio\"").unwrap();
    assert!(run(ExperimentKind::Verify, &mismatched, &opts(tmp.path())).is_err());
}

#[test]
fn binary_runs_and_reports_errors() {
    let exe = env!("CARGO_BIN_EXE_spinfade");
    let tmp = tempfile::tempdir().unwrap();
    let cfg = tmp.path().join("curve.toml");
    std::fs::write(&cfg, DYADIC_CURVE).unwrap();
    let out = tmp.path().join("out");
    let status = Command::new(exe)
        .args(["curve", "--config"])
        .arg(&cfg)
        .arg("--out")
        .arg(&out)
        .args(["--workers", "2", "--seed", "9"])
        .output()
        .unwrap();
    assert!(
        status.status.success(),
        "{}",
        String::from_utf8_lossy(&status.stderr)
    );
    assert!(out.join("curve.csv").exists());
    assert_eq!(manifest(&out, ExperimentKind::Curve)["workers"], 2);

    let bad = tmp.path().join("bad.toml");
    std::fs::write(
        &bad,
        "version = 1\n[potential]\nfamily = \"power_law\"\nalpha = -1.0\n",
    )
    .unwrap();
    let failed = Command::new(exe)
        .args(["curve", "--config"])
        .arg(&bad)
        .output()
        .unwrap();
    assert!(!failed.status.success());
    assert!(String::from_utf8_lossy(&failed.stderr).contains("alpha"));
}

#[test]
fn shipped_configs_are_valid() {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs");
    let cases = [
        ("curve_dyadic.toml", ExperimentKind::Curve),
        ("disorder_average.toml", ExperimentKind::DisorderAverage),
        ("variance_scan.toml", ExperimentKind::VarianceScan),
        ("covariance.toml", ExperimentKind::Covariance),
        ("decay_bernoulli.toml", ExperimentKind::DecayClassify),
        ("ratio_dyadic.toml", ExperimentKind::Ratio),
        ("free_energy.toml", ExperimentKind::FreeEnergy),
        ("verify.toml", ExperimentKind::Verify),
    ];
    for (file, kind) in cases {
        let config = spinfade_cli::load_config(&dir.join(file)).unwrap();
        config
            .check_for(kind)
            .unwrap_or_else(|e| panic!("{file}: {e}"));
    }
}
