use std::path::Path;
use std::process::{Command, Output};

use leakprobe::audit::AuditReport;

fn leakprobe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_leakprobe")).args(args).output().unwrap()
}

fn synth(dir: &Path, extra: &[&str]) {
    let mut args = vec!["synth", "--classes", "5", "--per-class", "200", "--bias", "1.0", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    let out = leakprobe(&args);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_then_audit_detects_bias() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("synth");
    synth(&data, &[]);
    let out = leakprobe(&["audit", "--dataset", data.to_str().unwrap(), "--probe", "8px", "--seed", "42", "--format", "json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let report = AuditReport::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert!(report.accuracy_percent > 95.0, "{}", report.accuracy_percent);
    assert_eq!(report.n_classes, 5);

    // identical flags, identical bytes; --out writes the same text
    let again = leakprobe(&["audit", "--dataset", data.to_str().unwrap(), "--probe", "8px", "--seed", "42", "--format", "json", "--threads", "2"]);
    assert_eq!(out.stdout, again.stdout);
    let file = tmp.path().join("r.json");
    let written = leakprobe(&["audit", "--dataset", data.to_str().unwrap(), "--seed", "42", "--format", "json", "--out", file.to_str().unwrap()]);
    assert!(written.status.success());
    assert_eq!(std::fs::read(&file).unwrap(), out.stdout);
}

#[test]
fn text_format_prints_bias_ratio() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("s");
    let out = leakprobe(&["synth", "--classes", "3", "--per-class", "20", "--size", "24x20", "--out", data.to_str().unwrap()]);
    assert!(out.status.success());
    let out = leakprobe(&["audit", "--dataset", data.to_str().unwrap(), "--trees", "10"]);
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("bias ratio"), "{text}");
    assert!(text.contains("random guess"), "{text}");
}

#[test]
fn bogus_probe_is_a_usage_error() {
    let out = leakprobe(&["audit", "--dataset", ".", "--probe", "bogus"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("8px") && err.contains("blur"), "{err}");
}

#[test]
fn missing_input_is_a_usage_error() {
    assert_eq!(leakprobe(&["audit"]).status.code(), Some(1));
    assert_eq!(leakprobe(&["audit", "--dataset", "x", "--idx-images", "y", "--idx-labels", "z"]).status.code(), Some(1));
    assert_eq!(leakprobe(&["audit", "--dataset", "x", "--train-frac", "1.5"]).status.code(), Some(1));
    assert_eq!(leakprobe(&[]).status.code(), Some(1));
}

#[test]
fn data_errors_exit_two_with_stage() {
    let tmp = tempfile::tempdir().unwrap();
    let out = leakprobe(&["audit", "--dataset", tmp.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("ingest"), "{err}");
}

#[test]
fn help_lists_defaults() {
    let out = leakprobe(&["audit", "--help"]);
    assert_eq!(out.status.code(), Some(0));
    let help = String::from_utf8(out.stdout).unwrap();
    for needle in ["[default: 42]", "[default: 0.8]", "[default: 100]", "[default: 8px]", "[default: text]"] {
        assert!(help.contains(needle), "missing {needle} in\n{help}");
    }
}

#[test]
fn version_subcommand() {
    let out = leakprobe(&["version"]);
    assert!(out.status.success());
    assert_eq!(String::from_utf8(out.stdout).unwrap(), format!("leakprobe {}\n", leakprobe::VERSION));
}

#[test]
fn probe_dump_csv() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("s");
    assert!(leakprobe(&["synth", "--classes", "2", "--per-class", "3", "--size", "16x16", "--out", data.to_str().unwrap()]).status.success());
    let out = leakprobe(&["probe-dump", "--dataset", data.to_str().unwrap(), "--probe", "8px"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "path,label,f0,f1,f2,f3,f4,f5,f6,f7");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].contains(",class0,"));

    let blur = leakprobe(&["probe-dump", "--dataset", data.to_str().unwrap(), "--probe", "blur"]);
    assert!(String::from_utf8(blur.stdout).unwrap().starts_with("path,label,f0\n"));
}

#[test]
fn idx_flags_drive_ingestion() {
    let tmp = tempfile::tempdir().unwrap();
    let imgs: Vec<Vec<u8>> = (0..40u8).map(|i| vec![i % 2 * 200; 16]).collect();
    let refs: Vec<&[u8]> = imgs.iter().map(|v| v.as_slice()).collect();
    let labels: Vec<u8> = (0..40u8).map(|i| i % 2).collect();
    let ip = tmp.path().join("i");
    let lp = tmp.path().join("l");
    std::fs::write(&ip, leakprobe::idx::encode_images(4, 4, &refs)).unwrap();
    std::fs::write(&lp, leakprobe::idx::encode_labels(&labels)).unwrap();
    let out = leakprobe(&["audit", "--idx-images", ip.to_str().unwrap(), "--idx-labels", lp.to_str().unwrap(), "--format", "json", "--trees", "5"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let r = AuditReport::from_json(std::str::from_utf8(&out.stdout).unwrap()).unwrap();
    assert_eq!(r.n_classes, 10);
    assert_eq!(r.accuracy_percent, 100.0);
}

#[test]
fn blur_triplet_from_written_trees() {
    let tmp = tempfile::tempdir().unwrap();
    let data = tmp.path().join("img");
    let fg = tmp.path().join("fg");
    let out = leakprobe(&[
        "synth", "--classes", "4", "--per-class", "40", "--bias-channel", "blur", "--out", data.to_str().unwrap(),
        "--foreground-out", fg.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = leakprobe(&["blur-triplet", "--dataset", data.to_str().unwrap(), "--foreground", fg.to_str().unwrap(), "--format", "json", "--trees", "30"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let reports: Vec<AuditReport> = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(reports.len(), 3);
    assert!(reports[1].dataset_name.ends_with("_fg_blur"));
    assert_eq!(reports[1].probe_settings.blur_region, leakprobe::BlurRegion::Unmasked);
    assert_eq!(reports[0].probe_settings.blur_region, leakprobe::BlurRegion::FullFrame);

    let whole = leakprobe(&[
        "blur-triplet", "--dataset", data.to_str().unwrap(), "--foreground", fg.to_str().unwrap(),
        "--blur-region", "full-frame", "--format", "json", "--trees", "30",
    ]);
    assert!(whole.status.success());
    let reports: Vec<AuditReport> = serde_json::from_slice(&whole.stdout).unwrap();
    assert_eq!(reports[2].probe_settings.blur_region, leakprobe::BlurRegion::FullFrame);

    let text = leakprobe(&["blur-triplet", "--dataset", data.to_str().unwrap(), "--foreground", fg.to_str().unwrap(), "--trees", "10"]);
    let text = String::from_utf8(text.stdout).unwrap();
    assert!(text.contains("unmasked pixels only") && text.contains("random guess"), "{text}");
}
