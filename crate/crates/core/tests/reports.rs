use std::path::{Path, PathBuf};

use circulaw::experiments::{
    read_report_csv, read_report_json, report_to_csv, report_to_json, write_report, ExperimentKind, ExperimentReport,
    ReportFormat, ReportMetadata,
};

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn golden() -> ExperimentReport {
    let mut report = ExperimentReport::new(ReportMetadata {
        spec_hash: "abc123".into(),
        seed: 7,
        library_version: "0.1.0".into(),
        kind: ExperimentKind::SvLaw,
    });
    report.push("z=0.5+0i,n=4", "delta_n", 0.25);
    report.push("z=0.5+0i,n=4", "ladder_slope", f64::NAN);
    report
}

#[test]
fn json_matches_golden_file() {
    assert_eq!(
        report_to_json(&golden()),
        std::fs::read_to_string(data("golden_report.json")).unwrap()
    );
    let back = read_report_json(&data("golden_report.json")).unwrap();
    assert_eq!(back.metadata, golden().metadata);
    assert_eq!(back.rows[0], golden().rows[0]);
    assert!(back.rows[1].value.is_nan());
}

#[test]
fn csv_matches_golden_file() {
    assert_eq!(
        report_to_csv(&golden()),
        std::fs::read_to_string(data("golden_report.csv")).unwrap()
    );
    let rows = read_report_csv(&data("golden_report.csv")).unwrap();
    assert_eq!(rows[0], golden().rows[0]);
    assert!(rows[1].value.is_nan());
}

#[test]
fn empty_report_is_header_only() {
    let mut report = golden();
    report.rows.clear();
    assert_eq!(report_to_csv(&report), "spec_hash,label,statistic,value\n");
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("r.json");
    write_report(&report, &path, ReportFormat::Json).unwrap();
    assert!(read_report_json(&path).unwrap().rows.is_empty());
}

#[test]
fn write_errors_carry_the_path() {
    let err = write_report(&golden(), Path::new("/nonexistent-dir/r.csv"), ReportFormat::Csv).unwrap_err();
    assert!(err.to_string().contains("/nonexistent-dir/r.csv"));
}

#[test]
fn schema_violations_are_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.json");
    let text = std::fs::read_to_string(data("golden_report.json"))
        .unwrap()
        .replace("\"seed\"", "\"sneed\"");
    std::fs::write(&path, text).unwrap();
    assert!(matches!(read_report_json(&path), Err(circulaw::Error::Format { .. })));
}
