use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;

use super::ExperimentKind;
use crate::error::{Error, Result};
use crate::measures::csv_error;

/// One named statistic.
#[derive(Clone, Debug, PartialEq)]
pub struct ReportRow {
    pub spec_hash: String,
    pub label: String,
    pub statistic: String,
    pub value: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReportMetadata {
    pub spec_hash: String,
    pub seed: u64,
    pub library_version: String,
    pub kind: ExperimentKind,
}

/// Statistics of one experiment run. Wall time is kept out of the
/// serialized forms so reruns are byte-identical.
#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentReport {
    pub metadata: ReportMetadata,
    pub rows: Vec<ReportRow>,
    pub wall_time_secs: Option<f64>,
}

impl ExperimentReport {
    pub fn new(metadata: ReportMetadata) -> Self {
        Self {
            metadata,
            rows: Vec::new(),
            wall_time_secs: None,
        }
    }

    pub fn push(&mut self, label: impl Into<String>, statistic: impl Into<String>, value: f64) {
        self.rows.push(ReportRow {
            spec_hash: self.metadata.spec_hash.clone(),
            label: label.into(),
            statistic: statistic.into(),
            value,
        });
    }

    /// First row with this label and statistic.
    pub fn get(&self, label: &str, statistic: &str) -> Option<f64> {
        self.rows
            .iter()
            .find(|r| r.label == label && r.statistic == statistic)
            .map(|r| r.value)
    }

    /// All rows carrying this statistic, in report order.
    pub fn values_of(&self, statistic: &str) -> Vec<(&str, f64)> {
        self.rows
            .iter()
            .filter(|r| r.statistic == statistic)
            .map(|r| (r.label.as_str(), r.value))
            .collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    Csv,
    Json,
}

impl ReportFormat {
    /// `json` for a `.json` extension, CSV otherwise.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("json") => ReportFormat::Json,
            _ => ReportFormat::Csv,
        }
    }
}

impl std::str::FromStr for ReportFormat {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "csv" => Ok(ReportFormat::Csv),
            "json" => Ok(ReportFormat::Json),
            other => Err(Error::Usage(format!("unknown report format {other:?}"))),
        }
    }
}

/// 17 significant digits; non-finite values spelled `NaN`, `inf`, `-inf`.
pub fn format_value(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.16e}")
    } else {
        v.to_string()
    }
}

#[derive(Serialize)]
struct JsonRowOut<'a> {
    spec_hash: &'a str,
    label: &'a str,
    statistic: &'a str,
    value: Box<RawValue>,
}

#[derive(Serialize)]
struct JsonReportOut<'a> {
    metadata: &'a ReportMetadata,
    rows: Vec<JsonRowOut<'a>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonRowIn {
    spec_hash: String,
    label: String,
    statistic: String,
    value: Option<f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct JsonReportIn {
    metadata: ReportMetadata,
    rows: Vec<JsonRowIn>,
}

/// Report as JSON text. Values are JSON numbers with 17 significant digits;
/// non-finite values become `null`.
pub fn report_to_json(report: &ExperimentReport) -> String {
    let rows = report
        .rows
        .iter()
        .map(|r| JsonRowOut {
            spec_hash: &r.spec_hash,
            label: &r.label,
            statistic: &r.statistic,
            value: RawValue::from_string(if r.value.is_finite() {
                format!("{:.16e}", r.value)
            } else {
                "null".into()
            })
            .expect("formatted float is valid JSON"),
        })
        .collect();
    let mut text = serde_json::to_string_pretty(&JsonReportOut {
        metadata: &report.metadata,
        rows,
    })
    .expect("report serializes");
    text.push('\n');
    text
}

/// Report rows as CSV text with header `spec_hash,label,statistic,value`.
pub fn report_to_csv(report: &ExperimentReport) -> String {
    let mut w = csv::WriterBuilder::new()
        .terminator(csv::Terminator::Any(b'\n'))
        .from_writer(Vec::new());
    w.write_record(["spec_hash", "label", "statistic", "value"])
        .expect("writing to memory");
    for r in &report.rows {
        w.write_record([r.spec_hash.as_str(), &r.label, &r.statistic, &format_value(r.value)])
            .expect("writing to memory");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("UTF-8 fields")
}

pub fn write_report(report: &ExperimentReport, path: &Path, format: ReportFormat) -> Result<()> {
    let text = match format {
        ReportFormat::Csv => report_to_csv(report),
        ReportFormat::Json => report_to_json(report),
    };
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_report_json(path: &Path) -> Result<ExperimentReport> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let raw: JsonReportIn = serde_json::from_str(&text).map_err(|e| Error::format(path, e.to_string()))?;
    Ok(ExperimentReport {
        metadata: raw.metadata,
        rows: raw
            .rows
            .into_iter()
            .map(|r| ReportRow {
                spec_hash: r.spec_hash,
                label: r.label,
                statistic: r.statistic,
                value: r.value.unwrap_or(f64::NAN),
            })
            .collect(),
        wall_time_secs: None,
    })
}

/// Rows of a CSV report; the metadata is not part of the CSV form.
pub fn read_report_csv(path: &Path) -> Result<Vec<ReportRow>> {
    let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let headers = reader.headers().map_err(|e| csv_error(path, e))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["spec_hash", "label", "statistic", "value"] {
        return Err(Error::format(path, "expected header spec_hash,label,statistic,value"));
    }
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record.map_err(|e| csv_error(path, e))?;
        let value = record[3]
            .parse::<f64>()
            .map_err(|_| Error::format(path, format!("line {}: malformed value {:?}", i + 2, &record[3])))?;
        rows.push(ReportRow {
            spec_hash: record[0].to_string(),
            label: record[1].to_string(),
            statistic: record[2].to_string(),
            value,
        });
    }
    Ok(rows)
}
