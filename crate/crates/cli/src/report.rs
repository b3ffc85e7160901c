//! JSON and CSV report files.
//!
//! Every float is printed with 17 significant digits so a report parses
//! back to the exact `f64` it came from.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::Serialize;
use serde_json::{Map, Number, Value};

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error("refusing to write an empty report to {0}")]
    Empty(PathBuf),
    #[error("field {field:?} of a CSV record is not a scalar")]
    NotFlat { field: String },
    #[error("CSV record is not an object")]
    NotAnObject,
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("serialization failed: {0}")]
    Serialize(#[from] serde_json::Error),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Format {
    Json,
    Csv,
}

impl Format {
    pub fn extension(self) -> &'static str {
        match self {
            Format::Json => "json",
            Format::Csv => "csv",
        }
    }
}

/// Artifact version plus the configuration that produced the report.
#[derive(Debug, Clone, Serialize)]
pub struct ReportHeader {
    pub version: String,
    pub config: Value,
}

impl ReportHeader {
    pub fn new(config: &impl Serialize) -> Result<Self, ReportError> {
        Ok(Self {
            version: format!("apriori {}", env!("CARGO_PKG_VERSION")),
            config: canonical(serde_json::to_value(config)?),
        })
    }
}

pub fn format_float(v: f64) -> String {
    format!("{v:.16e}")
}

/// Rewrites every non-integer number with 17 significant digits.
pub fn canonical(value: Value) -> Value {
    match value {
        Value::Number(n) if !(n.is_i64() || n.is_u64()) => {
            let v = n.as_f64().expect("JSON numbers are finite");
            Value::Number(Number::from_str(&format_float(v)).expect("scientific notation is valid JSON"))
        }
        Value::Array(items) => Value::Array(items.into_iter().map(canonical).collect()),
        Value::Object(map) => Value::Object(map.into_iter().map(|(k, v)| (k, canonical(v))).collect()),
        other => other,
    }
}

fn io_error(path: &Path) -> impl FnOnce(std::io::Error) -> ReportError + '_ {
    move |source| ReportError::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn csv_cell(field: &str, value: &Value) -> Result<String, ReportError> {
    match value {
        Value::Null => Ok(String::new()),
        Value::Bool(b) => Ok(b.to_string()),
        Value::Number(n) => Ok(n.to_string()),
        Value::String(s) => Ok(s.clone()),
        Value::Array(_) | Value::Object(_) => Err(ReportError::NotFlat {
            field: field.to_string(),
        }),
    }
}

fn csv_bytes(header: &ReportHeader, rows: &[Map<String, Value>]) -> Result<Vec<u8>, ReportError> {
    let mut out = Vec::new();
    writeln!(out, "# {}", header.version).expect("writing to memory");
    writeln!(out, "# config {}", serde_json::to_string(&header.config)?).expect("writing to memory");
    let columns: Vec<&String> = rows[0].keys().collect();
    let mut writer = csv::Writer::from_writer(out);
    let csv_err = |e: csv::Error| ReportError::Io {
        path: PathBuf::new(),
        source: e.into(),
    };
    writer.write_record(&columns).map_err(csv_err)?;
    for row in rows {
        let cells = columns
            .iter()
            .map(|c| csv_cell(c, row.get(*c).unwrap_or(&Value::Null)))
            .collect::<Result<Vec<_>, _>>()?;
        writer.write_record(&cells).map_err(csv_err)?;
    }
    writer.into_inner().map_err(|e| ReportError::Io {
        path: PathBuf::new(),
        source: e.into_error(),
    })
}

/// Renders `records` in `format`. CSV needs flat objects with a common
/// field order; the first record fixes the columns.
pub fn render<R: Serialize>(records: &[R], format: Format, header: &ReportHeader) -> Result<Vec<u8>, ReportError> {
    let values = records
        .iter()
        .map(|r| serde_json::to_value(r).map(canonical))
        .collect::<Result<Vec<_>, _>>()?;
    match format {
        Format::Json => {
            let mut doc = Map::new();
            doc.insert("version".into(), Value::String(header.version.clone()));
            doc.insert("config".into(), header.config.clone());
            doc.insert("records".into(), Value::Array(values));
            let mut bytes = serde_json::to_vec_pretty(&Value::Object(doc))?;
            bytes.push(b'\n');
            Ok(bytes)
        }
        Format::Csv => {
            let rows = values
                .into_iter()
                .map(|v| match v {
                    Value::Object(map) => Ok(map),
                    _ => Err(ReportError::NotAnObject),
                })
                .collect::<Result<Vec<_>, _>>()?;
            csv_bytes(header, &rows)
        }
    }
}

pub fn write_report<R: Serialize>(
    records: &[R],
    format: Format,
    path: &Path,
    header: &ReportHeader,
) -> Result<(), ReportError> {
    if records.is_empty() {
        return Err(ReportError::Empty(path.to_path_buf()));
    }
    let bytes = render(records, format, header)?;
    let file = File::create(path).map_err(io_error(path))?;
    let mut out = BufWriter::new(file);
    out.write_all(&bytes).map_err(io_error(path))?;
    out.flush().map_err(io_error(path))
}
