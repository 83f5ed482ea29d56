//! CSV / JSON report emission and parsing.
//!
//! CSV reports open with `#`-prefixed header lines (tool version, command,
//! config as JSON, seeds), then a column header and one line per row. JSON
//! reports carry the same header fields next to a `rows` array. Floats are
//! written with the shortest representation that parses back to the same
//! value, and field order follows struct declaration order, so identical
//! inputs give byte-identical output.

use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("malformed report: {0}")]
    Format(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ReportFormat {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for ReportFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "csv" => Ok(Self::Csv),
            "json" => Ok(Self::Json),
            other => Err(format!("unknown format {other:?} (expected csv or json)")),
        }
    }
}

/// A row type with a fixed column list matching its serialized field order.
pub trait ReportRow: Serialize + DeserializeOwned {
    const COLUMNS: &'static [&'static str];
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportHeader {
    pub version: String,
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report<R> {
    #[serde(flatten)]
    pub header: ReportHeader,
    pub rows: Vec<R>,
}

fn to_csv<R: ReportRow>(report: &Report<R>) -> Result<String, ReportError> {
    let h = &report.header;
    let mut out = format!(
        "# {}\n# command: {}\n# config: {}\n# seeds: {}\n",
        h.version,
        h.command,
        serde_json::to_string(&h.config)?,
        h.seeds
    );
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(R::COLUMNS)?;
    for row in &report.rows {
        w.serialize(row)?;
    }
    let bytes = w.into_inner().map_err(|e| ReportError::Format(e.to_string()))?;
    out.push_str(&String::from_utf8(bytes).map_err(|e| ReportError::Format(e.to_string()))?);
    Ok(out)
}

/// Renders a report in the requested format.
pub fn render<R: ReportRow>(report: &Report<R>, format: ReportFormat) -> Result<String, ReportError> {
    match format {
        ReportFormat::Csv => to_csv(report),
        ReportFormat::Json => {
            let mut s = serde_json::to_string_pretty(report)?;
            s.push('\n');
            Ok(s)
        }
    }
}

/// Renders and writes the report; returns the rendered text.
pub fn emit_report<R: ReportRow>(report: &Report<R>, path: &Path, format: ReportFormat) -> Result<String, ReportError> {
    let text = render(report, format)?;
    fs::write(path, &text).map_err(|source| ReportError::Io { path: path.to_path_buf(), source })?;
    Ok(text)
}

fn header_field<'a>(lines: &[&'a str], key: &str) -> Result<&'a str, ReportError> {
    let prefix = format!("# {key}: ");
    lines
        .iter()
        .find_map(|l| l.strip_prefix(prefix.as_str()))
        .ok_or_else(|| ReportError::Format(format!("missing header line {key:?}")))
}

/// Parses a CSV report produced by [`render`].
pub fn parse_csv<R: ReportRow>(text: &str) -> Result<Report<R>, ReportError> {
    let comments: Vec<&str> = text.lines().take_while(|l| l.starts_with('#')).collect();
    let version = comments
        .first()
        .and_then(|l| l.strip_prefix("# "))
        .ok_or_else(|| ReportError::Format("missing version line".into()))?
        .to_string();
    let header = ReportHeader {
        version,
        command: header_field(&comments, "command")?.to_string(),
        config: serde_json::from_str(header_field(&comments, "config")?)?,
        seeds: header_field(&comments, "seeds")?.to_string(),
    };
    let mut rdr = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .has_headers(true)
        .from_reader(text.as_bytes());
    let cols: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if cols != R::COLUMNS {
        return Err(ReportError::Format(format!("unexpected columns {cols:?}")));
    }
    let rows = rdr.deserialize().collect::<Result<Vec<R>, _>>()?;
    Ok(Report { header, rows })
}

pub fn parse_json<R: ReportRow>(text: &str) -> Result<Report<R>, ReportError> {
    Ok(serde_json::from_str(text)?)
}

pub fn parse<R: ReportRow>(text: &str, format: ReportFormat) -> Result<Report<R>, ReportError> {
    match format {
        ReportFormat::Csv => parse_csv(text),
        ReportFormat::Json => parse_json(text),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
    struct Row {
        name: String,
        x: f64,
        y: Option<f64>,
        ok: bool,
    }

    impl ReportRow for Row {
        const COLUMNS: &'static [&'static str] = &["name", "x", "y", "ok"];
    }

    fn header() -> ReportHeader {
        ReportHeader {
            version: "colnorm test".into(),
            command: "unit".into(),
            config: serde_json::json!({"d": 3, "p": 4.0}),
            seeds: "0..2".into(),
        }
    }

    #[test]
    fn empty_csv_is_header_only() {
        let rep: Report<Row> = Report { header: header(), rows: vec![] };
        let text = render(&rep, ReportFormat::Csv).unwrap();
        assert_eq!(text.lines().last(), Some("name,x,y,ok"));
        assert_eq!(parse_csv::<Row>(&text).unwrap(), rep);
    }

    #[test]
    fn csv_and_json_round_trip() {
        let rep = Report {
            header: header(),
            rows: vec![
                Row { name: "a".into(), x: 0.1 + 0.2, y: None, ok: true },
                Row { name: "b".into(), x: 1e-300, y: Some(-7.5233), ok: false },
            ],
        };
        for fmt in [ReportFormat::Csv, ReportFormat::Json] {
            let text = render(&rep, fmt).unwrap();
            let back = match fmt {
                ReportFormat::Csv => parse_csv::<Row>(&text).unwrap(),
                ReportFormat::Json => parse_json::<Row>(&text).unwrap(),
            };
            assert_eq!(back, rep);
            assert_eq!(render(&back, fmt).unwrap(), text);
        }
    }

    #[test]
    fn wrong_columns_rejected() {
        let text = "# v\n# command: c\n# config: {}\n# seeds: s\nname,x\n";
        assert!(parse_csv::<Row>(text).is_err());
    }
}
