//! Wide CSV interchange: header `participant_id,<feature>...`, UTF-8, `.` as
//! decimal point, no NaN. A missing participant is a missing row.
//!
//! An optional manifest `<stem>.manifest.json` next to the CSV names the
//! extractor that produced it.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Column, FeatureTable};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExtractorManifest {
    pub extractor: String,
    pub model: String,
    pub version: String,
    pub columns: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub segmentation: Option<String>,
    /// Extractor failure, when the model could not run.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl ExtractorManifest {
    pub fn path_for(csv_path: &Path) -> PathBuf {
        let stem = csv_path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default();
        csv_path.with_file_name(format!("{stem}.manifest.json"))
    }
}

pub fn read_csv<R: Read>(input: R, provenance: &str) -> Result<FeatureTable> {
    let mut reader = csv::ReaderBuilder::new().has_headers(true).from_reader(input);
    let header = reader.headers()?.clone();
    if header.get(0).map(str::trim) != Some("participant_id") {
        return Err(Error::validation(
            "header",
            "first column must be participant_id",
        ));
    }
    let columns: Vec<Column> = header
        .iter()
        .skip(1)
        .map(|n| Column::new(n.trim(), provenance))
        .collect();
    let mut rows = BTreeMap::new();
    for (i, rec) in reader.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        let id = rec.get(0).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(Error::validation(format!("line {line}"), "empty participant_id"));
        }
        if rec.len() != columns.len() + 1 {
            return Err(Error::validation(
                format!("line {line}"),
                format!("{} fields, header has {}", rec.len(), columns.len() + 1),
            ));
        }
        let values = rec
            .iter()
            .skip(1)
            .zip(&columns)
            .map(|(s, c)| {
                let v: f64 = s.trim().parse().map_err(|_| {
                    Error::validation(format!("line {line}, column {}", c.name), format!("{s:?} is not a number"))
                })?;
                if v.is_finite() {
                    Ok(v)
                } else {
                    Err(Error::validation(
                        format!("line {line}, column {}", c.name),
                        "NaN and infinities are not allowed",
                    ))
                }
            })
            .collect::<Result<Vec<_>>>()?;
        if rows.insert(id.clone(), values).is_some() {
            return Err(Error::validation(format!("line {line}"), format!("duplicate participant {id}")));
        }
    }
    FeatureTable::new(columns, rows, BTreeMap::new())
}

/// Reads a feature CSV plus its manifest when one exists.
pub fn read_feature_file(path: &Path) -> Result<FeatureTable> {
    let manifest_path = ExtractorManifest::path_for(path);
    let manifest: Option<ExtractorManifest> = if manifest_path.exists() {
        let text = std::fs::read_to_string(&manifest_path)?;
        Some(serde_json::from_str(&text).map_err(|e| {
            Error::validation(manifest_path.display().to_string(), e.to_string())
        })?)
    } else {
        None
    };
    let provenance = manifest
        .as_ref()
        .map(|m| m.extractor.clone())
        .unwrap_or_else(|| "csv".to_string());
    let file = std::fs::File::open(path)?;
    let mut table = read_csv(std::io::BufReader::new(file), &provenance)?;
    if let Some(m) = manifest {
        if table.column_names() != m.columns.iter().map(String::as_str).collect::<Vec<_>>() {
            return Err(Error::validation(
                manifest_path.display().to_string(),
                "manifest columns do not match CSV header",
            ));
        }
        table = table
            .with_meta(format!("{}.model", m.extractor), m.model)
            .with_meta(format!("{}.version", m.extractor), m.version);
    }
    Ok(table)
}

/// Values are written with Rust's shortest round-trip formatting.
pub fn write_csv<W: Write>(out: W, table: &FeatureTable) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["participant_id".to_string()];
    header.extend(table.columns().iter().map(|c| c.name.clone()));
    w.write_record(&header)?;
    for (id, row) in table.rows() {
        let mut rec = vec![id.clone()];
        rec.extend(row.iter().map(|v| format!("{v:?}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_exact() {
        let t = FeatureTable::from_rows(
            vec![Column::new("a", "csv"), Column::new("b", "csv")],
            [
                ("p2".to_string(), vec![0.1, -3.0e-7]),
                ("p1".to_string(), vec![1.0 / 3.0, 42.0]),
            ],
        )
        .unwrap();
        let mut buf = Vec::new();
        write_csv(&mut buf, &t).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("participant_id,a,b\np1,"));
        let back = read_csv(&buf[..], "csv").unwrap();
        assert_eq!(back, t);
    }

    #[test]
    fn rejects_nan_and_bad_header() {
        assert!(read_csv("participant_id,a\np1,NaN\n".as_bytes(), "x").is_err());
        assert!(read_csv("id,a\np1,1\n".as_bytes(), "x").is_err());
        assert!(read_csv("participant_id,a\np1,1\np1,2\n".as_bytes(), "x").is_err());
        assert!(read_csv("participant_id,a\np1,abc\n".as_bytes(), "x").is_err());
    }

    #[test]
    fn header_only_is_empty_table() {
        let t = read_csv("participant_id,a,b\n".as_bytes(), "x").unwrap();
        assert!(t.is_empty());
        assert_eq!(t.width(), 2);
    }

    #[test]
    fn manifest_is_checked() {
        let dir = tempfile::tempdir().unwrap();
        let csv_path = dir.path().join("causal.csv");
        std::fs::write(&csv_path, "participant_id,causal\np1,0.5\n").unwrap();
        let m = ExtractorManifest {
            extractor: "causal".into(),
            model: "causal-explanation-detector".into(),
            version: "1.0".into(),
            columns: vec!["causal".into()],
            segmentation: Some("sentence".into()),
            error: None,
        };
        let mpath = ExtractorManifest::path_for(&csv_path);
        std::fs::write(&mpath, serde_json::to_string(&m).unwrap()).unwrap();
        let t = read_feature_file(&csv_path).unwrap();
        assert_eq!(t.columns()[0].provenance, "causal");
        assert_eq!(t.meta()["causal.version"], "1.0");

        let mut bad = m.clone();
        bad.columns = vec!["other".into()];
        std::fs::write(&mpath, serde_json::to_string(&bad).unwrap()).unwrap();
        assert!(read_feature_file(&csv_path).is_err());
    }
}
