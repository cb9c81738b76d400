//! Participant-by-feature tables and their CSV interchange format.
//!
//! A table is immutable once built; every operation returns a new table.
//! Rows are keyed and ordered by participant id.

mod aggregate;
mod io;
mod transform;

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use aggregate::{
    aggregate_annotations, aggregate_mean_probability, aggregate_proportion, average_embeddings,
    read_annotations, AnnotationKind, MessageUnitAnnotation, UnitValue,
};
pub use io::{read_csv, read_feature_file, write_csv, ExtractorManifest};
pub use transform::{reduce_dimensions, standardize, Pca, Standardizer};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Column {
    pub name: String,
    /// Where the column came from (extractor name, `pca`, `synthetic`, ...).
    pub provenance: String,
}

impl Column {
    pub fn new(name: impl Into<String>, provenance: impl Into<String>) -> Self {
        Column {
            name: name.into(),
            provenance: provenance.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureTable {
    columns: Vec<Column>,
    rows: BTreeMap<String, Vec<f64>>,
    meta: BTreeMap<String, String>,
}

impl FeatureTable {
    pub fn new(
        columns: Vec<Column>,
        rows: BTreeMap<String, Vec<f64>>,
        meta: BTreeMap<String, String>,
    ) -> Result<Self> {
        let mut names = BTreeSet::new();
        for c in &columns {
            if !names.insert(c.name.as_str()) {
                return Err(Error::validation(
                    format!("column {}", c.name),
                    "duplicate column name",
                ));
            }
        }
        for (id, row) in &rows {
            if row.len() != columns.len() {
                return Err(Error::validation(
                    format!("row {id}"),
                    format!("{} values for {} columns", row.len(), columns.len()),
                ));
            }
            if let Some(j) = row.iter().position(|v| !v.is_finite()) {
                return Err(Error::validation(
                    format!("row {id}, column {}", columns[j].name),
                    "non-finite value",
                ));
            }
        }
        Ok(FeatureTable { columns, rows, meta })
    }

    /// Builds from `(id, values)` pairs, rejecting duplicate ids.
    pub fn from_rows(
        columns: Vec<Column>,
        rows: impl IntoIterator<Item = (String, Vec<f64>)>,
    ) -> Result<Self> {
        let mut map = BTreeMap::new();
        for (id, v) in rows {
            if map.insert(id.clone(), v).is_some() {
                return Err(Error::validation(format!("row {id}"), "duplicate participant id"));
            }
        }
        FeatureTable::new(columns, map, BTreeMap::new())
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_names(&self) -> Vec<&str> {
        self.columns.iter().map(|c| c.name.as_str()).collect()
    }

    pub fn width(&self) -> usize {
        self.columns.len()
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(String::as_str)
    }

    pub fn row(&self, id: &str) -> Option<&[f64]> {
        self.rows.get(id).map(Vec::as_slice)
    }

    pub fn rows(&self) -> &BTreeMap<String, Vec<f64>> {
        &self.rows
    }

    pub fn meta(&self) -> &BTreeMap<String, String> {
        &self.meta
    }

    pub fn with_meta(mut self, key: impl Into<String>, value: impl Into<String>) -> Self {
        self.meta.insert(key.into(), value.into());
        self
    }

    pub fn column_index(&self, name: &str) -> Option<usize> {
        self.columns.iter().position(|c| c.name == name)
    }

    pub fn column_values(&self, name: &str) -> Option<Vec<f64>> {
        let j = self.column_index(name)?;
        Some(self.rows.values().map(|r| r[j]).collect())
    }

    /// Keeps the named columns, in the order given.
    pub fn select(&self, names: &[&str]) -> Result<FeatureTable> {
        let idx = names
            .iter()
            .map(|n| {
                self.column_index(n)
                    .ok_or_else(|| Error::validation(format!("column {n}"), "no such column"))
            })
            .collect::<Result<Vec<_>>>()?;
        let columns = idx.iter().map(|&j| self.columns[j].clone()).collect();
        let rows = self
            .rows
            .iter()
            .map(|(id, r)| (id.clone(), idx.iter().map(|&j| r[j]).collect()))
            .collect();
        FeatureTable::new(columns, rows, self.meta.clone())
    }

    /// Keeps the rows whose ids are listed; unknown ids are ignored.
    pub fn filter_rows<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> FeatureTable {
        let rows = ids
            .into_iter()
            .filter_map(|id| self.rows.get_key_value(id))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        FeatureTable {
            columns: self.columns.clone(),
            rows,
            meta: self.meta.clone(),
        }
    }

    /// Row vectors for the given ids, in the order given.
    pub fn matrix<'a>(&self, ids: impl IntoIterator<Item = &'a str>) -> Result<Vec<Vec<f64>>> {
        ids.into_iter()
            .map(|id| {
                self.rows
                    .get(id)
                    .cloned()
                    .ok_or_else(|| Error::validation(format!("row {id}"), "no such participant"))
            })
            .collect()
    }
}

/// Inner join on participant id. Participants missing from any table are
/// dropped and logged.
pub fn join_features(tables: &[FeatureTable]) -> Result<FeatureTable> {
    let Some(first) = tables.first() else {
        return FeatureTable::new(Vec::new(), BTreeMap::new(), BTreeMap::new());
    };
    let mut names = BTreeSet::new();
    for t in tables {
        for c in &t.columns {
            if !names.insert(c.name.clone()) {
                return Err(Error::validation(
                    format!("column {}", c.name),
                    "duplicate column name across joined tables",
                ));
            }
        }
    }
    let all_ids: BTreeSet<&str> = tables.iter().flat_map(|t| t.ids()).collect();
    let mut rows = BTreeMap::new();
    let mut dropped = 0usize;
    for id in first.ids() {
        if tables.iter().all(|t| t.rows.contains_key(id)) {
            let row = tables.iter().flat_map(|t| t.rows[id].iter().copied()).collect();
            rows.insert(id.to_string(), row);
        }
    }
    for id in &all_ids {
        if !rows.contains_key(*id) {
            dropped += 1;
            log::debug!("join: dropping participant {id}");
        }
    }
    if dropped > 0 {
        log::warn!("join: {dropped} participant(s) missing from at least one table were dropped");
    }
    if rows.is_empty() && !all_ids.is_empty() {
        log::warn!("join: no participant present in every table; result is empty");
    }
    let columns = tables.iter().flat_map(|t| t.columns.clone()).collect();
    let mut meta = BTreeMap::new();
    for t in tables {
        for (k, v) in &t.meta {
            meta.entry(k.clone()).or_insert_with(|| v.clone());
        }
    }
    FeatureTable::new(columns, rows, meta)
}
