use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureTable;
use crate::scoring::CognitiveStyleClass;

/// Standardized mean difference, members minus non-members, over the pooled
/// sample standard deviation.
pub fn cohens_d(values: &[f64], in_class: &[bool]) -> Result<f64> {
    if values.len() != in_class.len() {
        return Err(Error::validation(
            "in_class",
            format!("{} flags for {} values", in_class.len(), values.len()),
        ));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::validation("values", "non-finite value"));
    }
    let group = |flag: bool| -> Vec<f64> {
        values
            .iter()
            .zip(in_class)
            .filter(|(_, &f)| f == flag)
            .map(|(v, _)| *v)
            .collect()
    };
    let (a, b) = (group(true), group(false));
    if a.len() < 2 || b.len() < 2 {
        return Err(Error::UndefinedMetric(format!(
            "Cohen's d needs two members per group (got {} and {})",
            a.len(),
            b.len()
        )));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let ss = |v: &[f64], m: f64| v.iter().map(|x| (x - m) * (x - m)).sum::<f64>();
    let (ma, mb) = (mean(&a), mean(&b));
    let pooled = ((ss(&a, ma) + ss(&b, mb)) / (a.len() + b.len() - 2) as f64).sqrt();
    if pooled == 0.0 || pooled <= 1e-14 * ma.abs().max(mb.abs()) {
        return Err(Error::UndefinedMetric("pooled standard deviation is zero".into()));
    }
    Ok((ma - mb) / pooled)
}

/// Cohen's d for every (feature, class) pair, class versus rest. Cells where
/// d is undefined are absent.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectSizeTable {
    pub features: Vec<String>,
    pub entries: BTreeMap<String, BTreeMap<CognitiveStyleClass, f64>>,
}

impl EffectSizeTable {
    pub fn get(&self, feature: &str, class: CognitiveStyleClass) -> Option<f64> {
        self.entries.get(feature)?.get(&class).copied()
    }

    /// One row per feature, one column per class; undefined cells are empty.
    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec!["feature".to_string()];
        header.extend(CognitiveStyleClass::ALL.iter().map(|c| c.as_str().to_string()));
        w.write_record(&header)?;
        for f in &self.features {
            let mut rec = vec![f.clone()];
            for c in CognitiveStyleClass::ALL {
                rec.push(self.get(f, c).map(|d| format!("{d:?}")).unwrap_or_default());
            }
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Rows of `table` without a label are ignored; labels without a row are an
/// error.
pub fn effect_size_table(
    table: &FeatureTable,
    labels: &BTreeMap<String, CognitiveStyleClass>,
) -> Result<EffectSizeTable> {
    if let Some(id) = labels.keys().find(|id| table.row(id).is_none()) {
        return Err(Error::validation(
            format!("participant {id}"),
            "labelled participant has no feature row",
        ));
    }
    let ids: Vec<&str> = labels.keys().map(String::as_str).collect();
    let x = table.matrix(ids.iter().copied())?;
    let y: Vec<CognitiveStyleClass> = labels.values().copied().collect();
    let mut entries = BTreeMap::new();
    for (j, col) in table.columns().iter().enumerate() {
        let values: Vec<f64> = x.iter().map(|r| r[j]).collect();
        let mut row = BTreeMap::new();
        for class in CognitiveStyleClass::ALL {
            let in_class: Vec<bool> = y.iter().map(|&c| c == class).collect();
            match cohens_d(&values, &in_class) {
                Ok(d) => {
                    row.insert(class, d);
                }
                Err(Error::UndefinedMetric(why)) => {
                    log::debug!("effect size {} / {class}: {why}", col.name);
                }
                Err(e) => return Err(e),
            }
        }
        entries.insert(col.name.clone(), row);
    }
    Ok(EffectSizeTable {
        features: table.column_names().into_iter().map(String::from).collect(),
        entries,
    })
}
