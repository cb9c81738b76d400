//! Per-participant aggregation of per-unit extractor outputs.
//!
//! Each essay pair is split into discourse units upstream; flags become
//! proportions over units, probabilities become means, and relation
//! embeddings are averaged elementwise.

use std::collections::BTreeMap;
use std::io::BufRead;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::{Column, FeatureTable};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnnotationKind {
    CausalFlag,
    CounterfactualFlag,
    DissonanceProb,
    ConsonanceProb,
    RelationEmbedding,
}

impl AnnotationKind {
    /// Output column name (or prefix, for embeddings).
    pub fn column_name(self) -> &'static str {
        match self {
            AnnotationKind::CausalFlag => "causal",
            AnnotationKind::CounterfactualFlag => "counterfactual",
            AnnotationKind::DissonanceProb => "dissonance",
            AnnotationKind::ConsonanceProb => "consonance",
            AnnotationKind::RelationEmbedding => "discre_",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum UnitValue {
    Flag(bool),
    Probability(f64),
    Vector(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MessageUnitAnnotation {
    pub participant_id: String,
    pub unit_index: usize,
    pub kind: AnnotationKind,
    pub value: UnitValue,
}

pub fn aggregate_proportion(flags: &[bool]) -> Result<f64> {
    if flags.is_empty() {
        return Err(Error::UndefinedMetric("proportion of an empty unit list".into()));
    }
    Ok(flags.iter().filter(|&&f| f).count() as f64 / flags.len() as f64)
}

pub fn aggregate_mean_probability(probs: &[f64]) -> Result<f64> {
    if probs.is_empty() {
        return Err(Error::UndefinedMetric("mean of an empty unit list".into()));
    }
    if let Some(p) = probs.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::validation("probability", format!("{p} is outside [0, 1]")));
    }
    Ok(probs.iter().sum::<f64>() / probs.len() as f64)
}

pub fn average_embeddings(vectors: &[Vec<f64>]) -> Result<Vec<f64>> {
    let Some(first) = vectors.first() else {
        return Err(Error::UndefinedMetric("average of no embeddings".into()));
    };
    let dim = first.len();
    let mut sum = vec![0.0; dim];
    for (i, v) in vectors.iter().enumerate() {
        if v.len() != dim {
            return Err(Error::validation(
                format!("embedding {i}"),
                format!("dimension {} differs from {dim}", v.len()),
            ));
        }
        for (s, x) in sum.iter_mut().zip(v) {
            *s += x;
        }
    }
    let n = vectors.len() as f64;
    Ok(sum.into_iter().map(|s| s / n).collect())
}

/// Reads newline-delimited annotations.
pub fn read_annotations<R: BufRead>(input: R) -> Result<Vec<MessageUnitAnnotation>> {
    let mut out = Vec::new();
    for (i, line) in input.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let a: MessageUnitAnnotation = serde_json::from_str(&line).map_err(|e| {
            Error::validation(format!("annotation line {}", i + 1), e.to_string())
        })?;
        out.push(a);
    }
    Ok(out)
}

/// Aggregates every annotation of `kind` into a per-participant table.
/// Participants with no usable units of that kind are left out (and logged).
pub fn aggregate_annotations(
    annotations: &[MessageUnitAnnotation],
    kind: AnnotationKind,
) -> Result<FeatureTable> {
    let mut per: BTreeMap<&str, Vec<&UnitValue>> = BTreeMap::new();
    for a in annotations.iter().filter(|a| a.kind == kind) {
        per.entry(a.participant_id.as_str()).or_default().push(&a.value);
    }

    let mut rows = BTreeMap::new();
    let mut dim = None;
    for (id, values) in per {
        let field = |what: &str| format!("{id}: {what}");
        let row = match kind {
            AnnotationKind::CausalFlag | AnnotationKind::CounterfactualFlag => {
                let flags = values
                    .iter()
                    .map(|v| match v {
                        UnitValue::Flag(b) => Ok(*b),
                        _ => Err(Error::validation(field("value"), "expected a boolean flag")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                vec![aggregate_proportion(&flags)?]
            }
            AnnotationKind::DissonanceProb | AnnotationKind::ConsonanceProb => {
                let probs = values
                    .iter()
                    .map(|v| match v {
                        UnitValue::Probability(p) => Ok(*p),
                        _ => Err(Error::validation(field("value"), "expected a probability")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                vec![aggregate_mean_probability(&probs)?]
            }
            AnnotationKind::RelationEmbedding => {
                let vecs = values
                    .iter()
                    .map(|v| match v {
                        UnitValue::Vector(x) => Ok(x.clone()),
                        _ => Err(Error::validation(field("value"), "expected a vector")),
                    })
                    .collect::<Result<Vec<_>>>()?;
                let avg = average_embeddings(&vecs)?;
                match dim {
                    None => dim = Some(avg.len()),
                    Some(d) if d != avg.len() => {
                        return Err(Error::validation(
                            field("embedding"),
                            format!("dimension {} differs from {d}", avg.len()),
                        ))
                    }
                    _ => {}
                }
                avg
            }
        };
        rows.insert(id.to_string(), row);
    }

    let columns = match kind {
        AnnotationKind::RelationEmbedding => (0..dim.unwrap_or(0))
            .map(|i| Column::new(format!("discre_{}", i + 1), "relation_embedding"))
            .collect(),
        k => vec![Column::new(k.column_name(), format!("{k:?}"))],
    };
    FeatureTable::new(columns, rows, BTreeMap::new())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn proportion_examples() {
        assert_eq!(aggregate_proportion(&[true, false]).unwrap(), 0.5);
        assert_eq!(aggregate_proportion(&[false, false, false]).unwrap(), 0.0);
        assert_eq!(aggregate_proportion(&[true, true, true, false]).unwrap(), 0.75);
        assert!(aggregate_proportion(&[]).is_err());
    }

    #[test]
    fn mean_probability_examples() {
        assert!((aggregate_mean_probability(&[0.2, 0.4]).unwrap() - 0.3).abs() < 1e-15);
        assert_eq!(aggregate_mean_probability(&[1.0]).unwrap(), 1.0);
        assert!((aggregate_mean_probability(&[0.1, 0.2, 0.9]).unwrap() - 0.4).abs() < 1e-15);
        assert!(matches!(
            aggregate_mean_probability(&[0.2, 1.5]),
            Err(Error::Validation { .. })
        ));
    }

    #[test]
    fn embedding_examples() {
        assert_eq!(
            average_embeddings(&[vec![0.0, 2.0], vec![2.0, 0.0]]).unwrap(),
            vec![1.0, 1.0]
        );
        assert_eq!(average_embeddings(&[vec![0.5, -1.0]]).unwrap(), vec![0.5, -1.0]);
        assert_eq!(
            average_embeddings(&[vec![1.0; 3], vec![3.0; 3], vec![5.0; 3]]).unwrap(),
            vec![3.0; 3]
        );
        assert!(average_embeddings(&[vec![1.0], vec![1.0, 2.0]]).is_err());
    }

    #[test]
    fn annotations_to_tables() {
        let lines = r#"
{"participant_id":"p1","unit_index":0,"kind":"causal_flag","value":true}
{"participant_id":"p1","unit_index":1,"kind":"causal_flag","value":false}
{"participant_id":"p2","unit_index":0,"kind":"causal_flag","value":true}
{"participant_id":"p1","unit_index":0,"kind":"dissonance_prob","value":0.25}
{"participant_id":"p1","unit_index":0,"kind":"relation_embedding","value":[1.0,3.0]}
{"participant_id":"p1","unit_index":1,"kind":"relation_embedding","value":[3.0,5.0]}
"#;
        let anns = read_annotations(lines.as_bytes()).unwrap();
        let causal = aggregate_annotations(&anns, AnnotationKind::CausalFlag).unwrap();
        assert_eq!(causal.row("p1").unwrap(), &[0.5]);
        assert_eq!(causal.row("p2").unwrap(), &[1.0]);
        let dis = aggregate_annotations(&anns, AnnotationKind::DissonanceProb).unwrap();
        // p2 has no dissonance units: absent, not zero
        assert!(dis.row("p2").is_none());
        let emb = aggregate_annotations(&anns, AnnotationKind::RelationEmbedding).unwrap();
        assert_eq!(emb.column_names(), vec!["discre_1", "discre_2"]);
        assert_eq!(emb.row("p1").unwrap(), &[2.0, 4.0]);
    }

    proptest! {
        #[test]
        fn aggregations_are_permutation_invariant(
            probs in proptest::collection::vec(0.0f64..=1.0, 1..20),
            seed in any::<u64>(),
        ) {
            use rand::seq::SliceRandom;
            use rand::SeedableRng;
            let mut shuffled = probs.clone();
            shuffled.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let a = aggregate_mean_probability(&probs).unwrap();
            let b = aggregate_mean_probability(&shuffled).unwrap();
            prop_assert!((a - b).abs() < 1e-12);
            let flags: Vec<bool> = probs.iter().map(|p| *p > 0.5).collect();
            let sflags: Vec<bool> = shuffled.iter().map(|p| *p > 0.5).collect();
            prop_assert_eq!(aggregate_proportion(&flags).unwrap(), aggregate_proportion(&sflags).unwrap());
        }
    }
}
