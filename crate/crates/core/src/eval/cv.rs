use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{FeatureTable, Pca, Standardizer};
use crate::scoring::CognitiveStyleClass;

use super::auc::{macro_ovr_auc, ovr_aucs};
use super::folds::stratified_folds;
use super::logistic::{argmax, fit_logistic};

pub const AGGREGATION: &str = "macro_ovr";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub feature_set_name: String,
    pub k: usize,
    pub seed: u64,
    pub lambda: f64,
    /// Project onto this many principal components, fit per training fold.
    pub reduce_to: Option<usize>,
}

impl CvConfig {
    pub fn new(feature_set_name: impl Into<String>) -> Self {
        CvConfig {
            feature_set_name: feature_set_name.into(),
            k: 5,
            seed: 0,
            lambda: 1.0,
            reduce_to: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub fold: usize,
    pub n_train: usize,
    pub n_test: usize,
    pub iterations: usize,
    pub final_loss: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LlmRunStats {
    pub mode: String,
    pub records: usize,
    pub scored: usize,
    pub retried: usize,
    pub excluded: usize,
    pub parse_failure_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvaluationReport {
    pub feature_set_name: String,
    pub per_fold_auc: Vec<f64>,
    pub mean_auc: f64,
    pub per_class_auc: BTreeMap<CognitiveStyleClass, f64>,
    /// Rows are true classes, columns predicted, both in class-index order.
    pub confusion: [[u64; 4]; 4],
    pub k_features: usize,
    pub n_participants: usize,
    pub aggregation: String,
    pub folds: usize,
    pub seed: u64,
    pub lambda: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reduction: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fold_details: Vec<FoldSummary>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub llm: Option<LlmRunStats>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub warnings: Vec<String>,
}

impl EvaluationReport {
    pub fn write_json<W: Write>(&self, mut out: W) -> Result<()> {
        serde_json::to_writer_pretty(&mut out, self)?;
        out.write_all(b"\n")?;
        Ok(())
    }
}

/// Summary CSV with one `feature_set,auc,k` row per report.
pub fn write_summary_csv<W: Write>(out: W, reports: &[EvaluationReport]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["feature_set", "auc", "k"])?;
    for r in reports {
        w.write_record([
            r.feature_set_name.clone(),
            format!("{:.4}", r.mean_auc),
            r.k_features.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub(crate) fn confusion_matrix(probs: &[Vec<f64>], labels: &[usize]) -> [[u64; 4]; 4] {
    let mut m = [[0u64; 4]; 4];
    for (p, &l) in probs.iter().zip(labels) {
        m[l][argmax(p)] += 1;
    }
    m
}

struct FoldOutput {
    ids: Vec<String>,
    probs: Vec<Vec<f64>>,
    auc: f64,
    summary: FoldSummary,
    width: usize,
}

/// Stratified k-fold evaluation of a 4-class logistic model.
///
/// Standardization (and PCA when configured) is fit on each training fold
/// only. Folds run on scoped threads and are reduced in fold order.
pub fn cross_validate(
    table: &FeatureTable,
    labels: &BTreeMap<String, CognitiveStyleClass>,
    config: &CvConfig,
) -> Result<EvaluationReport> {
    if let Some(id) = labels.keys().find(|id| table.row(id).is_none()) {
        return Err(Error::validation(
            format!("participant {id}"),
            "labelled participant has no feature row",
        ));
    }
    if table.width() == 0 {
        return Err(Error::validation("table", "no feature columns"));
    }
    for class in CognitiveStyleClass::ALL {
        if !labels.values().any(|&c| c == class) {
            return Err(Error::Config(format!("class {class} has no members")));
        }
    }
    let mut warnings = Vec::new();
    let extra = table.len() - labels.len();
    if extra > 0 {
        warnings.push(format!("{extra} feature row(s) without an outcome were ignored"));
    }
    let folds = stratified_folds(labels, config.k, config.seed)?;
    let label_idx = |id: &str| labels[id].index();

    let run_fold = |fold: usize| -> Result<FoldOutput> {
        let train = folds.train_ids(fold);
        let test = folds.test_ids(fold);
        let std = Standardizer::fit(table, &train)?;
        let mut fitted = std.transform(table)?;
        if let Some(k) = config.reduce_to {
            fitted = Pca::fit(&fitted, &train, k)?.transform(&fitted)?;
        }
        let x_train = fitted.matrix(train.iter().copied())?;
        let y_train: Vec<usize> = train.iter().map(|id| label_idx(id)).collect();
        let mut model = fit_logistic(&x_train, &y_train, CognitiveStyleClass::COUNT, config.lambda)?;
        model.meta.fold = Some(fold);
        let x_test = fitted.matrix(test.iter().copied())?;
        let y_test: Vec<usize> = test.iter().map(|id| label_idx(id)).collect();
        let probs: Vec<Vec<f64>> = x_test.iter().map(|r| model.predict_proba(r)).collect();
        let auc = macro_ovr_auc(&probs, &y_test, CognitiveStyleClass::COUNT)?;
        Ok(FoldOutput {
            ids: test.iter().map(|s| s.to_string()).collect(),
            probs,
            auc,
            summary: FoldSummary {
                fold,
                n_train: train.len(),
                n_test: test.len(),
                iterations: model.meta.iterations,
                final_loss: model.meta.final_loss,
                converged: model.meta.converged,
            },
            width: fitted.width(),
        })
    };

    let outputs: Vec<Result<FoldOutput>> = std::thread::scope(|s| {
        let handles: Vec<_> = (0..config.k).map(|f| s.spawn(move || run_fold(f))).collect();
        handles
            .into_iter()
            .map(|h| h.join().expect("fold worker panicked"))
            .collect()
    });

    let mut per_fold_auc = Vec::with_capacity(config.k);
    let mut fold_details = Vec::with_capacity(config.k);
    let mut pooled_probs = Vec::with_capacity(labels.len());
    let mut pooled_labels = Vec::with_capacity(labels.len());
    let mut k_features = table.width();
    for out in outputs {
        let out = out?;
        per_fold_auc.push(out.auc);
        if !out.summary.converged {
            warnings.push(format!("fold {}: optimizer hit the iteration cap", out.summary.fold));
        }
        fold_details.push(out.summary);
        k_features = k_features.min(out.width);
        for (id, p) in out.ids.iter().zip(out.probs) {
            pooled_labels.push(label_idx(id));
            pooled_probs.push(p);
        }
    }
    let per_class = ovr_aucs(&pooled_probs, &pooled_labels, CognitiveStyleClass::COUNT)?;
    let mean_auc = per_fold_auc.iter().sum::<f64>() / per_fold_auc.len() as f64;
    Ok(EvaluationReport {
        feature_set_name: config.feature_set_name.clone(),
        mean_auc,
        per_fold_auc,
        per_class_auc: CognitiveStyleClass::ALL.into_iter().zip(per_class).collect(),
        confusion: confusion_matrix(&pooled_probs, &pooled_labels),
        k_features,
        n_participants: labels.len(),
        aggregation: AGGREGATION.into(),
        folds: config.k,
        seed: config.seed,
        lambda: config.lambda,
        reduction: config.reduce_to.map(|k| format!("pca:{k}")),
        fold_details,
        llm: None,
        warnings,
    })
}
