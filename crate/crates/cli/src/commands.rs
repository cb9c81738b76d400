//! Batch subcommands. Each one reads its inputs, writes its outputs into an
//! output directory and finishes with a `manifest.json`.

use std::collections::BTreeMap;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};

use cogstyle_core::eval::{
    cross_validate, effect_size_table, generate_synthetic, run_llm_baseline, synthetic_records,
    write_summary_csv, ChatClient, CvConfig, EffectSpec, EvaluationReport, LlmRunConfig,
    PlantedShift, PromptMode,
};
use cogstyle_core::features::{join_features, read_feature_file, write_csv, FeatureTable};
use cogstyle_core::protocol::{audit_record, read_ndjson, write_ndjson, ParticipantRecord};
use cogstyle_core::{CisScale, CognitiveStyleClass};

use crate::manifest::RunManifest;
use crate::CliError;

pub const OUTCOMES_HEADER: [&str; 7] = [
    "participant_id",
    "choice",
    "loc_plus",
    "cis",
    "cis_scaled",
    "inf",
    "class",
];

fn require_file(path: &Path) -> Result<()> {
    if !path.is_file() {
        return Err(CliError::Usage(format!("input file {} does not exist", path.display())).into());
    }
    Ok(())
}

fn create_out_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(
        File::create(&path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn stem(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "features".into())
}

// ---------------------------------------------------------------- score

#[derive(Debug, Clone)]
pub struct ScoreArgs {
    pub records: PathBuf,
    pub out_dir: PathBuf,
    pub cis_scale: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize)]
pub struct ScoreSummary {
    pub scored: usize,
    pub incomplete: usize,
    pub errors: usize,
}

fn write_outcomes<W: Write>(
    out: W,
    records: &[(ParticipantRecord, cogstyle_core::DecisionOutcome)],
    scale: CisScale,
) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(OUTCOMES_HEADER)?;
    for (r, o) in records {
        w.write_record([
            r.participant_id.clone(),
            o.choice.as_str().to_string(),
            r.config.loc_plus.as_str().to_string(),
            o.cis.to_string(),
            format!("{:?}", scale.apply(o.cis)),
            o.inf.to_string(),
            o.style.as_str().to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Scores a record file into `outcomes.csv`. Invalid lines and records whose
/// stored outcome fails the audit are listed in `score_errors.csv`; they make
/// the command fail after all outputs are written.
pub fn cmd_score(args: &ScoreArgs) -> Result<ScoreSummary> {
    require_file(&args.records)?;
    let scale = CisScale::new(args.cis_scale).map_err(|e| CliError::Usage(e.to_string()))?;
    create_out_dir(&args.out_dir)?;
    let file = File::open(&args.records)?;
    let rows = read_ndjson(BufReader::new(file))?;

    let mut scored = Vec::new();
    let mut errors: Vec<(usize, String, String)> = Vec::new();
    let mut summary = ScoreSummary::default();
    for (line, row) in rows {
        match row {
            Ok(rec) => {
                if !rec.is_complete() {
                    summary.incomplete += 1;
                    continue;
                }
                match audit_record(&rec) {
                    Ok(outcome) => scored.push((rec, outcome)),
                    Err(e) => errors.push((line, rec.participant_id.clone(), e.to_string())),
                }
            }
            Err(msg) => errors.push((line, String::new(), msg)),
        }
    }
    summary.scored = scored.len();
    summary.errors = errors.len();

    write_outcomes(create(&args.out_dir, "outcomes.csv")?, &scored, scale)?;
    {
        let mut w = csv::Writer::from_writer(create(&args.out_dir, "score_errors.csv")?);
        w.write_record(["line", "participant_id", "error"])?;
        for (l, id, msg) in &errors {
            w.write_record([l.to_string(), id.clone(), msg.clone()])?;
        }
        w.flush()?;
    }
    let mut m = RunManifest::new("score", None);
    m.param("cis_scale", args.cis_scale).param("summary", &summary);
    m.input(&args.records)?;
    m.output(&args.out_dir, "outcomes.csv")?
        .output(&args.out_dir, "score_errors.csv")?;
    m.write(&args.out_dir)?;

    if !errors.is_empty() {
        return Err(CliError::RowErrors {
            count: errors.len(),
            report: args.out_dir.join("score_errors.csv").display().to_string(),
        }
        .into());
    }
    Ok(summary)
}

/// Reads `participant_id` and `class` from an outcomes CSV.
pub fn read_outcomes(path: &Path) -> Result<BTreeMap<String, CognitiveStyleClass>> {
    require_file(path)?;
    let mut r = csv::Reader::from_path(path)?;
    let header = r.headers()?.clone();
    let col = |name: &str| {
        header
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Usage(format!("{}: no `{name}` column", path.display())))
    };
    let (id_col, class_col) = (col("participant_id")?, col("class")?);
    let mut out = BTreeMap::new();
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let id = rec.get(id_col).unwrap_or("").trim().to_string();
        let class = CognitiveStyleClass::parse(rec.get(class_col).unwrap_or(""))
            .with_context(|| format!("{} line {}", path.display(), i + 2))?;
        if out.insert(id.clone(), class).is_some() {
            anyhow::bail!(cogstyle_core::Error::validation(
                format!("{} line {}", path.display(), i + 2),
                format!("duplicate participant {id}")
            ));
        }
    }
    Ok(out)
}

fn labels_for(
    table: &FeatureTable,
    labels: &BTreeMap<String, CognitiveStyleClass>,
    warnings: &mut Vec<String>,
) -> BTreeMap<String, CognitiveStyleClass> {
    let kept: BTreeMap<_, _> = labels
        .iter()
        .filter(|(id, _)| table.row(id).is_some())
        .map(|(id, c)| (id.clone(), *c))
        .collect();
    let dropped = labels.len() - kept.len();
    if dropped > 0 {
        let msg = format!("{dropped} labelled participant(s) without feature rows were dropped");
        log::warn!("{msg}");
        warnings.push(msg);
    }
    kept
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Clone, Serialize)]
pub struct EvalArgs {
    pub features: Vec<PathBuf>,
    pub outcomes: PathBuf,
    pub k: usize,
    pub seed: u64,
    pub lambda: f64,
    pub reduce: Option<usize>,
    /// Also evaluate the inner join of all feature files.
    pub combine: bool,
    pub out_dir: PathBuf,
}

/// Cross-validates every feature file (and optionally their join) and writes
/// `report.json`, `report.csv` and `manifest.json`.
pub fn cmd_eval(args: &EvalArgs) -> Result<Vec<EvaluationReport>> {
    if args.features.is_empty() {
        return Err(CliError::Usage("at least one --features file is required".into()).into());
    }
    for f in &args.features {
        require_file(f)?;
    }
    if !(args.lambda.is_finite() && args.lambda >= 0.0) {
        return Err(CliError::Usage(format!("lambda must be non-negative, got {}", args.lambda)).into());
    }
    let labels = read_outcomes(&args.outcomes)?;
    create_out_dir(&args.out_dir)?;

    let mut sets: Vec<(String, FeatureTable)> = Vec::new();
    for f in &args.features {
        let t = read_feature_file(f).with_context(|| format!("reading {}", f.display()))?;
        sets.push((stem(f), t));
    }
    if args.combine && sets.len() > 1 {
        let joined = join_features(&sets.iter().map(|(_, t)| t.clone()).collect::<Vec<_>>())?;
        let name = sets.iter().map(|(n, _)| n.as_str()).collect::<Vec<_>>().join("+");
        sets.push((name, joined));
    }

    let mut reports = Vec::new();
    for (name, table) in &sets {
        let mut warnings = Vec::new();
        let l = labels_for(table, &labels, &mut warnings);
        let cfg = CvConfig {
            feature_set_name: name.clone(),
            k: args.k,
            seed: args.seed,
            lambda: args.lambda,
            reduce_to: args.reduce,
        };
        let mut report = cross_validate(table, &l, &cfg).with_context(|| format!("feature set {name}"))?;
        warnings.append(&mut report.warnings);
        report.warnings = warnings;
        log::info!("{name}: mean AUC {:.4} over {} folds", report.mean_auc, report.folds);
        reports.push(report);
    }

    {
        let mut out = create(&args.out_dir, "report.json")?;
        serde_json::to_writer_pretty(&mut out, &reports)?;
        out.write_all(b"\n")?;
        out.flush()?;
    }
    write_summary_csv(create(&args.out_dir, "report.csv")?, &reports)?;

    let mut m = RunManifest::new("eval", Some(args.seed));
    m.param("k", args.k)
        .param("lambda", args.lambda)
        .param("reduce", args.reduce)
        .param("combine", args.combine)
        .param("aggregation", cogstyle_core::eval::AGGREGATION);
    for f in &args.features {
        m.input(f)?;
    }
    m.input(&args.outcomes)?;
    m.output(&args.out_dir, "report.json")?
        .output(&args.out_dir, "report.csv")?;
    m.write(&args.out_dir)?;
    Ok(reports)
}

// ---------------------------------------------------------------- effects

#[derive(Debug, Clone)]
pub struct EffectsArgs {
    pub features: Vec<PathBuf>,
    pub outcomes: PathBuf,
    pub out_dir: PathBuf,
}

pub fn cmd_effects(args: &EffectsArgs) -> Result<cogstyle_core::EffectSizeTable> {
    if args.features.is_empty() {
        return Err(CliError::Usage("at least one --features file is required".into()).into());
    }
    let mut tables = Vec::new();
    for f in &args.features {
        require_file(f)?;
        tables.push(read_feature_file(f).with_context(|| format!("reading {}", f.display()))?);
    }
    let labels = read_outcomes(&args.outcomes)?;
    create_out_dir(&args.out_dir)?;
    let table = join_features(&tables)?;
    let l = labels_for(&table, &labels, &mut Vec::new());
    let effects = effect_size_table(&table, &l)?;
    effects.write_csv(create(&args.out_dir, "effects.csv")?)?;

    let mut m = RunManifest::new("effects", None);
    m.param("participants", l.len());
    for f in &args.features {
        m.input(f)?;
    }
    m.input(&args.outcomes)?;
    m.output(&args.out_dir, "effects.csv")?;
    m.write(&args.out_dir)?;
    Ok(effects)
}

// ---------------------------------------------------------------- synth

/// Synthetic-data specification, read from TOML or JSON.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    #[serde(default = "default_priors")]
    pub priors: [f64; 4],
    pub n_features: usize,
    #[serde(default)]
    pub shifts: Vec<PlantedShift>,
}

/// Class shares of the original study, in class-index order.
pub const STUDY_PRIORS: [f64; 4] = [0.06, 0.17, 0.11, 0.66];

fn default_priors() -> [f64; 4] {
    STUDY_PRIORS
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            priors: STUDY_PRIORS,
            n_features: 8,
            shifts: vec![PlantedShift {
                feature: 0,
                class: CognitiveStyleClass::DownCisDownInf,
                d: 0.8,
            }],
        }
    }
}

impl SynthSpec {
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let spec = if path.extension().is_some_and(|e| e == "json") {
            serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        } else {
            toml::from_str(&text).map_err(|e| CliError::Usage(format!("{}: {e}", path.display())))?
        };
        Ok(spec)
    }

    pub fn effects(&self) -> EffectSpec {
        EffectSpec {
            n_features: self.n_features,
            shifts: self.shifts.clone(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SynthArgs {
    pub n: usize,
    pub seed: u64,
    pub spec: Option<PathBuf>,
    pub out_dir: PathBuf,
}

/// Writes `records.ndjson`, `features.csv` and `outcomes.csv` for `n`
/// synthetic participants.
pub fn cmd_synth(args: &SynthArgs) -> Result<()> {
    let spec = match &args.spec {
        Some(p) => {
            require_file(p)?;
            SynthSpec::load(p)?
        }
        None => SynthSpec::default(),
    };
    create_out_dir(&args.out_dir)?;
    let (table, labels) = generate_synthetic(args.n, args.seed, &spec.priors, &spec.effects())?;
    let records = synthetic_records(&labels, args.seed)?;
    write_ndjson(create(&args.out_dir, "records.ndjson")?, &records)?;
    write_csv(create(&args.out_dir, "features.csv")?, &table)?;
    let scored = records
        .into_iter()
        .map(|r| {
            let o = audit_record(&r)?;
            Ok((r, o))
        })
        .collect::<cogstyle_core::Result<Vec<_>>>()?;
    write_outcomes(create(&args.out_dir, "outcomes.csv")?, &scored, CisScale::default())?;

    let mut m = RunManifest::new("synth", Some(args.seed));
    m.param("n", args.n).param("spec", &spec);
    if let Some(p) = &args.spec {
        m.input(p)?;
    }
    for name in ["records.ndjson", "features.csv", "outcomes.csv"] {
        m.output(&args.out_dir, name)?;
    }
    m.write(&args.out_dir)?;
    Ok(())
}

// ---------------------------------------------------------------- llm

#[derive(Debug, Clone)]
pub struct LlmArgs {
    pub records: PathBuf,
    pub mode: PromptMode,
    pub max_in_flight: usize,
    pub out_dir: PathBuf,
}

/// Runs the chat-model baseline with `client` and writes `llm_report.json`
/// and `llm_results.ndjson`. On a transport failure the completed results
/// are left in `llm_partial.ndjson`.
pub fn cmd_llm_baseline(args: &LlmArgs, client: &dyn ChatClient, endpoint: &str, model: &str) -> Result<EvaluationReport> {
    require_file(&args.records)?;
    create_out_dir(&args.out_dir)?;
    let rows = read_ndjson(BufReader::new(File::open(&args.records)?))?;
    let mut records = Vec::new();
    for (line, row) in rows {
        match row {
            Ok(r) => records.push(r),
            Err(msg) => log::warn!("{} line {line}: {msg}", args.records.display()),
        }
    }
    let config = LlmRunConfig {
        mode: args.mode,
        max_in_flight: args.max_in_flight,
        partial_results: Some(args.out_dir.join("llm_partial.ndjson")),
    };
    let out = run_llm_baseline(&records, client, &config)?;
    out.report.write_json(create(&args.out_dir, "llm_report.json")?)?;
    {
        let mut w = create(&args.out_dir, "llm_results.ndjson")?;
        for r in &out.results {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        w.flush()?;
    }
    let mut m = RunManifest::new("llm-baseline", None);
    m.param("mode", args.mode)
        .param("max_in_flight", args.max_in_flight)
        .param("endpoint", endpoint)
        .param("model", model);
    m.input(&args.records)?;
    m.output(&args.out_dir, "llm_report.json")?
        .output(&args.out_dir, "llm_results.ndjson")?;
    m.write(&args.out_dir)?;
    Ok(out.report)
}
